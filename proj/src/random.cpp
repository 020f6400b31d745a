#include "swlab/random.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "swlab/errors.hpp"

namespace swlab {

namespace {

// Below this mean the binomial is drawn by sequential inversion.
constexpr double kInversionMeanLimit = 12.0;
// Below this many draws the hypergeometric is drawn item by item.
constexpr std::int64_t kSequentialDrawLimit = 16;

double log_gamma(double x) {
  int sign = 0;
  return ::lgamma_r(x, &sign);
}

double log_choose(std::int64_t n, std::int64_t k) {
  return log_gamma(static_cast<double>(n) + 1.0) - log_gamma(static_cast<double>(k) + 1.0) -
         log_gamma(static_cast<double>(n - k) + 1.0);
}

std::int64_t binomial_inversion(Stream& rng, std::int64_t n, double p) {
  const double q = 1.0 - p;
  const double s = p / q;
  const double a = static_cast<double>(n + 1) * s;
  const double r0 = std::exp(static_cast<double>(n) * std::log1p(-p));
  for (;;) {
    double u = rng.uniform();
    double r = r0;
    std::int64_t x = 0;
    while (u > r) {
      u -= r;
      ++x;
      if (x > n) break;
      r *= a / static_cast<double>(x) - s;
    }
    if (x <= n) return x;
  }
}

// Draws with draws <= total/2 and marked <= total/2 (callers reduce by symmetry).
std::int64_t hypergeometric_reduced(Stream& rng, std::int64_t d, std::int64_t m,
                                    std::int64_t total) {
  if (d < kSequentialDrawLimit) {
    std::int64_t hits = 0;
    std::int64_t rem_m = m;
    std::int64_t rem_total = total;
    for (std::int64_t i = 0; i < d; ++i) {
      if (static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(rem_total))) < rem_m) {
        ++hits;
        --rem_m;
      }
      --rem_total;
    }
    return hits;
  }
  const std::int64_t lo = std::max<std::int64_t>(0, d + m - total);
  const std::int64_t hi = std::min(d, m);
  const auto nd = static_cast<double>(total);
  auto mode = static_cast<std::int64_t>(std::floor((static_cast<double>(d) + 1.0) *
                                                   (static_cast<double>(m) + 1.0) / (nd + 2.0)));
  mode = std::clamp(mode, lo, hi);
  const double p_mode = std::exp(hypergeometric_log_pmf(mode, d, m, total));
  const auto other = static_cast<double>(total - m - d);
  // f(k+1)/f(k)
  auto up = [&](std::int64_t k) {
    const auto kd = static_cast<double>(k);
    return (static_cast<double>(m) - kd) * (static_cast<double>(d) - kd) /
           ((kd + 1.0) * (other + kd + 1.0));
  };
  for (;;) {
    double u = rng.uniform() - p_mode;
    if (u <= 0.0) return mode;
    std::int64_t kl = mode;
    std::int64_t kr = mode;
    double pl = p_mode;
    double pr = p_mode;
    while (kl > lo || kr < hi) {
      if (kr < hi) {
        pr *= up(kr);
        ++kr;
        u -= pr;
        if (u <= 0.0) return kr;
      }
      if (kl > lo) {
        pl /= up(kl - 1);
        --kl;
        u -= pl;
        if (u <= 0.0) return kl;
      }
      if (pl == 0.0 && pr == 0.0) break;
    }
    // Rounding left residual mass; redraw.
  }
}

}  // namespace

Stream::Stream(const State& state) : s_(state) {
  if (s_[0] == 0 && s_[1] == 0 && s_[2] == 0 && s_[3] == 0) s_[3] = 1;
}

std::uint64_t Stream::below(std::uint64_t bound) noexcept {
  std::uint64_t x = (*this)();
  __uint128_t m = static_cast<__uint128_t>(x) * bound;
  auto low = static_cast<std::uint64_t>(m);
  if (low < bound) {
    const std::uint64_t threshold = -bound % bound;
    while (low < threshold) {
      x = (*this)();
      m = static_cast<__uint128_t>(x) * bound;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  std::uint64_t z = x + 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Stream derive_stream(std::uint64_t seed, std::uint64_t replica) {
  // Four Feistel rounds over the (seed, replica) pair: a bijection on 128 bits.
  std::uint64_t left = seed;
  std::uint64_t right = replica ^ 0xd1b54a32d192ed03ULL;
  left ^= splitmix64(right);
  right ^= splitmix64(left);
  left ^= splitmix64(right);
  right ^= splitmix64(left);
  Stream::State state{left, right, splitmix64(left ^ 0x8bb84b93962eacc9ULL),
                      splitmix64(right ^ 0x4b33a62ed433d4a3ULL)};
  Stream rng(state);
  for (int i = 0; i < 16; ++i) rng();
  return rng;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) noexcept {
  return splitmix64(seed ^ splitmix64(label + 0x632be59bd9b4e019ULL));
}

std::int64_t binomial(Stream& rng, std::int64_t trials, double prob) {
  if (trials <= 0 || !(prob > 0.0)) return 0;
  if (prob >= 1.0) return trials;
  const bool flip = prob > 0.5;
  const double p = flip ? 1.0 - prob : prob;
  std::int64_t x = 0;
  if (static_cast<double>(trials) * p < kInversionMeanLimit) {
    x = binomial_inversion(rng, trials, p);
  } else {
    std::binomial_distribution<std::int64_t> dist(trials, p);
    x = dist(rng);
  }
  return flip ? trials - x : x;
}

std::int64_t hypergeometric(Stream& rng, std::int64_t draws, std::int64_t marked,
                            std::int64_t total) {
  if (total < 0 || draws < 0 || marked < 0 || draws > total || marked > total) {
    throw precondition_error("hypergeometric: need 0 <= draws, marked <= total");
  }
  if (draws == 0 || marked == 0) return 0;
  if (marked == total) return draws;
  if (draws == total) return marked;
  if (2 * marked > total) return draws - hypergeometric(rng, draws, total - marked, total);
  if (2 * draws > total) return marked - hypergeometric(rng, total - draws, marked, total);
  return hypergeometric_reduced(rng, draws, marked, total);
}

void multinomial_uniform(Stream& rng, std::int64_t trials, std::span<std::int64_t> out) {
  const std::size_t k = out.size();
  if (k == 0) return;
  std::int64_t rem = trials;
  for (std::size_t i = 0; i + 1 < k; ++i) {
    const std::int64_t x = binomial(rng, rem, 1.0 / static_cast<double>(k - i));
    out[i] = x;
    rem -= x;
  }
  out[k - 1] = rem;
}

void multivariate_hypergeometric(Stream& rng, std::int64_t draws,
                                 std::span<const std::int64_t> urn,
                                 std::span<std::int64_t> out) {
  std::int64_t total = 0;
  for (const auto c : urn) {
    if (c < 0) throw precondition_error("multivariate_hypergeometric: negative urn count");
    total += c;
  }
  if (draws < 0 || draws > total) {
    throw precondition_error("multivariate_hypergeometric: draws exceed urn size");
  }
  std::int64_t rem_draws = draws;
  std::int64_t rem_total = total;
  for (std::size_t i = 0; i < urn.size(); ++i) {
    const std::int64_t x = rem_draws == 0 ? 0 : hypergeometric(rng, rem_draws, urn[i], rem_total);
    out[i] = x;
    rem_draws -= x;
    rem_total -= urn[i];
  }
}

double binomial_log_pmf(std::int64_t k, std::int64_t trials, double prob) {
  if (k < 0 || k > trials) return -INFINITY;
  if (prob <= 0.0) return k == 0 ? 0.0 : -INFINITY;
  if (prob >= 1.0) return k == trials ? 0.0 : -INFINITY;
  return log_choose(trials, k) + static_cast<double>(k) * std::log(prob) +
         static_cast<double>(trials - k) * std::log1p(-prob);
}

double hypergeometric_log_pmf(std::int64_t k, std::int64_t draws, std::int64_t marked,
                              std::int64_t total) {
  if (k < std::max<std::int64_t>(0, draws + marked - total) || k > std::min(draws, marked)) {
    return -INFINITY;
  }
  return log_choose(marked, k) + log_choose(total - marked, draws - k) - log_choose(total, draws);
}

}  // namespace swlab
