#include "swlab/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>

#include "swlab/errors.hpp"
#include "swlab/exact.hpp"
#include "swlab/parallel.hpp"

namespace swlab {

namespace {

constexpr double kExactVectorLimit = 5e6;
constexpr std::int64_t kMinProfileReplicas = 1000;

using BinMap = std::map<std::vector<std::int64_t>, std::int32_t>;

std::int32_t intern(BinMap& bins, std::vector<std::int64_t> key) {
  const auto next = static_cast<std::int32_t>(bins.size());
  return bins.emplace(std::move(key), next).first->second;
}

// Burn-in length used for reference chains and stationary checks.
std::int64_t long_run_length(const ModelParams& params) {
  const double log_n = std::log(static_cast<double>(params.n()));
  if (params.beta() > params.q()) {
    return static_cast<std::int64_t>(std::ceil(10.0 * cutoff_constant(params) * log_n)) + 1000;
  }
  return static_cast<std::int64_t>(std::ceil(10.0 * log_n)) + 1000;
}

std::vector<double> tv_series(const CutoffProfile& profile,
                              std::span<const std::int64_t> sample_pick,
                              std::span<const std::int64_t> reference_pick) {
  const auto bins = static_cast<std::size_t>(profile.bin_count);
  std::vector<double> reference(bins, 0.0);
  if (profile.reference_kind == ReferenceKind::ExactStationary) {
    std::copy(profile.reference_probs.begin(), profile.reference_probs.end(), reference.begin());
  } else {
    const double w = 1.0 / static_cast<double>(reference_pick.size());
    for (const auto r : reference_pick) {
      reference[static_cast<std::size_t>(profile.reference_bins[static_cast<std::size_t>(r)])] += w;
    }
  }
  std::vector<double> out;
  out.reserve(profile.sample_bins.size());
  std::vector<double> law(bins, 0.0);
  const double w = 1.0 / static_cast<double>(sample_pick.size());
  for (const auto& at_t : profile.sample_bins) {
    std::fill(law.begin(), law.end(), 0.0);
    for (const auto r : sample_pick) law[static_cast<std::size_t>(at_t[static_cast<std::size_t>(r)])] += w;
    out.push_back(binned_tv(law, reference));
  }
  return out;
}

std::vector<std::int64_t> identity_pick(std::size_t size) {
  std::vector<std::int64_t> v(size);
  std::iota(v.begin(), v.end(), std::int64_t{0});
  return v;
}

double sup_distance(std::span<const std::int64_t> sorted, std::int64_t n, std::span<const double> m) {
  double worst = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    worst = std::max(worst, std::fabs(static_cast<double>(sorted[i]) / static_cast<double>(n) - m[i]));
  }
  return worst;
}

double quantile_sorted(const std::vector<double>& v, double level) {
  const double pos = level * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

}  // namespace

const char* reference_name(ReferenceKind kind) noexcept {
  return kind == ReferenceKind::ExactStationary ? "exact_stationary" : "long_run";
}

std::vector<std::int64_t> bin_key(std::span<const std::int64_t> sorted_counts, std::int64_t n,
                                  double bin_width) {
  const double width = bin_width * std::sqrt(static_cast<double>(n));
  std::vector<std::int64_t> key(sorted_counts.size());
  for (std::size_t i = 0; i < sorted_counts.size(); ++i) {
    key[i] = static_cast<std::int64_t>(std::floor(static_cast<double>(sorted_counts[i]) / width));
  }
  return key;
}

double sorted_count_vectors_estimate(std::int64_t n, int q) {
  double estimate = 1.0;
  for (int i = 1; i < q; ++i) estimate *= static_cast<double>(n + 1) / (static_cast<double>(i) * i);
  return estimate;
}

double binned_tv(std::span<const double> a, std::span<const double> b) {
  const std::size_t size = std::max(a.size(), b.size());
  double total = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double x = i < a.size() ? a[i] : 0.0;
    const double y = i < b.size() ? b[i] : 0.0;
    total += std::fabs(x - y);
  }
  return std::clamp(0.5 * total, 0.0, 1.0);
}

CutoffProfile estimate_tv_profile(const ModelParams& params, const TvProfileOptions& options,
                                  std::uint64_t seed) {
  if (options.replicas < kMinProfileReplicas) {
    throw precondition_error("estimate_tv_profile: replicas must be >= 1000");
  }
  if (options.t_max < 0) throw precondition_error("estimate_tv_profile: t_max must be >= 0");
  if (!(options.bin_width > 0)) throw precondition_error("estimate_tv_profile: bin_width must be > 0");
  const int q = params.q();
  const std::int64_t n = params.n();
  const SpinCounts start = options.start.value_or(SpinCounts::monochromatic(q, n));
  if (start.q() != q || start.n() != n) {
    throw precondition_error("estimate_tv_profile: start does not match params");
  }

  CutoffProfile profile;
  profile.params = params;
  profile.replicas = options.replicas;
  profile.bin_width = options.bin_width;
  switch (options.reference) {
    case ReferenceChoice::Exact: profile.reference_kind = ReferenceKind::ExactStationary; break;
    case ReferenceChoice::LongRun: profile.reference_kind = ReferenceKind::LongRun; break;
    case ReferenceChoice::Auto:
      profile.reference_kind = sorted_count_vectors_estimate(n, q) <= kExactVectorLimit
                                   ? ReferenceKind::ExactStationary
                                   : ReferenceKind::LongRun;
      break;
  }

  const std::uint64_t sample_seed = derive_seed(seed, 0);
  const std::uint64_t reference_seed = derive_seed(seed, 1);
  const auto paths = run_replicas(options.replicas, options.jobs, [&](std::int64_t r) {
    Stream rng = derive_stream(sample_seed, static_cast<std::uint64_t>(r));
    std::vector<std::vector<std::int64_t>> keys;
    keys.reserve(static_cast<std::size_t>(options.t_max) + 1);
    SpinCounts state = start;
    keys.push_back(bin_key(state.sorted(), n, options.bin_width));
    for (std::int64_t t = 0; t < options.t_max; ++t) {
      state = sw_step_counts(state, params, rng);
      keys.push_back(bin_key(state.sorted(), n, options.bin_width));
    }
    return keys;
  });

  BinMap bins;
  if (profile.reference_kind == ReferenceKind::ExactStationary) {
    const auto law = stationary_sorted_counts(n, q, params.beta());
    for (const auto& [counts, prob] : law) {
      const std::int32_t id = intern(bins, bin_key(counts, n, options.bin_width));
      if (profile.reference_probs.size() <= static_cast<std::size_t>(id)) {
        profile.reference_probs.resize(static_cast<std::size_t>(id) + 1, 0.0);
      }
      profile.reference_probs[static_cast<std::size_t>(id)] += prob;
    }
  } else {
    const std::int64_t ref_count =
        options.reference_replicas > 0 ? options.reference_replicas : options.replicas;
    const std::int64_t length = long_run_length(params);
    const auto finals = run_replicas(ref_count, options.jobs, [&](std::int64_t r) {
      Stream rng = derive_stream(reference_seed, static_cast<std::uint64_t>(r));
      SpinCounts state = SpinCounts::uniform_random(q, n, rng);
      for (std::int64_t t = 0; t < length; ++t) state = sw_step_counts(state, params, rng);
      return bin_key(state.sorted(), n, options.bin_width);
    });
    profile.reference_bins.reserve(finals.size());
    for (const auto& key : finals) profile.reference_bins.push_back(intern(bins, key));
  }

  profile.sample_bins.assign(static_cast<std::size_t>(options.t_max) + 1,
                             std::vector<std::int32_t>(static_cast<std::size_t>(options.replicas)));
  for (std::int64_t t = 0; t <= options.t_max; ++t) {
    profile.t_grid.push_back(t);
    for (std::int64_t r = 0; r < options.replicas; ++r) {
      profile.sample_bins[static_cast<std::size_t>(t)][static_cast<std::size_t>(r)] =
          intern(bins, paths[static_cast<std::size_t>(r)][static_cast<std::size_t>(t)]);
    }
  }
  profile.bin_count = static_cast<std::int32_t>(bins.size());
  profile.reference_probs.resize(bins.size(), 0.0);

  const auto samples = identity_pick(static_cast<std::size_t>(options.replicas));
  const auto references = identity_pick(profile.reference_bins.size());
  profile.tv_hat = tv_series(profile, samples, references);
  return profile;
}

std::vector<double> exact_binned_tv_profile(int n, int q, double beta, std::int64_t t_max,
                                            double bin_width) {
  const ExactChain chain = build_exact_chain(n, q, beta);
  BinMap bins;
  auto binned = [&](std::span<const double> dist) {
    std::vector<double> law;
    for (const auto& [counts, prob] : project_sorted_counts(dist, n, q)) {
      const auto id = static_cast<std::size_t>(intern(bins, bin_key(counts, n, bin_width)));
      if (law.size() <= id) law.resize(id + 1, 0.0);
      law[id] += prob;
    }
    return law;
  };
  const std::vector<double> reference = binned(chain.stationary);
  std::vector<double> dist(chain.states, 0.0);
  dist[0] = 1.0;  // configuration 0: every vertex has spin 0
  std::vector<double> out;
  for (std::int64_t t = 0; t <= t_max; ++t) {
    if (t > 0) dist = evolve_distribution(chain, std::move(dist), 1);
    out.push_back(binned_tv(binned(dist), reference));
  }
  return out;
}

std::optional<double> crossing_time(std::span<const std::int64_t> t_grid,
                                    std::span<const double> tv, double level) {
  if (t_grid.size() != tv.size()) throw precondition_error("crossing_time: size mismatch");
  for (std::size_t i = 0; i < tv.size(); ++i) {
    if (tv[i] <= level) {
      if (i == 0) return static_cast<double>(t_grid[0]);
      const double frac = (tv[i - 1] - level) / (tv[i - 1] - tv[i]);
      return static_cast<double>(t_grid[i - 1]) +
             frac * static_cast<double>(t_grid[i] - t_grid[i - 1]);
    }
  }
  return std::nullopt;
}

std::pair<double, double> least_squares(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw precondition_error("least_squares: need >= 2 points");
  const auto count = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / count;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / count;
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw precondition_error("least_squares: x values are all equal");
  const double slope = sxy / sxx;
  return {my - slope * mx, slope};
}

MixingFit fit_mixing_time(std::span<const CutoffProfile> profiles, std::int64_t bootstrap,
                          std::uint64_t seed) {
  if (profiles.size() < 3) throw precondition_error("fit_mixing_time: need >= 3 values of n");
  for (std::size_t i = 1; i < profiles.size(); ++i) {
    if (profiles[i].params.n() <= profiles[i - 1].params.n()) {
      throw precondition_error("fit_mixing_time: n grid must be strictly increasing");
    }
  }
  if (profiles.back().params.n() < 100 * profiles.front().params.n()) {
    throw precondition_error("fit_mixing_time: n grid must span >= 2 decades");
  }
  MixingFit fit;
  std::vector<double> log_n;
  for (const auto& p : profiles) {
    const auto quarter = crossing_time(p.t_grid, p.tv_hat, 0.25);
    if (!quarter) {
      throw profile_too_short_error("profile at n = " + std::to_string(p.params.n()) +
                                    " never reaches tv <= 1/4");
    }
    const double three_quarter = crossing_time(p.t_grid, p.tv_hat, 0.75).value_or(*quarter);
    fit.n_grid.push_back(p.params.n());
    fit.tmix_quarter.push_back(*quarter);
    fit.tau_three_quarter.push_back(three_quarter);
    fit.window.push_back(*quarter - three_quarter);
    log_n.push_back(std::log(static_cast<double>(p.params.n())));
  }
  std::tie(fit.intercept, fit.slope) = least_squares(log_n, fit.tmix_quarter);
  fit.slope_ci = {fit.slope, fit.slope};

  const bool resamplable = std::all_of(profiles.begin(), profiles.end(), [](const CutoffProfile& p) {
    return !p.sample_bins.empty() && p.replicas > 0;
  });
  if (!resamplable || bootstrap <= 0) return fit;

  std::vector<double> slopes;
  slopes.reserve(static_cast<std::size_t>(bootstrap));
  std::vector<double> tmix(profiles.size());
  for (std::int64_t b = 0; b < bootstrap; ++b) {
    Stream rng = derive_stream(seed, static_cast<std::uint64_t>(b));
    bool ok = true;
    for (std::size_t i = 0; i < profiles.size() && ok; ++i) {
      const CutoffProfile& p = profiles[i];
      std::vector<std::int64_t> pick(static_cast<std::size_t>(p.replicas));
      for (auto& v : pick) v = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(p.replicas)));
      std::vector<std::int64_t> ref_pick(p.reference_bins.size());
      for (auto& v : ref_pick) v = static_cast<std::int64_t>(rng.below(p.reference_bins.size()));
      const auto tv = tv_series(p, pick, ref_pick);
      const auto quarter = crossing_time(p.t_grid, tv, 0.25);
      if (!quarter) ok = false;
      else tmix[i] = *quarter;
    }
    if (ok) slopes.push_back(least_squares(log_n, tmix).second);
  }
  fit.bootstrap_used = static_cast<std::int64_t>(slopes.size());
  if (slopes.size() >= 2) {
    std::sort(slopes.begin(), slopes.end());
    fit.slope_ci = {std::min(fit.slope, quantile_sorted(slopes, 0.025)),
                    std::max(fit.slope, quantile_sorted(slopes, 0.975))};
  }
  return fit;
}

SpinCounts rounded_counts(std::int64_t n, std::span<const double> proportions) {
  std::vector<std::int64_t> counts(proportions.size(), 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < proportions.size(); ++i) {
    const double exact = proportions[i] * static_cast<double>(n);
    counts[i] = static_cast<std::int64_t>(std::floor(exact));
    assigned += counts[i];
    remainders.emplace_back(exact - std::floor(exact), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++counts[remainders[k % remainders.size()].second];
  return SpinCounts(std::move(counts));
}

FluctuationTail step_fluctuation_tail(const ModelParams& params, std::int64_t replicas,
                                      std::uint64_t seed, std::optional<SpinCounts> start,
                                      int jobs) {
  if (replicas < 1) throw precondition_error("step_fluctuation_tail: replicas must be >= 1");
  const int q = params.q();
  const std::int64_t n = params.n();
  if (!start) {
    const double b = params.beta() > q ? fixed_point_a(params) : 1.0 / q;
    start = rounded_counts(n, kappa(b, q));
  }
  if (start->q() != q || start->n() != n) {
    throw precondition_error("step_fluctuation_tail: start does not match params");
  }
  const double alpha1 = static_cast<double>(start->sorted().front()) / static_cast<double>(n);
  const std::vector<double> target = kappa(drift_F(alpha1, params), q);
  const double root_n = std::sqrt(static_cast<double>(n));
  const auto values = run_replicas(replicas, jobs, [&](std::int64_t r) {
    Stream rng = derive_stream(seed, static_cast<std::uint64_t>(r));
    const SpinCounts next = sw_step_counts(*start, params, rng);
    return root_n * sup_distance(next.sorted(), n, target);
  });
  FluctuationTail out;
  out.replicas = replicas;
  for (const double r : kTailThresholds) {
    const auto hits = std::count_if(values.begin(), values.end(), [r](double v) { return v > r; });
    out.thresholds.push_back(r);
    out.tail.push_back(static_cast<double>(hits) / static_cast<double>(replicas));
  }
  return out;
}

double multinomial_fluctuation_tail_exact(std::int64_t n, int q, double r) {
  if (n < 1 || q < 2) throw precondition_error("multinomial_fluctuation_tail_exact: need n >= 1, q >= 2");
  double vectors = 1.0;
  for (int i = 1; i < q; ++i) vectors *= static_cast<double>(n + 1);
  if (vectors > 1e8) throw size_guard_error("multinomial_fluctuation_tail_exact: instance too large");
  const std::vector<double> target = kappa(1.0 / q, q);
  const double root_n = std::sqrt(static_cast<double>(n));
  const double base = std::lgamma(static_cast<double>(n) + 1.0) - static_cast<double>(n) * std::log(q);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(q), 0);
  std::vector<std::int64_t> sorted(static_cast<std::size_t>(q), 0);
  double tail = 0.0;
  std::function<void(int, std::int64_t, double)> rec = [&](int i, std::int64_t left, double log_w) {
    if (i == q - 1) {
      counts[static_cast<std::size_t>(i)] = left;
      const double lw = log_w - std::lgamma(static_cast<double>(left) + 1.0);
      sorted = counts;
      std::sort(sorted.begin(), sorted.end(), std::greater<>());
      if (root_n * sup_distance(sorted, n, target) > r) tail += std::exp(lw);
      return;
    }
    for (std::int64_t c = 0; c <= left; ++c) {
      counts[static_cast<std::size_t>(i)] = c;
      rec(i + 1, left - c, log_w - std::lgamma(static_cast<double>(c) + 1.0));
    }
  };
  rec(0, n, base);
  return tail;
}

ConcentrationReport stationary_concentration_check(const ModelParams& params,
                                                   std::int64_t replicas, double A,
                                                   std::uint64_t seed,
                                                   std::optional<std::int64_t> steps, int jobs) {
  if (replicas < 1) throw precondition_error("stationary_concentration_check: replicas must be >= 1");
  const int q = params.q();
  const std::int64_t n = params.n();
  const std::vector<double> m = kappa(fixed_point_a(params), q);
  ConcentrationReport out;
  out.A = A;
  out.replicas = replicas;
  out.steps = steps.value_or(long_run_length(params));
  const double radius = A / std::sqrt(static_cast<double>(n));
  const auto inside = run_replicas(replicas, jobs, [&](std::int64_t r) {
    Stream rng = derive_stream(seed, static_cast<std::uint64_t>(r));
    SpinCounts state = SpinCounts::uniform_random(q, n, rng);
    for (std::int64_t t = 0; t < out.steps; ++t) state = sw_step_counts(state, params, rng);
    return distance_to_majority(state, m) <= radius ? 1 : 0;
  });
  out.frequency = static_cast<double>(std::accumulate(inside.begin(), inside.end(), 0)) /
                  static_cast<double>(replicas);
  return out;
}

double exact_concentration_frequency(std::int64_t n, int q, double beta, double A) {
  const std::vector<double> m = kappa(fixed_point_a(ModelParams(q, beta, n)), q);
  const double radius = A / std::sqrt(static_cast<double>(n));
  double mass = 0.0;
  for (const auto& [counts, prob] : stationary_sorted_counts(n, q, beta)) {
    if (sup_distance(counts, n, m) <= radius) mass += prob;
  }
  return mass;
}

std::int64_t witness_time(const ModelParams& params, double gamma) {
  const double t = cutoff_constant(params) * std::log(static_cast<double>(params.n())) + gamma;
  return std::max<std::int64_t>(0, static_cast<std::int64_t>(std::ceil(t)));
}

WitnessReport lower_bound_witness(const ModelParams& params, double gamma, double A,
                                  std::int64_t replicas, std::uint64_t seed, int jobs) {
  if (replicas < 1) throw precondition_error("lower_bound_witness: replicas must be >= 1");
  const int q = params.q();
  const std::int64_t n = params.n();
  const std::vector<double> m = kappa(fixed_point_a(params), q);
  WitnessReport out;
  out.T = witness_time(params, gamma);
  out.gamma = gamma;
  out.A = A;
  out.replicas = replicas;
  const double radius = A / std::sqrt(static_cast<double>(n));
  const auto outside = run_replicas(replicas, jobs, [&](std::int64_t r) {
    Stream rng = derive_stream(seed, static_cast<std::uint64_t>(r));
    SpinCounts state = SpinCounts::monochromatic(q, n);
    for (std::int64_t t = 0; t < out.T; ++t) state = sw_step_counts(state, params, rng);
    return distance_to_majority(state, m) > radius ? 1 : 0;
  });
  out.frequency = static_cast<double>(std::accumulate(outside.begin(), outside.end(), 0)) /
                  static_cast<double>(replicas);
  return out;
}

double exact_lower_bound_frequency(int n, int q, double beta, double gamma, double A) {
  const ModelParams params(q, beta, n);
  const std::vector<double> m = kappa(fixed_point_a(params), q);
  const ExactChain chain = build_exact_chain(n, q, beta);
  std::vector<double> dist(chain.states, 0.0);
  dist[0] = 1.0;
  dist = evolve_distribution(chain, std::move(dist), witness_time(params, gamma));
  const double radius = A / std::sqrt(static_cast<double>(n));
  double mass = 0.0;
  for (std::size_t s = 0; s < chain.states; ++s) {
    if (distance_to_majority(SpinCounts(config_counts(s, n, q)), m) > radius) mass += dist[s];
  }
  return mass;
}

}  // namespace swlab
