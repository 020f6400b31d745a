#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>

namespace swlab {

// xoshiro256** generator. Satisfies UniformRandomBitGenerator so it can drive
// <random> distributions directly.
class Stream {
 public:
  using result_type = std::uint64_t;
  using State = std::array<std::uint64_t, 4>;

  explicit Stream(const State& state);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, bound) by Lemire's multiply-shift with rejection.
  std::uint64_t below(std::uint64_t bound) noexcept;

  const State& state() const noexcept { return s_; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) noexcept {
    return (x << k) | (x >> (64 - k));
  }
  State s_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Stream for replica `replica` under master `seed`. The 128-bit key
// (seed, replica) maps injectively onto the first two state words through the
// splitmix64 finalizer (a bijection on 64-bit words), so distinct keys never
// share a starting state; the remaining two words mix both halves.
Stream derive_stream(std::uint64_t seed, std::uint64_t replica);

// Child seed for a labelled sub-experiment (e.g. one n of a grid).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t label) noexcept;

// Binomial(trials, prob).
std::int64_t binomial(Stream& rng, std::int64_t trials, double prob);

// Number of marked items in a uniform sample of `draws` items taken without
// replacement from `total` items of which `marked` are marked.
std::int64_t hypergeometric(Stream& rng, std::int64_t draws, std::int64_t marked,
                            std::int64_t total);

// Multinomial(trials, uniform over out.size() categories), written into out.
void multinomial_uniform(Stream& rng, std::int64_t trials, std::span<std::int64_t> out);

// Multivariate hypergeometric: `draws` items without replacement from an urn
// with urn[i] items of type i; the per-type counts are written into out.
void multivariate_hypergeometric(Stream& rng, std::int64_t draws,
                                 std::span<const std::int64_t> urn,
                                 std::span<std::int64_t> out);

// log of the Binomial(trials, prob) pmf at k; -inf outside the support.
double binomial_log_pmf(std::int64_t k, std::int64_t trials, double prob);

// log of the hypergeometric pmf at k.
double hypergeometric_log_pmf(std::int64_t k, std::int64_t draws, std::int64_t marked,
                              std::int64_t total);

}  // namespace swlab
