#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "swlab/analysis.hpp"
#include "swlab/dynamics.hpp"

namespace swlab {

enum class ReferenceKind { ExactStationary, LongRun };
enum class ReferenceChoice { Auto, Exact, LongRun };

const char* reference_name(ReferenceKind kind) noexcept;

struct TvProfileOptions {
  std::int64_t t_max = 0;
  std::int64_t replicas = 1000;
  double bin_width = 0.5;
  ReferenceChoice reference = ReferenceChoice::Auto;
  std::int64_t reference_replicas = 0;  // 0: same as replicas
  std::optional<SpinCounts> start;      // default: monochromatic
  int jobs = 1;
};

// Empirical TV distance to stationarity over binned sorted spin counts.
// Bin ids are shared between samples and reference; the raw per-replica bin ids
// are kept so the profile can be bootstrapped.
struct CutoffProfile {
  ModelParams params{2, 0.0, 1};
  std::vector<std::int64_t> t_grid;
  std::vector<double> tv_hat;
  std::int64_t replicas = 0;
  double bin_width = 0.5;
  ReferenceKind reference_kind = ReferenceKind::LongRun;

  std::int32_t bin_count = 0;
  std::vector<std::vector<std::int32_t>> sample_bins;  // [t][replica]
  std::vector<double> reference_probs;                 // ExactStationary: law over bin ids
  std::vector<std::int32_t> reference_bins;            // LongRun: one bin id per reference chain
};

// Per-coordinate bin index floor(count / (bin_width sqrt(n))) of sorted counts.
std::vector<std::int64_t> bin_key(std::span<const std::int64_t> sorted_counts, std::int64_t n,
                                  double bin_width);

// Number of descending count vectors the exact reference would enumerate.
double sorted_count_vectors_estimate(std::int64_t n, int q);

CutoffProfile estimate_tv_profile(const ModelParams& params, const TvProfileOptions& options,
                                  std::uint64_t seed);

// TV between binned laws; both spans indexed by bin id.
double binned_tv(std::span<const double> a, std::span<const double> b);

// Exact counterpart for tiny instances (n <= 6, q <= 3): binned TV between the
// matrix-power law from the monochromatic start and the stationary law.
std::vector<double> exact_binned_tv_profile(int n, int q, double beta, std::int64_t t_max,
                                            double bin_width);

// Least t (linearly interpolated on the grid) with tv <= level.
std::optional<double> crossing_time(std::span<const std::int64_t> t_grid,
                                    std::span<const double> tv, double level);

struct MixingFit {
  std::vector<std::int64_t> n_grid;
  std::vector<double> tmix_quarter;
  std::vector<double> tau_three_quarter;
  std::vector<double> window;  // tau(1/4) - tau(3/4)
  double slope = 0.0;          // per unit of natural log n
  double intercept = 0.0;
  std::pair<double, double> slope_ci{0.0, 0.0};
  std::int64_t bootstrap_used = 0;
};

// Requires >= 3 distinct n spanning >= 2 decades. Throws profile_too_short_error
// when some profile never reaches 1/4.
MixingFit fit_mixing_time(std::span<const CutoffProfile> profiles, std::int64_t bootstrap = 1000,
                          std::uint64_t seed = 0);

// Ordinary least squares y = intercept + slope x.
std::pair<double, double> least_squares(std::span<const double> x, std::span<const double> y);

inline constexpr std::array<double, 4> kTailThresholds{2.0, 4.0, 8.0, 16.0};

struct FluctuationTail {
  std::vector<double> thresholds;
  std::vector<double> tail;  // fraction with sqrt(n) ||alpha(X_1) - kappa(F(alpha_1(X_0)))|| > r
  std::int64_t replicas = 0;
};

// One step from `start` (default: counts nearest n*m, dominant spin 0; for
// beta <= q the uniform split).
FluctuationTail step_fluctuation_tail(const ModelParams& params, std::int64_t replicas,
                                      std::uint64_t seed, std::optional<SpinCounts> start = {},
                                      int jobs = 1);

// P(sqrt(n) max_i |c_i/n - 1/q| > r) for c ~ Multinomial(n, uniform).
double multinomial_fluctuation_tail_exact(std::int64_t n, int q, double r);

// Counts nearest n*kappa(b), dominant spin 0.
SpinCounts rounded_counts(std::int64_t n, std::span<const double> proportions);

struct ConcentrationReport {
  double frequency = 0.0;  // fraction with ||alpha - m||_inf <= A / sqrt(n)
  double A = 6.0;
  std::int64_t steps = 0;
  std::int64_t replicas = 0;
};

// Uniform-random starts, ceil(10 c log n) + 1000 steps unless `steps` given.
ConcentrationReport stationary_concentration_check(const ModelParams& params,
                                                   std::int64_t replicas, double A,
                                                   std::uint64_t seed,
                                                   std::optional<std::int64_t> steps = {},
                                                   int jobs = 1);

// Same frequency under the exact stationary law of the sorted counts.
double exact_concentration_frequency(std::int64_t n, int q, double beta, double A);

struct WitnessReport {
  std::int64_t T = 0;
  double gamma = 0.0;
  double A = 6.0;
  double frequency = 0.0;  // fraction with ||alpha(X_T) - m||_inf > A / sqrt(n)
  std::int64_t replicas = 0;
};

std::int64_t witness_time(const ModelParams& params, double gamma);

WitnessReport lower_bound_witness(const ModelParams& params, double gamma, double A,
                                  std::int64_t replicas, std::uint64_t seed, int jobs = 1);

// Exact matrix-power version for n <= 6, q <= 3.
double exact_lower_bound_frequency(int n, int q, double beta, double gamma, double A);

}  // namespace swlab
