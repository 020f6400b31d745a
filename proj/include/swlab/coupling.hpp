#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "swlab/analysis.hpp"
#include "swlab/dynamics.hpp"
#include "swlab/random.hpp"

namespace swlab {

enum class Phase { Burnin, Contract, ProjectionCoupling, Coupled };

const char* phase_name(Phase phase) noexcept;

struct CouplingState {
  ProjectionMatrix x;
  ProjectionMatrix y;
  std::int64_t t = 0;
  Phase phase = Phase::Burnin;
  std::optional<std::int64_t> coupled_at;
};

struct PhaseThresholds {
  double eps_ball = 0.02;       // burn-in target for ||alpha - m||_inf
  double sqrtn_C = 4.0;         // proximity constant that ends the contraction phase
  double coalesce_C = 4.0;      // coalescence_distance target, in units of 1/sqrt(n)
  std::int64_t boost_rounds = 10;
  double proximity_r = 8.0;     // radius of the proximity event checked before each attempt
  std::int64_t burnin_budget = 1000;
  std::int64_t contract_budget = 1000;

  void validate() const;
};

struct BurninResult {
  SpinCounts state;
  std::int64_t steps = 0;
  bool censored = false;
};

// Runs the chain until the sorted proportions are within eps of m in sup norm,
// or until `budget` steps have been spent (censored).
BurninResult burnin_until_ball(const SpinCounts& start, double eps, const ModelParams& params,
                               Stream& rng, std::int64_t budget = 1000);

// max over non-empty cells k of |alpha_1 - A[k][dom] / |V_k||, where dom is the
// dominant spin of the whole configuration.
double coalescence_distance(const ProjectionMatrix& state);

struct ShiftedCoupling {
  std::vector<std::int64_t> x;
  std::vector<std::int64_t> y;
  bool success = false;
};

// x ~ Multinomial(m1, uniform over q), y ~ Multinomial(m2, uniform over q),
// coupled so that x - y = target_d with the probability a coordinatewise
// maximal coupling allows.
ShiftedCoupling shifted_multinomial_coupling(std::int64_t m1, std::int64_t m2, int q,
                                             std::span<const std::int64_t> target_d, Stream& rng);

// Exact 1 - TV(Binomial(trials, prob), Binomial(trials, prob) + shift).
double binomial_shift_overlap(std::int64_t trials, double prob, std::int64_t shift);

// Both copies within r/sqrt(n) of m, and every cell's dominant fraction within
// r/sqrt(|V_k|) of the copy's global dominant fraction.
bool proximity_holds(const CouplingState& state, std::span<const double> m, double r);

// One coupled step. Returns nullopt when the proximity precondition (radius
// thresholds.proximity_r) fails; the caller then takes an independent step.
// Once coupled, both copies move together.
std::optional<CouplingState> couple_projection_step(const CouplingState& state,
                                                    const ModelParams& params,
                                                    const PhaseThresholds& thresholds,
                                                    Stream& rng);

// Advances both copies independently by one step.
CouplingState independent_step(const CouplingState& state, const ModelParams& params, Stream& rng);

struct MultiphaseRecord {
  std::int64_t t1_burnin = 0;
  std::int64_t t2_contract = 0;
  std::optional<std::int64_t> coalesce_hit_t;
  std::int64_t attempts = 0;
  std::int64_t rounds = 0;
  std::int64_t proximity_hits = 0;
  std::optional<std::int64_t> coupled_at;
  bool censored = false;
  std::int64_t y_warmup_steps = 0;
};

struct MultiphaseResult {
  CouplingState state;
  MultiphaseRecord record;
};

struct MultiphaseOptions {
  std::optional<SpinCounts> x_start;  // default: monochromatic
  std::optional<SpinCounts> y_start;  // default: warm-up run from a uniform start
  std::optional<std::int64_t> y_warmup;  // default: ceil(10 c log n)
};

// Burn-in, contraction until the proximity event with constant sqrtn_C holds,
// then up to boost_rounds coupling rounds. Never throws on failure to couple;
// the record is marked censored instead.
MultiphaseResult run_multiphase(const ModelParams& params, const PhaseThresholds& thresholds,
                                Stream& rng, const MultiphaseOptions& options = {});

struct ContractionStats {
  std::int64_t pairs = 0;
  double mean_ratio = 0.0;      // mean of d_t / d_{t-1} over cells and steps
  double mean_predicted = 0.0;  // mean of (1 - 1/q) theta(beta alpha_1(X_{t-1}))
};

// Per-cell coalescence contraction after burn-in, starting from the partition
// into the burnt-in copy's spin classes. A cell-step enters the average only
// while its distance is at least floor_multiple / sqrt(|V_k|).
ContractionStats measure_coalescence_contraction(const ModelParams& params,
                                                 const PhaseThresholds& thresholds,
                                                 std::int64_t replicas, std::int64_t max_steps,
                                                 double floor_multiple, std::uint64_t seed,
                                                 int jobs = 1);

}  // namespace swlab
