#include "swlab/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "swlab/errors.hpp"
#include "swlab/parallel.hpp"
#include "swlab/percolation.hpp"

namespace swlab {

namespace {

std::size_t idx(int cell, int spin, int q) {
  return static_cast<std::size_t>(cell) * static_cast<std::size_t>(q) +
         static_cast<std::size_t>(spin);
}

bool within_ball(const SpinCounts& s, std::span<const double> m, double eps) {
  return distance_to_majority(s, m) <= eps;
}

// One copy after the percolation step, before the colours of the largest
// component and of the isolated vertices are decided.
struct Percolated {
  std::vector<std::int64_t> coloured;  // cells x q: all other non-isolated components
  std::vector<std::int64_t> largest;   // per cell share of the largest component
  std::vector<std::int64_t> isolated;  // per cell
};

Percolated percolate(const ProjectionMatrix& state, const ModelParams& params, Stream& rng) {
  const int q = state.q();
  const int cells = state.cells();
  const auto ucells = static_cast<std::size_t>(cells);
  Percolated out;
  out.coloured.assign(state.entries().size(), 0);
  out.largest.assign(ucells, 0);
  out.isolated.assign(ucells, 0);

  std::vector<std::vector<std::int64_t>> sizes(static_cast<std::size_t>(q));
  int big_class = -1;
  std::size_t big_index = 0;
  std::int64_t big_size = 1;
  for (int j = 0; j < q; ++j) {
    std::int64_t class_size = 0;
    for (int i = 0; i < cells; ++i) class_size += state.at(i, j);
    if (class_size == 0) continue;
    auto& list = sizes[static_cast<std::size_t>(j)];
    explore_components(class_size, params.p(), rng, list);
    for (std::size_t c = 0; c < list.size(); ++c) {
      if (list[c] > big_size) {
        big_size = list[c];
        big_class = j;
        big_index = c;
      }
    }
  }

  std::vector<std::int64_t> urn(ucells, 0);
  std::vector<std::int64_t> split(ucells, 0);
  for (int j = 0; j < q; ++j) {
    for (int i = 0; i < cells; ++i) urn[static_cast<std::size_t>(i)] = state.at(i, j);
    const auto& list = sizes[static_cast<std::size_t>(j)];
    for (std::size_t c = 0; c < list.size(); ++c) {
      if (list[c] == 1) continue;
      multivariate_hypergeometric(rng, list[c], urn, split);
      for (std::size_t i = 0; i < ucells; ++i) urn[i] -= split[i];
      if (j == big_class && c == big_index) {
        out.largest = split;
      } else {
        const auto colour = static_cast<int>(rng.below(static_cast<std::uint64_t>(q)));
        for (std::size_t i = 0; i < ucells; ++i) {
          out.coloured[idx(static_cast<int>(i), colour, q)] += split[i];
        }
      }
    }
    for (std::size_t i = 0; i < ucells; ++i) out.isolated[i] += urn[i];
  }
  return out;
}

// Coupling of Binomial(r1, p) and Binomial(r2, p) + shift that is maximal for
// the event x - y = shift. The residual branch uses rejection against the
// shifted law, so both marginals are exact.
struct PairDraw {
  std::int64_t x = 0;
  std::int64_t y = 0;
  bool matched = false;
};

PairDraw maximal_binomial_pair(std::int64_t r1, std::int64_t r2, double p, std::int64_t shift,
                               Stream& rng) {
  PairDraw out;
  out.x = binomial(rng, r1, p);
  const double log_p1 = binomial_log_pmf(out.x, r1, p);
  const double log_q = binomial_log_pmf(out.x - shift, r2, p);
  if (rng.uniform() < std::exp(log_q - log_p1)) {
    out.y = out.x - shift;
    out.matched = true;
    return out;
  }
  for (int attempt = 0; attempt < 10'000'000; ++attempt) {
    const std::int64_t y = binomial(rng, r2, p);
    const std::int64_t z = y + shift;
    const double ratio = std::exp(binomial_log_pmf(z, r1, p) - binomial_log_pmf(y, r2, p));
    if (rng.uniform() < 1.0 - ratio) {
      out.y = y;
      return out;
    }
  }
  // Only reachable when the two laws agree to rounding error.
  out.y = binomial(rng, r2, p);
  return out;
}

}  // namespace

const char* phase_name(Phase phase) noexcept {
  switch (phase) {
    case Phase::Burnin: return "burnin";
    case Phase::Contract: return "contract";
    case Phase::ProjectionCoupling: return "projection_coupling";
    case Phase::Coupled: return "coupled";
  }
  return "unknown";
}

void PhaseThresholds::validate() const {
  if (!(eps_ball > 0) || !(sqrtn_C > 0) || !(coalesce_C > 0) || !(proximity_r > 0)) {
    throw precondition_error("phase thresholds must be positive");
  }
  if (boost_rounds < 1) throw precondition_error("boost_rounds must be >= 1");
  if (burnin_budget < 0 || contract_budget < 0) {
    throw precondition_error("step budgets must be >= 0");
  }
}

BurninResult burnin_until_ball(const SpinCounts& start, double eps, const ModelParams& params,
                               Stream& rng, std::int64_t budget) {
  if (!(eps > 0)) throw precondition_error("burnin_until_ball: eps must be > 0");
  const std::vector<double> m = kappa(fixed_point_a(params), params.q());
  BurninResult out{start, 0, false};
  while (!within_ball(out.state, m, eps)) {
    if (out.steps >= budget) {
      out.censored = true;
      break;
    }
    out.state = sw_step_counts(out.state, params, rng);
    ++out.steps;
  }
  return out;
}

double coalescence_distance(const ProjectionMatrix& state) {
  const SpinCounts totals = state.column_sums();
  if (totals.n() == 0) return 0.0;
  const int dom = totals.dominant();
  const double alpha1 = static_cast<double>(totals[static_cast<std::size_t>(dom)]) /
                        static_cast<double>(totals.n());
  double worst = 0.0;
  for (int k = 0; k < state.cells(); ++k) {
    const std::int64_t size = state.cell_sizes()[static_cast<std::size_t>(k)];
    if (size == 0) continue;
    const double cell_alpha = static_cast<double>(state.at(k, dom)) / static_cast<double>(size);
    worst = std::max(worst, std::fabs(alpha1 - cell_alpha));
  }
  return worst;
}

ShiftedCoupling shifted_multinomial_coupling(std::int64_t m1, std::int64_t m2, int q,
                                             std::span<const std::int64_t> target_d,
                                             Stream& rng) {
  if (q < 2) throw precondition_error("shifted_multinomial_coupling: q must be >= 2");
  if (m1 < 0 || m2 < 0) throw precondition_error("shifted_multinomial_coupling: negative trials");
  if (target_d.size() != static_cast<std::size_t>(q)) {
    throw precondition_error("shifted_multinomial_coupling: target has wrong length");
  }
  if (std::accumulate(target_d.begin(), target_d.end(), std::int64_t{0}) != m1 - m2) {
    throw precondition_error("shifted_multinomial_coupling: target must sum to m1 - m2");
  }
  const double guard = 10.0 * std::sqrt(static_cast<double>(std::max(m1, m2)));
  for (const auto d : target_d) {
    if (static_cast<double>(std::llabs(d)) > guard) {
      throw precondition_error("shifted_multinomial_coupling: target outside feasibility guard");
    }
  }
  ShiftedCoupling out;
  out.x.assign(static_cast<std::size_t>(q), 0);
  out.y.assign(static_cast<std::size_t>(q), 0);
  std::int64_t r1 = m1;
  std::int64_t r2 = m2;
  bool matched = true;
  for (int i = 0; i + 1 < q; ++i) {
    const double p = 1.0 / static_cast<double>(q - i);
    std::int64_t xi = 0;
    std::int64_t yi = 0;
    if (matched) {
      const PairDraw d = maximal_binomial_pair(r1, r2, p, target_d[static_cast<std::size_t>(i)], rng);
      xi = d.x;
      yi = d.y;
      matched = d.matched;
    } else {
      xi = binomial(rng, r1, p);
      yi = binomial(rng, r2, p);
    }
    out.x[static_cast<std::size_t>(i)] = xi;
    out.y[static_cast<std::size_t>(i)] = yi;
    r1 -= xi;
    r2 -= yi;
  }
  out.x[static_cast<std::size_t>(q - 1)] = r1;
  out.y[static_cast<std::size_t>(q - 1)] = r2;
  out.success = matched && r1 - r2 == target_d[static_cast<std::size_t>(q - 1)];
  return out;
}

double binomial_shift_overlap(std::int64_t trials, double prob, std::int64_t shift) {
  double overlap = 0.0;
  const std::int64_t lo = std::max<std::int64_t>(0, shift);
  const std::int64_t hi = std::min<std::int64_t>(trials, trials + shift);
  for (std::int64_t k = lo; k <= hi; ++k) {
    const double a = binomial_log_pmf(k, trials, prob);
    const double b = binomial_log_pmf(k - shift, trials, prob);
    overlap += std::exp(std::min(a, b));
  }
  return overlap;
}

bool proximity_holds(const CouplingState& state, std::span<const double> m, double r) {
  for (const ProjectionMatrix* copy : {&state.x, &state.y}) {
    const SpinCounts totals = copy->column_sums();
    const auto n = static_cast<double>(totals.n());
    if (distance_to_majority(totals, m) > r / std::sqrt(n)) return false;
    const int dom = totals.dominant();
    const double alpha1 = static_cast<double>(totals[static_cast<std::size_t>(dom)]) / n;
    for (int k = 0; k < copy->cells(); ++k) {
      const auto size = static_cast<double>(copy->cell_sizes()[static_cast<std::size_t>(k)]);
      if (size == 0) continue;
      const double gap = std::fabs(alpha1 - static_cast<double>(copy->at(k, dom)) / size);
      if (gap > r / std::sqrt(size)) return false;
    }
  }
  return true;
}

CouplingState independent_step(const CouplingState& state, const ModelParams& params,
                               Stream& rng) {
  CouplingState next = state;
  next.x = sw_step_projection(state.x, params, rng);
  next.y = state.phase == Phase::Coupled ? next.x : sw_step_projection(state.y, params, rng);
  ++next.t;
  return next;
}

std::optional<CouplingState> couple_projection_step(const CouplingState& state,
                                                    const ModelParams& params,
                                                    const PhaseThresholds& thresholds,
                                                    Stream& rng) {
  if (state.x.cell_sizes() != state.y.cell_sizes() || state.x.q() != state.y.q()) {
    throw precondition_error("couple_projection_step: copies must share the partition");
  }
  if (state.phase == Phase::Coupled) return independent_step(state, params, rng);
  if (state.x == state.y) {
    // Identical copies: run one step and hand it to both.
    CouplingState next = state;
    next.x = sw_step_projection(state.x, params, rng);
    next.y = next.x;
    ++next.t;
    next.phase = Phase::Coupled;
    next.coupled_at = next.t;
    return next;
  }
  const std::vector<double> m = kappa(fixed_point_a(params), params.q());
  if (!proximity_holds(state, m, thresholds.proximity_r)) return std::nullopt;

  const int q = state.x.q();
  const int cells = state.x.cells();
  Percolated px = percolate(state.x, params, rng);
  Percolated py = percolate(state.y, params, rng);
  const auto shared = static_cast<int>(rng.below(static_cast<std::uint64_t>(q)));
  for (int i = 0; i < cells; ++i) {
    px.coloured[idx(i, shared, q)] += px.largest[static_cast<std::size_t>(i)];
    py.coloured[idx(i, shared, q)] += py.largest[static_cast<std::size_t>(i)];
  }

  bool success = true;
  std::vector<std::int64_t> draw(static_cast<std::size_t>(q), 0);
  std::vector<std::int64_t> d(static_cast<std::size_t>(q), 0);
  for (int i = 0; i < cells; ++i) {
    std::int64_t& iso_x = px.isolated[static_cast<std::size_t>(i)];
    std::int64_t& iso_y = py.isolated[static_cast<std::size_t>(i)];
    // Excess isolated vertices of either copy get independent colours first.
    Percolated& heavier = iso_x > iso_y ? px : py;
    const std::int64_t excess = std::llabs(iso_x - iso_y);
    if (excess > 0) {
      multinomial_uniform(rng, excess, draw);
      for (int s = 0; s < q; ++s) heavier.coloured[idx(i, s, q)] += draw[static_cast<std::size_t>(s)];
    }
    const std::int64_t shared_iso = std::min(iso_x, iso_y);
    bool feasible = true;
    const double guard = 10.0 * std::sqrt(static_cast<double>(shared_iso));
    for (int s = 0; s < q; ++s) {
      d[static_cast<std::size_t>(s)] = py.coloured[idx(i, s, q)] - px.coloured[idx(i, s, q)];
      if (static_cast<double>(std::llabs(d[static_cast<std::size_t>(s)])) > guard) feasible = false;
    }
    if (feasible) {
      const ShiftedCoupling sc = shifted_multinomial_coupling(shared_iso, shared_iso, q, d, rng);
      success = success && sc.success;
      for (int s = 0; s < q; ++s) {
        px.coloured[idx(i, s, q)] += sc.x[static_cast<std::size_t>(s)];
        py.coloured[idx(i, s, q)] += sc.y[static_cast<std::size_t>(s)];
      }
    } else {
      success = false;
      for (Percolated* copy : {&px, &py}) {
        multinomial_uniform(rng, shared_iso, draw);
        for (int s = 0; s < q; ++s) copy->coloured[idx(i, s, q)] += draw[static_cast<std::size_t>(s)];
      }
    }
  }

  CouplingState next = state;
  next.x = ProjectionMatrix(cells, q, std::move(px.coloured));
  next.y = ProjectionMatrix(cells, q, std::move(py.coloured));
  ++next.t;
  next.phase = Phase::ProjectionCoupling;
  if (success) {
    if (!(next.x == next.y)) throw std::logic_error("couple_projection_step: matched copies differ");
    next.phase = Phase::Coupled;
    next.coupled_at = next.t;
  }
  return next;
}

MultiphaseResult run_multiphase(const ModelParams& params, const PhaseThresholds& thresholds,
                                Stream& rng, const MultiphaseOptions& options) {
  thresholds.validate();
  const int q = params.q();
  const std::int64_t n = params.n();
  const double c = cutoff_constant(params);
  const std::vector<double> m = kappa(fixed_point_a(params), q);
  const double root_n = std::sqrt(static_cast<double>(n));

  MultiphaseResult result;
  MultiphaseRecord& rec = result.record;
  SpinCounts x = options.x_start.value_or(SpinCounts::monochromatic(q, n));
  if (x.q() != q || x.n() != n) throw precondition_error("run_multiphase: x_start does not match params");
  SpinCounts y;
  if (options.y_start) {
    y = *options.y_start;
    if (y.q() != q || y.n() != n) throw precondition_error("run_multiphase: y_start does not match params");
    rec.y_warmup_steps = options.y_warmup.value_or(0);
  } else {
    y = SpinCounts::uniform_random(q, n, rng);
    rec.y_warmup_steps = options.y_warmup.value_or(
        static_cast<std::int64_t>(std::ceil(10.0 * c * std::log(static_cast<double>(n)))));
  }
  for (std::int64_t s = 0; s < rec.y_warmup_steps; ++s) y = sw_step_counts(y, params, rng);

  CouplingState& state = result.state;
  if (x == y) {
    state.x = ProjectionMatrix::from_counts(x);
    state.y = state.x;
    state.phase = Phase::Coupled;
    state.coupled_at = 0;
    rec.coupled_at = 0;
    return result;
  }

  // Phase 1: independent burn-in of both copies into the eps-ball.
  std::int64_t t = 0;
  while (!(within_ball(x, m, thresholds.eps_ball) && within_ball(y, m, thresholds.eps_ball))) {
    if (t >= thresholds.burnin_budget) {
      state.x = ProjectionMatrix::from_counts(x);
      state.y = ProjectionMatrix::from_counts(y);
      state.t = t;
      rec.t1_burnin = t;
      rec.censored = true;
      return result;
    }
    x = sw_step_counts(x, params, rng);
    y = sw_step_counts(y, params, rng);
    ++t;
  }
  rec.t1_burnin = t;

  // The partition is X's spin classes at the end of burn-in.
  std::vector<std::int64_t> sizes;
  std::vector<std::int64_t> entries;
  for (int j = 0; j < q; ++j) {
    if (x[static_cast<std::size_t>(j)] == 0) continue;
    sizes.push_back(x[static_cast<std::size_t>(j)]);
    for (int s = 0; s < q; ++s) entries.push_back(s == j ? x[static_cast<std::size_t>(j)] : 0);
  }
  state.x = ProjectionMatrix(static_cast<int>(sizes.size()), q, std::move(entries));
  state.y = ProjectionMatrix::random_table(sizes, y, rng);
  state.t = t;
  state.phase = Phase::Contract;

  auto note_coalescence = [&] {
    if (!rec.coalesce_hit_t && coalescence_distance(state.x) <= thresholds.coalesce_C / root_n &&
        coalescence_distance(state.y) <= thresholds.coalesce_C / root_n) {
      rec.coalesce_hit_t = state.t;
    }
  };

  // Phase 2: independent contraction until both copies are O(1/sqrt n) close.
  note_coalescence();
  while (!proximity_holds(state, m, thresholds.sqrtn_C)) {
    if (rec.t2_contract >= thresholds.contract_budget) {
      rec.censored = true;
      return result;
    }
    state = independent_step(state, params, rng);
    ++rec.t2_contract;
    note_coalescence();
  }

  // Phase 3: coupling rounds; a round without proximity is an independent step.
  state.phase = Phase::ProjectionCoupling;
  for (std::int64_t round = 0; round < thresholds.boost_rounds; ++round) {
    ++rec.rounds;
    if (auto attempt = couple_projection_step(state, params, thresholds, rng)) {
      ++rec.attempts;
      ++rec.proximity_hits;
      state = std::move(*attempt);
    } else {
      state = independent_step(state, params, rng);
    }
    note_coalescence();
    if (state.phase == Phase::Coupled) {
      rec.coupled_at = state.coupled_at;
      return result;
    }
  }
  rec.censored = true;
  return result;
}

ContractionStats measure_coalescence_contraction(const ModelParams& params,
                                                 const PhaseThresholds& thresholds,
                                                 std::int64_t replicas, std::int64_t max_steps,
                                                 double floor_multiple, std::uint64_t seed,
                                                 int jobs) {
  if (replicas < 1 || max_steps < 1) {
    throw precondition_error("measure_coalescence_contraction: need replicas, steps >= 1");
  }
  const int q = params.q();
  const double beta = params.beta();
  struct Partial {
    std::int64_t pairs = 0;
    double ratio = 0.0;
    double predicted = 0.0;
  };
  const auto parts = run_replicas(replicas, jobs, [&](std::int64_t r) {
    Stream rng = derive_stream(seed, static_cast<std::uint64_t>(r));
    Partial part;
    const BurninResult burn = burnin_until_ball(SpinCounts::monochromatic(q, params.n()),
                                                thresholds.eps_ball, params, rng,
                                                thresholds.burnin_budget);
    if (burn.censored) return part;
    ProjectionMatrix state = ProjectionMatrix::diagonal(burn.state);
    for (std::int64_t s = 0; s < max_steps; ++s) {
      const SpinCounts totals = state.column_sums();
      const int dom = totals.dominant();
      const double alpha1 = static_cast<double>(totals[static_cast<std::size_t>(dom)]) /
                            static_cast<double>(totals.n());
      const double factor = (1.0 - 1.0 / q) * solve_theta(beta * alpha1);
      ProjectionMatrix next = sw_step_projection(state, params, rng);
      const SpinCounts next_totals = next.column_sums();
      const int next_dom = next_totals.dominant();
      const double next_alpha1 = static_cast<double>(next_totals[static_cast<std::size_t>(next_dom)]) /
                                 static_cast<double>(next_totals.n());
      bool any = false;
      for (int k = 0; k < state.cells(); ++k) {
        const auto size = static_cast<double>(state.cell_sizes()[static_cast<std::size_t>(k)]);
        if (size == 0) continue;
        const double before = std::fabs(alpha1 - static_cast<double>(state.at(k, dom)) / size);
        if (before < floor_multiple / std::sqrt(size)) continue;
        const double after = std::fabs(next_alpha1 - static_cast<double>(next.at(k, next_dom)) / size);
        part.ratio += after / before;
        part.predicted += factor;
        ++part.pairs;
        any = true;
      }
      state = std::move(next);
      if (!any) break;
    }
    return part;
  });
  ContractionStats out;
  double ratio = 0.0;
  double predicted = 0.0;
  for (const Partial& p : parts) {
    out.pairs += p.pairs;
    ratio += p.ratio;
    predicted += p.predicted;
  }
  if (out.pairs > 0) {
    out.mean_ratio = ratio / static_cast<double>(out.pairs);
    out.mean_predicted = predicted / static_cast<double>(out.pairs);
  }
  return out;
}

}  // namespace swlab
