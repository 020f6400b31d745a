#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "swlab/random.hpp"

namespace swlab {

// Component sizes of one G(k, p) draw, largest first.
struct ComponentSample {
  std::vector<std::int64_t> sizes;
  std::int64_t k = 0;
  double p = 0.0;
};

// Appends the component sizes of a G(k, p) graph to `out` in exploration
// order. The graph is never materialised: each breadth-first generation
// reveals Binomial(#unexplored, 1 - (1-p)^#active) new vertices.
void explore_components(std::int64_t k, double p, Stream& rng, std::vector<std::int64_t>& out);

ComponentSample sample_components(std::int64_t k, double p, Stream& rng);

// Test oracle: flips every one of the k(k-1)/2 edges and runs union-find.
// Throws size_guard_error for k > 2000.
ComponentSample sample_components_bruteforce(std::int64_t k, double p, Stream& rng);

// Splits a component of `component_size` exchangeable vertices over the cells
// of a partition whose (remaining) per-cell counts are `cell_counts`.
std::vector<std::int64_t> split_component_over_cells(std::int64_t component_size,
                                                     std::span<const std::int64_t> cell_counts,
                                                     Stream& rng);

struct SusceptibilityStats {
  double lambda = 0.0;
  std::int64_t replicas = 0;
  std::vector<std::int64_t> n_values;
  std::vector<double> mean_R;
  std::vector<double> var_R;
  std::vector<double> isolated_mean;
  std::vector<double> l1_mean;
  // Fraction of runs with |L1 - theta(lambda) n| <= 6 sqrt(n).
  std::vector<double> giant_within;
};

// Monte Carlo over G(n, lambda/n) for each n in the grid. R sums squared
// component sizes, excluding the largest component when lambda > 1.
SusceptibilityStats susceptibility_experiment(double lambda,
                                              std::span<const std::int64_t> n_grid,
                                              std::int64_t replicas, std::uint64_t seed,
                                              int jobs = 1);

}  // namespace swlab
