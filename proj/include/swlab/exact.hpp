#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace swlab {

// Exact Swendsen-Wang chain on the complete graph K_n with all q^n vertex
// configurations enumerated. Configuration index: base-q digits, vertex 0 is
// the least significant digit.
struct ExactChain {
  int n = 0;
  int q = 0;
  double beta = 0.0;
  std::size_t states = 0;
  std::vector<double> stationary;
  std::vector<double> transition;  // row-major states x states

  double P(std::size_t from, std::size_t to) const { return transition[from * states + to]; }
};

// mu(sigma) proportional to exp((beta/n) * #monochromatic edges).
// Throws size_guard_error when q^n > 10^6.
std::vector<double> exact_stationary(int n, int q, double beta);

// Exact one-step kernel by summing over every subset of monochromatic edges.
// Throws size_guard_error unless n <= 6 and q <= 3.
std::vector<double> exact_transition_matrix(int n, int q, double beta);

ExactChain build_exact_chain(int n, int q, double beta);

// Row vector times the transition matrix, applied `steps` times.
std::vector<double> evolve_distribution(const ExactChain& chain, std::vector<double> dist,
                                        std::int64_t steps);

// Spin counts of a configuration index.
std::vector<std::int64_t> config_counts(std::size_t index, int n, int q);

// Pushes a law over configurations forward to sorted spin counts.
std::map<std::vector<std::int64_t>, double> project_sorted_counts(std::span<const double> dist,
                                                                  int n, int q);

// Stationary law of the sorted spin counts computed from multinomial weights
// (no configuration enumeration). Exact for any n, cost grows with the number
// of count vectors.
std::map<std::vector<std::int64_t>, double> stationary_sorted_counts(std::int64_t n, int q,
                                                                     double beta);

struct OracleReport {
  double max_row_error = 0.0;       // max |sum_j P(i, j) - 1|
  double stationarity_l1 = 0.0;     // ||mu P - mu||_1
  double detailed_balance = 0.0;    // max |mu_i P_ij - mu_j P_ji|
  double stationary_mass_error = 0.0;
};

OracleReport check_exact_chain(const ExactChain& chain);

}  // namespace swlab
