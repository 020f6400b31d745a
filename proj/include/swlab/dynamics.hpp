#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "swlab/analysis.hpp"
#include "swlab/random.hpp"

namespace swlab {

// Number of vertices holding each spin. The mean-field chain is exchangeable,
// so this projection loses nothing the experiments need.
class SpinCounts {
 public:
  SpinCounts() = default;
  explicit SpinCounts(std::vector<std::int64_t> counts);

  static SpinCounts monochromatic(int q, std::int64_t n, int spin = 0);
  static SpinCounts uniform_random(int q, std::int64_t n, Stream& rng);

  int q() const noexcept { return static_cast<int>(counts_.size()); }
  std::int64_t n() const noexcept { return n_; }
  std::int64_t operator[](std::size_t i) const { return counts_[i]; }
  const std::vector<std::int64_t>& counts() const noexcept { return counts_; }

  // argmax, lowest index on ties.
  int dominant() const noexcept;
  std::vector<double> proportions() const;
  // Counts sorted descending; the dominant class first.
  std::vector<std::int64_t> sorted() const;

  friend bool operator==(const SpinCounts&, const SpinCounts&) = default;

 private:
  std::vector<std::int64_t> counts_;
  std::int64_t n_ = 0;
};

// cells x q matrix: entry (i, j) counts vertices of cell i holding spin j.
class ProjectionMatrix {
 public:
  ProjectionMatrix() = default;
  ProjectionMatrix(int cells, int q, std::vector<std::int64_t> entries);

  // Single cell holding the whole configuration.
  static ProjectionMatrix from_counts(const SpinCounts& counts);
  // Partition whose cells are the spin classes of `counts` (a diagonal matrix).
  static ProjectionMatrix diagonal(const SpinCounts& counts);
  // Exchangeable configuration with spin totals `counts`, projected onto cells
  // of the given sizes: a uniformly random contingency table.
  static ProjectionMatrix random_table(std::span<const std::int64_t> cell_sizes,
                                       const SpinCounts& counts, Stream& rng);

  int cells() const noexcept { return cells_; }
  int q() const noexcept { return q_; }
  std::int64_t n() const noexcept { return n_; }
  std::int64_t at(int cell, int spin) const {
    return a_[static_cast<std::size_t>(cell) * static_cast<std::size_t>(q_) +
              static_cast<std::size_t>(spin)];
  }
  std::int64_t& at(int cell, int spin) {
    return a_[static_cast<std::size_t>(cell) * static_cast<std::size_t>(q_) +
              static_cast<std::size_t>(spin)];
  }
  const std::vector<std::int64_t>& entries() const noexcept { return a_; }
  const std::vector<std::int64_t>& cell_sizes() const noexcept { return cell_sizes_; }

  // Column sums: the spin counts of the full configuration.
  SpinCounts column_sums() const;
  // Relabels spins: new column perm[j] receives old column j.
  ProjectionMatrix permuted_spins(std::span<const int> perm) const;

  friend bool operator==(const ProjectionMatrix&, const ProjectionMatrix&) = default;

 private:
  int cells_ = 0;
  int q_ = 0;
  std::int64_t n_ = 0;
  std::vector<std::int64_t> a_;
  std::vector<std::int64_t> cell_sizes_;
};

// One Swendsen-Wang step on the spin counts.
SpinCounts sw_step_counts(const SpinCounts& state, const ModelParams& params, Stream& rng);

// One Swendsen-Wang step resolved per partition cell.
ProjectionMatrix sw_step_projection(const ProjectionMatrix& state, const ModelParams& params,
                                    Stream& rng);

// States X_0..X_{t_max}.
std::vector<SpinCounts> run_trajectory(const SpinCounts& start, std::int64_t t_max,
                                       const ModelParams& params, Stream& rng);

// ||sorted proportions - m||_inf, comparing the dominant class with m_1.
double distance_to_majority(const SpinCounts& state, std::span<const double> m);

}  // namespace swlab
