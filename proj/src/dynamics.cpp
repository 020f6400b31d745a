#include "swlab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "swlab/errors.hpp"
#include "swlab/percolation.hpp"

namespace swlab {

namespace {

std::vector<std::int64_t>& scratch_sizes() {
  thread_local std::vector<std::int64_t> sizes;
  sizes.clear();
  return sizes;
}

void check_q(int state_q, const ModelParams& params) {
  if (state_q != params.q()) {
    throw precondition_error("state has " + std::to_string(state_q) + " spins but params.q = " +
                             std::to_string(params.q()));
  }
}

}  // namespace

SpinCounts::SpinCounts(std::vector<std::int64_t> counts) : counts_(std::move(counts)) {
  if (counts_.empty()) throw precondition_error("SpinCounts: need at least one spin");
  for (const auto c : counts_) {
    if (c < 0) throw precondition_error("SpinCounts: negative count");
    n_ += c;
  }
}

SpinCounts SpinCounts::monochromatic(int q, std::int64_t n, int spin) {
  std::vector<std::int64_t> c(static_cast<std::size_t>(q), 0);
  c.at(static_cast<std::size_t>(spin)) = n;
  return SpinCounts(std::move(c));
}

SpinCounts SpinCounts::uniform_random(int q, std::int64_t n, Stream& rng) {
  std::vector<std::int64_t> c(static_cast<std::size_t>(q), 0);
  multinomial_uniform(rng, n, c);
  return SpinCounts(std::move(c));
}

int SpinCounts::dominant() const noexcept {
  return static_cast<int>(std::max_element(counts_.begin(), counts_.end()) - counts_.begin());
}

std::vector<double> SpinCounts::proportions() const {
  std::vector<double> out(counts_.size());
  const auto total = static_cast<double>(n_);
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    out[i] = total > 0 ? static_cast<double>(counts_[i]) / total : 0.0;
  }
  return out;
}

std::vector<std::int64_t> SpinCounts::sorted() const {
  std::vector<std::int64_t> out = counts_;
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

ProjectionMatrix::ProjectionMatrix(int cells, int q, std::vector<std::int64_t> entries)
    : cells_(cells), q_(q), a_(std::move(entries)) {
  if (cells < 1 || q < 1 ||
      a_.size() != static_cast<std::size_t>(cells) * static_cast<std::size_t>(q)) {
    throw precondition_error("ProjectionMatrix: entries must be cells*q");
  }
  cell_sizes_.assign(static_cast<std::size_t>(cells), 0);
  for (int i = 0; i < cells; ++i) {
    for (int j = 0; j < q; ++j) {
      const std::int64_t v = at(i, j);
      if (v < 0) throw precondition_error("ProjectionMatrix: negative entry");
      cell_sizes_[static_cast<std::size_t>(i)] += v;
    }
    n_ += cell_sizes_[static_cast<std::size_t>(i)];
  }
}

ProjectionMatrix ProjectionMatrix::from_counts(const SpinCounts& counts) {
  return ProjectionMatrix(1, counts.q(), counts.counts());
}

ProjectionMatrix ProjectionMatrix::diagonal(const SpinCounts& counts) {
  const int q = counts.q();
  std::vector<std::int64_t> e(static_cast<std::size_t>(q) * static_cast<std::size_t>(q), 0);
  for (int i = 0; i < q; ++i) {
    e[static_cast<std::size_t>(i) * static_cast<std::size_t>(q) + static_cast<std::size_t>(i)] =
        counts[static_cast<std::size_t>(i)];
  }
  return ProjectionMatrix(q, q, std::move(e));
}

ProjectionMatrix ProjectionMatrix::random_table(std::span<const std::int64_t> cell_sizes,
                                                const SpinCounts& counts, Stream& rng) {
  const std::int64_t total = std::accumulate(cell_sizes.begin(), cell_sizes.end(),
                                             std::int64_t{0});
  if (total != counts.n()) {
    throw precondition_error("random_table: cell sizes and spin counts disagree on n");
  }
  const int cells = static_cast<int>(cell_sizes.size());
  const int q = counts.q();
  std::vector<std::int64_t> remaining = counts.counts();
  std::vector<std::int64_t> e(static_cast<std::size_t>(cells) * static_cast<std::size_t>(q), 0);
  for (int i = 0; i < cells; ++i) {
    std::span<std::int64_t> row(e.data() + static_cast<std::size_t>(i) * static_cast<std::size_t>(q),
                                static_cast<std::size_t>(q));
    multivariate_hypergeometric(rng, cell_sizes[static_cast<std::size_t>(i)], remaining, row);
    for (int j = 0; j < q; ++j) remaining[static_cast<std::size_t>(j)] -= row[static_cast<std::size_t>(j)];
  }
  return ProjectionMatrix(cells, q, std::move(e));
}

SpinCounts ProjectionMatrix::column_sums() const {
  std::vector<std::int64_t> c(static_cast<std::size_t>(q_), 0);
  for (int i = 0; i < cells_; ++i) {
    for (int j = 0; j < q_; ++j) c[static_cast<std::size_t>(j)] += at(i, j);
  }
  return SpinCounts(std::move(c));
}

ProjectionMatrix ProjectionMatrix::permuted_spins(std::span<const int> perm) const {
  if (perm.size() != static_cast<std::size_t>(q_)) {
    throw precondition_error("permuted_spins: permutation has wrong length");
  }
  std::vector<std::int64_t> e(a_.size(), 0);
  for (int i = 0; i < cells_; ++i) {
    for (int j = 0; j < q_; ++j) {
      e[static_cast<std::size_t>(i) * static_cast<std::size_t>(q_) +
        static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])] = at(i, j);
    }
  }
  return ProjectionMatrix(cells_, q_, std::move(e));
}

SpinCounts sw_step_counts(const SpinCounts& state, const ModelParams& params, Stream& rng) {
  check_q(state.q(), params);
  const int q = state.q();
  auto& sizes = scratch_sizes();
  for (int j = 0; j < q; ++j) {
    explore_components(state[static_cast<std::size_t>(j)], params.p(), rng, sizes);
  }
  // Colours are independent of the class a component came from, so components
  // of equal size are recoloured together with one multinomial draw.
  std::sort(sizes.begin(), sizes.end(), std::greater<>());
  std::vector<std::int64_t> next(static_cast<std::size_t>(q), 0);
  std::vector<std::int64_t> draw(static_cast<std::size_t>(q), 0);
  std::size_t i = 0;
  while (i < sizes.size()) {
    std::size_t j = i;
    while (j < sizes.size() && sizes[j] == sizes[i]) ++j;
    const std::int64_t size = sizes[i];
    const auto multiplicity = static_cast<std::int64_t>(j - i);
    if (multiplicity == 1) {
      next[rng.below(static_cast<std::uint64_t>(q))] += size;
    } else {
      multinomial_uniform(rng, multiplicity, draw);
      for (int s = 0; s < q; ++s) next[static_cast<std::size_t>(s)] += size * draw[static_cast<std::size_t>(s)];
    }
    i = j;
  }
  return SpinCounts(std::move(next));
}

ProjectionMatrix sw_step_projection(const ProjectionMatrix& state, const ModelParams& params,
                                    Stream& rng) {
  check_q(state.q(), params);
  const int q = state.q();
  const int cells = state.cells();
  const auto ucells = static_cast<std::size_t>(cells);
  std::vector<std::int64_t> next(state.entries().size(), 0);
  auto next_at = [&](int cell, int spin) -> std::int64_t& {
    return next[static_cast<std::size_t>(cell) * static_cast<std::size_t>(q) +
                static_cast<std::size_t>(spin)];
  };
  std::vector<std::int64_t> isolated(ucells, 0);
  std::vector<std::int64_t> urn(ucells, 0);
  std::vector<std::int64_t> split(ucells, 0);
  auto& sizes = scratch_sizes();
  for (int j = 0; j < q; ++j) {
    std::int64_t class_size = 0;
    for (int i = 0; i < cells; ++i) {
      urn[static_cast<std::size_t>(i)] = state.at(i, j);
      class_size += state.at(i, j);
    }
    if (class_size == 0) continue;
    sizes.clear();
    explore_components(class_size, params.p(), rng, sizes);
    for (const std::int64_t size : sizes) {
      if (size == 1) continue;
      multivariate_hypergeometric(rng, size, urn, split);
      const auto colour = static_cast<int>(rng.below(static_cast<std::uint64_t>(q)));
      for (std::size_t i = 0; i < ucells; ++i) {
        urn[i] -= split[i];
        next_at(static_cast<int>(i), colour) += split[i];
      }
    }
    for (std::size_t i = 0; i < ucells; ++i) isolated[i] += urn[i];
  }
  std::vector<std::int64_t> draw(static_cast<std::size_t>(q), 0);
  for (int i = 0; i < cells; ++i) {
    multinomial_uniform(rng, isolated[static_cast<std::size_t>(i)], draw);
    for (int s = 0; s < q; ++s) next_at(i, s) += draw[static_cast<std::size_t>(s)];
  }
  return ProjectionMatrix(cells, q, std::move(next));
}

std::vector<SpinCounts> run_trajectory(const SpinCounts& start, std::int64_t t_max,
                                       const ModelParams& params, Stream& rng) {
  if (t_max < 0) throw precondition_error("run_trajectory: t_max must be >= 0");
  std::vector<SpinCounts> path;
  path.reserve(static_cast<std::size_t>(t_max) + 1);
  path.push_back(start);
  for (std::int64_t t = 0; t < t_max; ++t) path.push_back(sw_step_counts(path.back(), params, rng));
  return path;
}

double distance_to_majority(const SpinCounts& state, std::span<const double> m) {
  if (m.size() != static_cast<std::size_t>(state.q())) {
    throw precondition_error("distance_to_majority: m has wrong length");
  }
  const std::vector<std::int64_t> s = state.sorted();
  const auto n = static_cast<double>(state.n());
  double worst = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    worst = std::max(worst, std::fabs(static_cast<double>(s[i]) / n - m[i]));
  }
  return worst;
}

}  // namespace swlab
