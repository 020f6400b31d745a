#include "swlab/percolation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "swlab/analysis.hpp"
#include "swlab/errors.hpp"
#include "swlab/parallel.hpp"

namespace swlab {

namespace {

constexpr std::int64_t kBruteforceLimit = 2000;

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), std::size_t{0});
  }

  std::size_t find(std::size_t x) {
    std::size_t root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const std::size_t next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

  std::int64_t size_of_root(std::size_t root) const { return size_[root]; }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::int64_t> size_;
};

void sort_descending(std::vector<std::int64_t>& sizes) {
  std::stable_sort(sizes.begin(), sizes.end(), std::greater<>());
}

}  // namespace

void explore_components(std::int64_t k, double p, Stream& rng, std::vector<std::int64_t>& out) {
  if (k <= 0) return;
  if (!(p > 0.0)) {
    out.insert(out.end(), static_cast<std::size_t>(k), 1);
    return;
  }
  const double log_miss = p >= 1.0 ? -INFINITY : std::log1p(-p);
  std::int64_t unexplored = k;
  while (unexplored > 0) {
    --unexplored;
    std::int64_t size = 1;
    std::int64_t active = 1;
    while (active > 0 && unexplored > 0) {
      // Probability that an unexplored vertex has an edge into the active set.
      const double hit = -std::expm1(static_cast<double>(active) * log_miss);
      const std::int64_t found = binomial(rng, unexplored, hit);
      unexplored -= found;
      size += found;
      active = found;
    }
    out.push_back(size);
  }
}

ComponentSample sample_components(std::int64_t k, double p, Stream& rng) {
  ComponentSample sample;
  sample.k = std::max<std::int64_t>(k, 0);
  sample.p = p;
  explore_components(k, p, rng, sample.sizes);
  sort_descending(sample.sizes);
  return sample;
}

ComponentSample sample_components_bruteforce(std::int64_t k, double p, Stream& rng) {
  if (k > kBruteforceLimit) {
    throw size_guard_error("sample_components_bruteforce: k = " + std::to_string(k) +
                           " exceeds the quadratic-cost guard of 2000");
  }
  ComponentSample sample;
  sample.k = std::max<std::int64_t>(k, 0);
  sample.p = p;
  const auto vertices = static_cast<std::size_t>(sample.k);
  UnionFind uf(vertices);
  for (std::size_t i = 0; i < vertices; ++i) {
    for (std::size_t j = i + 1; j < vertices; ++j) {
      if (rng.uniform() < p) uf.unite(i, j);
    }
  }
  std::vector<char> seen(vertices, 0);
  for (std::size_t v = 0; v < vertices; ++v) {
    const std::size_t root = uf.find(v);
    if (!seen[root]) {
      seen[root] = 1;
      sample.sizes.push_back(uf.size_of_root(root));
    }
  }
  sort_descending(sample.sizes);
  return sample;
}

std::vector<std::int64_t> split_component_over_cells(std::int64_t component_size,
                                                     std::span<const std::int64_t> cell_counts,
                                                     Stream& rng) {
  const std::int64_t total = std::accumulate(cell_counts.begin(), cell_counts.end(),
                                             std::int64_t{0});
  if (component_size < 0 || component_size > total ||
      std::any_of(cell_counts.begin(), cell_counts.end(), [](auto c) { return c < 0; })) {
    throw precondition_error("split_component_over_cells: need 0 <= size <= sum(cell_counts)");
  }
  std::vector<std::int64_t> out(cell_counts.size(), 0);
  multivariate_hypergeometric(rng, component_size, cell_counts, out);
  return out;
}

SusceptibilityStats susceptibility_experiment(double lambda,
                                              std::span<const std::int64_t> n_grid,
                                              std::int64_t replicas, std::uint64_t seed,
                                              int jobs) {
  if (lambda == 1.0 || !(lambda > 0.0)) {
    throw precondition_error("susceptibility_experiment: lambda must be positive and != 1");
  }
  if (replicas < 2) throw precondition_error("susceptibility_experiment: need >= 2 replicas");
  struct Draw {
    double r = 0.0;
    double isolated = 0.0;
    double l1 = 0.0;
  };
  const double theta = solve_theta(lambda);
  SusceptibilityStats stats;
  stats.lambda = lambda;
  stats.replicas = replicas;
  const bool supercritical = lambda > 1.0;
  for (const std::int64_t n : n_grid) {
    if (n < 1) throw precondition_error("susceptibility_experiment: n must be >= 1");
    const double p = std::min(1.0, lambda / static_cast<double>(n));
    const std::uint64_t n_seed = derive_seed(seed, static_cast<std::uint64_t>(n));
    auto draws = run_replicas(replicas, jobs, [&](std::int64_t r) {
      Stream rng = derive_stream(n_seed, static_cast<std::uint64_t>(r));
      const ComponentSample s = sample_components(n, p, rng);
      Draw d;
      for (std::size_t j = supercritical ? 1 : 0; j < s.sizes.size(); ++j) {
        d.r += static_cast<double>(s.sizes[j]) * static_cast<double>(s.sizes[j]);
      }
      d.isolated = static_cast<double>(std::count(s.sizes.begin(), s.sizes.end(), 1));
      d.l1 = s.sizes.empty() ? 0.0 : static_cast<double>(s.sizes.front());
      return d;
    });
    double sum_r = 0.0, sum_iso = 0.0, sum_l1 = 0.0;
    std::int64_t within = 0;
    const double giant = theta * static_cast<double>(n);
    const double band = 6.0 * std::sqrt(static_cast<double>(n));
    for (const auto& d : draws) {
      sum_r += d.r;
      sum_iso += d.isolated;
      sum_l1 += d.l1;
      if (std::fabs(d.l1 - giant) <= band) ++within;
    }
    const double count = static_cast<double>(replicas);
    const double mean_r = sum_r / count;
    double ss = 0.0;
    for (const auto& d : draws) ss += (d.r - mean_r) * (d.r - mean_r);
    stats.n_values.push_back(n);
    stats.mean_R.push_back(mean_r);
    stats.var_R.push_back(ss / (count - 1.0));
    stats.isolated_mean.push_back(sum_iso / count);
    stats.l1_mean.push_back(sum_l1 / count);
    stats.giant_within.push_back(static_cast<double>(within) / count);
  }
  return stats;
}

}  // namespace swlab
