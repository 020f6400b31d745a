#include "swlab/exact.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>

#include "swlab/errors.hpp"

namespace swlab {

namespace {

constexpr std::size_t kMaxStationaryStates = 1'000'000;
constexpr int kMaxTransitionN = 6;
constexpr int kMaxTransitionQ = 3;

std::size_t checked_state_count(int n, int q, std::size_t limit, const char* what) {
  if (n < 1 || q < 2) throw precondition_error(std::string(what) + ": need n >= 1 and q >= 2");
  std::size_t states = 1;
  for (int i = 0; i < n; ++i) {
    states *= static_cast<std::size_t>(q);
    if (states > limit) {
      throw size_guard_error(std::string(what) + ": q^n exceeds the enumeration guard");
    }
  }
  return states;
}

void decode(std::size_t index, int n, int q, std::vector<int>& spins) {
  spins.resize(static_cast<std::size_t>(n));
  for (int v = 0; v < n; ++v) {
    spins[static_cast<std::size_t>(v)] = static_cast<int>(index % static_cast<std::size_t>(q));
    index /= static_cast<std::size_t>(q);
  }
}

double log_factorial(std::int64_t k) { return std::lgamma(static_cast<double>(k) + 1.0); }

}  // namespace

std::vector<double> exact_stationary(int n, int q, double beta) {
  const std::size_t states = checked_state_count(n, q, kMaxStationaryStates, "exact_stationary");
  std::vector<double> log_w(states);
  std::vector<int> spins;
  std::vector<std::int64_t> counts(static_cast<std::size_t>(q));
  for (std::size_t s = 0; s < states; ++s) {
    decode(s, n, q, spins);
    std::fill(counts.begin(), counts.end(), 0);
    for (const int c : spins) ++counts[static_cast<std::size_t>(c)];
    double mono = 0.0;
    for (const auto c : counts) mono += 0.5 * static_cast<double>(c) * static_cast<double>(c - 1);
    log_w[s] = beta / n * mono;
  }
  const double top = *std::max_element(log_w.begin(), log_w.end());
  double z = 0.0;
  for (auto& w : log_w) {
    w = std::exp(w - top);
    z += w;
  }
  for (auto& w : log_w) w /= z;
  return log_w;
}

std::vector<double> exact_transition_matrix(int n, int q, double beta) {
  if (n > kMaxTransitionN || q > kMaxTransitionQ) {
    throw size_guard_error("exact_transition_matrix: requires n <= 6 and q <= 3");
  }
  const std::size_t states = checked_state_count(n, q, kMaxStationaryStates, "exact_transition_matrix");
  const double p = -std::expm1(-beta / n);
  std::vector<double> P(states * states, 0.0);
  std::vector<int> spins;
  std::vector<std::pair<int, int>> mono;
  struct Partition {
    double weight = 0.0;
    int blocks = 0;
    std::array<int, kMaxTransitionN> label{};
  };
  std::unordered_map<std::uint32_t, Partition> partitions;
  std::vector<std::size_t> power(static_cast<std::size_t>(n), 1);
  for (int v = 1; v < n; ++v) power[static_cast<std::size_t>(v)] = power[static_cast<std::size_t>(v - 1)] * static_cast<std::size_t>(q);

  for (std::size_t s = 0; s < states; ++s) {
    decode(s, n, q, spins);
    mono.clear();
    for (int u = 0; u < n; ++u) {
      for (int v = u + 1; v < n; ++v) {
        if (spins[static_cast<std::size_t>(u)] == spins[static_cast<std::size_t>(v)]) mono.emplace_back(u, v);
      }
    }
    const int m = static_cast<int>(mono.size());
    partitions.clear();
    for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
      std::array<int, kMaxTransitionN> parent{};
      for (int v = 0; v < n; ++v) parent[static_cast<std::size_t>(v)] = v;
      std::function<int(int)> find = [&](int x) {
        while (parent[static_cast<std::size_t>(x)] != x) x = parent[static_cast<std::size_t>(x)];
        return x;
      };
      int kept = 0;
      for (int e = 0; e < m; ++e) {
        if (mask & (1u << e)) {
          ++kept;
          const int a = find(mono[static_cast<std::size_t>(e)].first);
          const int b = find(mono[static_cast<std::size_t>(e)].second);
          if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
        }
      }
      // Canonical block labels in order of first appearance.
      std::array<int, kMaxTransitionN> root_label;
      root_label.fill(-1);
      Partition part;
      std::uint32_t key = 0;
      for (int v = 0; v < n; ++v) {
        const int r = find(v);
        if (root_label[static_cast<std::size_t>(r)] < 0) root_label[static_cast<std::size_t>(r)] = part.blocks++;
        part.label[static_cast<std::size_t>(v)] = root_label[static_cast<std::size_t>(r)];
        key = key * 8u + static_cast<std::uint32_t>(part.label[static_cast<std::size_t>(v)]);
      }
      const double w = std::pow(p, kept) * std::pow(1.0 - p, m - kept);
      auto [it, inserted] = partitions.try_emplace(key, part);
      it->second.weight += w;
    }
    double* row = P.data() + s * states;
    for (const auto& [key, part] : partitions) {
      std::size_t colourings = 1;
      for (int b = 0; b < part.blocks; ++b) colourings *= static_cast<std::size_t>(q);
      const double share = part.weight / static_cast<double>(colourings);
      std::array<int, kMaxTransitionN> colour{};
      for (std::size_t c = 0; c < colourings; ++c) {
        std::size_t rest = c;
        for (int b = 0; b < part.blocks; ++b) {
          colour[static_cast<std::size_t>(b)] = static_cast<int>(rest % static_cast<std::size_t>(q));
          rest /= static_cast<std::size_t>(q);
        }
        std::size_t target = 0;
        for (int v = 0; v < n; ++v) {
          target += power[static_cast<std::size_t>(v)] *
                    static_cast<std::size_t>(colour[static_cast<std::size_t>(part.label[static_cast<std::size_t>(v)])]);
        }
        row[target] += share;
      }
    }
  }
  return P;
}

ExactChain build_exact_chain(int n, int q, double beta) {
  ExactChain chain;
  chain.n = n;
  chain.q = q;
  chain.beta = beta;
  chain.transition = exact_transition_matrix(n, q, beta);
  chain.stationary = exact_stationary(n, q, beta);
  chain.states = chain.stationary.size();
  return chain;
}

std::vector<double> evolve_distribution(const ExactChain& chain, std::vector<double> dist,
                                        std::int64_t steps) {
  if (dist.size() != chain.states) throw precondition_error("evolve_distribution: size mismatch");
  std::vector<double> next(chain.states);
  for (std::int64_t t = 0; t < steps; ++t) {
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t i = 0; i < chain.states; ++i) {
      if (dist[i] == 0.0) continue;
      const double* row = chain.transition.data() + i * chain.states;
      for (std::size_t j = 0; j < chain.states; ++j) next[j] += dist[i] * row[j];
    }
    dist.swap(next);
  }
  return dist;
}

std::vector<std::int64_t> config_counts(std::size_t index, int n, int q) {
  std::vector<std::int64_t> counts(static_cast<std::size_t>(q), 0);
  for (int v = 0; v < n; ++v) {
    ++counts[index % static_cast<std::size_t>(q)];
    index /= static_cast<std::size_t>(q);
  }
  return counts;
}

std::map<std::vector<std::int64_t>, double> project_sorted_counts(std::span<const double> dist,
                                                                  int n, int q) {
  std::map<std::vector<std::int64_t>, double> out;
  for (std::size_t s = 0; s < dist.size(); ++s) {
    if (dist[s] == 0.0) continue;
    auto c = config_counts(s, n, q);
    std::sort(c.begin(), c.end(), std::greater<>());
    out[c] += dist[s];
  }
  return out;
}

std::map<std::vector<std::int64_t>, double> stationary_sorted_counts(std::int64_t n, int q,
                                                                     double beta) {
  if (n < 1 || q < 2) throw precondition_error("stationary_sorted_counts: need n >= 1, q >= 2");
  // Rough count of descending vectors: n^(q-1) / (q-1)!^2.
  double estimate = 1.0;
  for (int i = 1; i < q; ++i) estimate *= static_cast<double>(n + 1) / (static_cast<double>(i) * i);
  if (estimate > 5e6) throw size_guard_error("stationary_sorted_counts: too many count vectors");

  std::vector<std::pair<std::vector<std::int64_t>, double>> entries;
  std::vector<std::int64_t> current(static_cast<std::size_t>(q), 0);
  const double log_n_fact = log_factorial(n);
  std::function<void(int, std::int64_t, std::int64_t)> rec = [&](int idx, std::int64_t remaining,
                                                                 std::int64_t cap) {
    if (idx == q - 1) {
      if (remaining > cap) return;
      current[static_cast<std::size_t>(idx)] = remaining;
      double log_w = log_n_fact;
      double mono = 0.0;
      for (const auto c : current) {
        log_w -= log_factorial(c);
        mono += 0.5 * static_cast<double>(c) * static_cast<double>(c - 1);
      }
      // Number of distinct spin labellings of this sorted vector.
      double log_perm = log_factorial(q);
      std::size_t i = 0;
      while (i < current.size()) {
        std::size_t j = i;
        while (j < current.size() && current[j] == current[i]) ++j;
        log_perm -= log_factorial(static_cast<std::int64_t>(j - i));
        i = j;
      }
      entries.emplace_back(current, log_w + log_perm + beta / static_cast<double>(n) * mono);
      return;
    }
    const int slots_left = q - idx;
    const std::int64_t lo = (remaining + slots_left - 1) / slots_left;
    for (std::int64_t c = std::min(cap, remaining); c >= lo; --c) {
      current[static_cast<std::size_t>(idx)] = c;
      rec(idx + 1, remaining - c, c);
    }
  };
  rec(0, n, n);
  double top = -INFINITY;
  for (const auto& e : entries) top = std::max(top, e.second);
  double z = 0.0;
  for (auto& e : entries) {
    e.second = std::exp(e.second - top);
    z += e.second;
  }
  std::map<std::vector<std::int64_t>, double> out;
  for (auto& e : entries) out.emplace(std::move(e.first), e.second / z);
  return out;
}

OracleReport check_exact_chain(const ExactChain& chain) {
  OracleReport report;
  const std::size_t N = chain.states;
  double mass = 0.0;
  for (const double m : chain.stationary) mass += m;
  report.stationary_mass_error = std::fabs(mass - 1.0);
  std::vector<double> muP(N, 0.0);
  for (std::size_t i = 0; i < N; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      const double pij = chain.P(i, j);
      row += pij;
      muP[j] += chain.stationary[i] * pij;
      if (j > i) {
        const double flow = std::fabs(chain.stationary[i] * pij - chain.stationary[j] * chain.P(j, i));
        report.detailed_balance = std::max(report.detailed_balance, flow);
      }
    }
    report.max_row_error = std::max(report.max_row_error, std::fabs(row - 1.0));
  }
  for (std::size_t j = 0; j < N; ++j) report.stationarity_l1 += std::fabs(muP[j] - chain.stationary[j]);
  return report;
}

}  // namespace swlab
