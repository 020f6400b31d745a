#pragma once

#include <cstdint>
#include <vector>

namespace swlab {

// Mean-field Potts parameters: q spins, interaction beta/n on K_n.
// The percolation probability p = 1 - exp(-beta/n) is derived once.
class ModelParams {
 public:
  ModelParams(int q, double beta, std::int64_t n = 1);

  int q() const noexcept { return q_; }
  double beta() const noexcept { return beta_; }
  std::int64_t n() const noexcept { return n_; }
  double p() const noexcept { return p_; }

  ModelParams with_n(std::int64_t n) const { return ModelParams(q_, beta_, n); }

 private:
  int q_;
  double beta_;
  std::int64_t n_;
  double p_;
};

struct DriftProfile {
  int q = 0;
  double beta = 0.0;
  double a = 0.0;
  double theta_at_a = 0.0;
  double f_prime_at_a = 0.0;
  double cutoff_c = 0.0;
  std::vector<double> m;
};

// Giant-component density of G(n, lambda/n): the positive root of
// exp(-lambda x) = 1 - x, and 0 for lambda <= 1.
double solve_theta(double lambda);

// Drift function F(x) = 1/q + (1 - 1/q) theta(beta x) x on [1/q, 1].
double drift_F(double x, const ModelParams& params);

// F'(x) in the theta-only form (q-1)/q * th^2 / (th + (1-th) log(1-th)).
// Requires beta x > 1.
double drift_F_prime(double x, const ModelParams& params);

// F'(x) in the direct form (q-1) th / (q (1 - beta x e^{-beta x th})).
double drift_F_prime_direct(double x, const ModelParams& params);

// Closed form of F''(x); requires beta x > 1.
double drift_F_second(double x, const ModelParams& params);

// G(x, y) = 1/q + theta(beta x) y (1 - 1/q), the per-cell drift.
double drift_G(double x, double y, const ModelParams& params);

// F applied t times.
double iterate_drift(double x0, std::int64_t t, const ModelParams& params);

// Unique fixed point of F in (1/q, 1]; requires beta > q.
double fixed_point_a(const ModelParams& params);

// c(beta, q) = 1 / (2 log(1 / F'(a))); requires beta > q.
double cutoff_constant(const ModelParams& params);

// Order-disorder critical temperature of the mean-field model.
double beta_critical(int q);

// kappa(b) = (b, (1-b)/(q-1), ..., (1-b)/(q-1)).
std::vector<double> kappa(double b, int q);

// Full profile at the fixed point; requires beta > q.
DriftProfile drift_profile(const ModelParams& params);

}  // namespace swlab
