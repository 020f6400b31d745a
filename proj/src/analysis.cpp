#include "swlab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "swlab/errors.hpp"

namespace swlab {

namespace {

constexpr int kMaxBisection = 200;
constexpr int kNewtonPolish = 3;

// Bisection on a residual with f(lo) > 0 > f(hi), then a few guarded Newton
// steps. Returns the best point found.
template <typename Residual, typename Slope>
double bracket_root(Residual&& f, Slope&& df, double lo, double hi, double tol) {
  double x = 0.5 * (lo + hi);
  for (int it = 0; it < kMaxBisection; ++it) {
    x = 0.5 * (lo + hi);
    const double fx = f(x);
    if (fx == 0.0) return x;
    if (fx > 0.0) {
      lo = x;
    } else {
      hi = x;
    }
    if (hi - lo <= std::numeric_limits<double>::epsilon() * std::max(1e-300, x) &&
        std::fabs(fx) <= tol) {
      break;
    }
  }
  double best = x;
  double best_res = std::fabs(f(x));
  for (int it = 0; it < kNewtonPolish; ++it) {
    const double slope = df(best);
    if (!(slope != 0.0) || !std::isfinite(slope)) break;
    const double next = best - f(best) / slope;
    if (!(next >= lo && next <= hi)) break;
    const double res = std::fabs(f(next));
    if (res >= best_res) break;
    best = next;
    best_res = res;
  }
  return best;
}

void require_supercritical(double x, const ModelParams& params, const char* what) {
  if (!(params.beta() * x > 1.0)) {
    throw domain_error(std::string(what) + ": requires beta*x > 1, got beta*x = " +
                       std::to_string(params.beta() * x));
  }
}

void require_unit_interval(double x, int q, const char* what) {
  const double slack = 1e-14;
  if (!(x >= 1.0 / q - slack && x <= 1.0 + slack)) {
    throw domain_error(std::string(what) + ": x = " + std::to_string(x) +
                       " outside [1/q, 1]");
  }
}

void require_above_q(const ModelParams& params, const char* what) {
  if (!(params.beta() > params.q())) {
    throw precondition_error(std::string(what) + ": requires beta > q (beta = " +
                             std::to_string(params.beta()) +
                             ", q = " + std::to_string(params.q()) + ")");
  }
}

// 1 - theta(lambda) to full relative precision. At the root 1 - theta equals
// e^{-lambda theta}, which stays accurate when theta rounds to 1.
double theta_complement(double lambda, double theta) { return std::exp(-lambda * theta); }

// log F'(x), using log F' = log(1 - 1/q) + 2 log(theta) - log(theta + u log u)
// with u = 1 - theta, so the result keeps its relative accuracy as F' nears 1 - 1/q.
double log_drift_slope(double x, const ModelParams& params) {
  const double lambda = params.beta() * x;
  const double th = solve_theta(lambda);
  const double u = theta_complement(lambda, th);
  return std::log1p(-1.0 / params.q()) + 2.0 * std::log1p(-u) - std::log1p(-u + u * std::log(u));
}

}  // namespace

ModelParams::ModelParams(int q, double beta, std::int64_t n) : q_(q), beta_(beta), n_(n) {
  if (q < 2) throw precondition_error("q must be at least 2");
  if (!std::isfinite(beta) || beta < 0.0) throw precondition_error("beta must be finite and >= 0");
  if (n < 1) throw precondition_error("n must be at least 1");
  p_ = -std::expm1(-beta / static_cast<double>(n));
}

double solve_theta(double lambda) {
  if (std::isnan(lambda)) throw domain_error("solve_theta: lambda is NaN");
  if (lambda <= 1.0) return 0.0;
  if (std::isinf(lambda)) return 1.0;
  // (1 - x) - e^{-lambda x}, written to stay accurate near x = 0.
  auto g = [lambda](double x) { return -x - std::expm1(-lambda * x); };
  auto dg = [lambda](double x) { return -1.0 + lambda * std::exp(-lambda * x); };
  // g(x)/x is lambda - 1 > 0 at 0+ and -e^{-lambda} < 0 at 1, so bisecting the
  // scaled residual never lands on the trivial root.
  auto h = [&g](double x) { return g(x) / x; };
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < kMaxBisection; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (h(mid) > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  double x = 0.5 * (lo + hi);
  double best_res = std::fabs(g(x));
  for (int it = 0; it < kNewtonPolish; ++it) {
    const double slope = dg(x);
    if (slope == 0.0) break;
    const double next = x - g(x) / slope;
    if (!(next > 0.0 && next <= 1.0)) break;
    const double res = std::fabs(g(next));
    if (res >= best_res) break;
    x = next;
    best_res = res;
  }
  return x;
}

double drift_F(double x, const ModelParams& params) {
  require_unit_interval(x, params.q(), "drift_F");
  const double inv_q = 1.0 / params.q();
  return inv_q + (1.0 - inv_q) * solve_theta(params.beta() * x) * x;
}

double drift_F_prime(double x, const ModelParams& params) {
  require_supercritical(x, params, "drift_F_prime");
  const double lambda = params.beta() * x;
  const double th = solve_theta(lambda);
  const double u = theta_complement(lambda, th);
  const double q = params.q();
  return (q - 1.0) / q * th * th / (th + u * std::log(u));
}

double drift_F_prime_direct(double x, const ModelParams& params) {
  require_supercritical(x, params, "drift_F_prime_direct");
  const double lambda = params.beta() * x;
  const double th = solve_theta(lambda);
  const double q = params.q();
  return (q - 1.0) * th / (q * (1.0 - lambda * std::exp(-lambda * th)));
}

double drift_F_second(double x, const ModelParams& params) {
  require_supercritical(x, params, "drift_F_second");
  const double lambda = params.beta() * x;
  const double th = solve_theta(lambda);
  const double q = params.q();
  const double e = std::exp(-lambda * th);
  const double denom = 1.0 - lambda * e;
  return -(q - 1.0) * params.beta() * th * e * (lambda * (th + 2.0 * e) - 2.0) /
         (q * denom * denom * denom);
}

double drift_G(double x, double y, const ModelParams& params) {
  require_unit_interval(x, params.q(), "drift_G");
  require_unit_interval(y, params.q(), "drift_G");
  const double inv_q = 1.0 / params.q();
  return inv_q + solve_theta(params.beta() * x) * y * (1.0 - inv_q);
}

double iterate_drift(double x0, std::int64_t t, const ModelParams& params) {
  if (t < 0) throw precondition_error("iterate_drift: t must be >= 0");
  require_unit_interval(x0, params.q(), "iterate_drift");
  double x = x0;
  for (std::int64_t i = 0; i < t; ++i) x = drift_F(x, params);
  return x;
}

double fixed_point_a(const ModelParams& params) {
  require_above_q(params, "fixed_point_a");
  const double lo = 1.0 / params.q() + 1e-9;
  const double hi = 1.0;
  auto residual = [&params](double x) { return drift_F(x, params) - x; };
  if (residual(hi) >= 0.0) return 1.0;
  auto slope = [&params](double x) { return drift_F_prime(x, params) - 1.0; };
  return bracket_root(residual, slope, lo, hi, 1e-15);
}

double cutoff_constant(const ModelParams& params) {
  const double a = fixed_point_a(params);
  require_supercritical(a, params, "cutoff_constant");
  return -1.0 / (2.0 * log_drift_slope(a, params));
}

double beta_critical(int q) {
  if (q < 2) throw domain_error("beta_critical: q must be at least 2");
  if (q == 2) return 2.0;
  const double qd = q;
  return 2.0 * ((qd - 1.0) / (qd - 2.0)) * std::log(qd - 1.0);
}

std::vector<double> kappa(double b, int q) {
  std::vector<double> v(static_cast<std::size_t>(q), (1.0 - b) / (q - 1));
  v[0] = b;
  return v;
}

DriftProfile drift_profile(const ModelParams& params) {
  require_above_q(params, "drift_profile");
  DriftProfile out;
  out.q = params.q();
  out.beta = params.beta();
  out.a = fixed_point_a(params);
  out.theta_at_a = solve_theta(out.a * params.beta());
  out.f_prime_at_a = drift_F_prime(out.a, params);
  out.cutoff_c = cutoff_constant(params);
  out.m = kappa(out.a, params.q());
  return out;
}

}  // namespace swlab
