#include "sphere_mv/specfun.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>

namespace sphere_mv::specfun {

namespace {

void require_lambda(double lambda) {
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw std::invalid_argument("gegenbauer: lambda must be positive, got " +
                                std::to_string(lambda));
  }
}

void require_point(double t) {
  if (!std::isfinite(t)) throw std::invalid_argument("gegenbauer: non-finite argument");
  if (std::abs(t) > 1.0 + 1e-12) {
    throw std::invalid_argument("gegenbauer: argument outside [-1, 1]: " + std::to_string(t));
  }
}

// sin(pi x) without the loss of accuracy of sin(M_PI * x) for large |x|.
double sin_pi(double x) {
  const double r = x - std::round(x);
  const double s = std::sin(std::numbers::pi * r);
  return (static_cast<long long>(std::round(x)) % 2 == 0) ? s : -s;
}

// Asymptotic expansion for large argument. Returns NaN when the series stops
// converging before reaching double precision.
double bessel_i_large_x(double nu, double x) {
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  double last = 1.0;
  for (int k = 1; k < 200; ++k) {
    const double odd = 2.0 * k - 1.0;
    term *= -(mu - odd * odd) / (k * 8.0 * x);
    const double mag = std::abs(term);
    if (mag > last) return std::numeric_limits<double>::quiet_NaN();
    sum += term;
    if (mag < 1e-17 * std::abs(sum)) {
      return std::exp(x - 0.5 * std::log(2.0 * std::numbers::pi * x)) * sum;
    }
    last = mag;
  }
  return std::numeric_limits<double>::quiet_NaN();
}

// Power series sum_k (x/2)^(2k+nu) / (k! Gamma(k+nu+1)). Every term is
// positive, so summation is accurate; terms are scaled by the largest one to
// stay finite for large x.
double bessel_i_series(double nu, double x) {
  const double log_q = 2.0 * std::log(0.5 * x);
  double log_term = nu * std::log(0.5 * x) - log_gamma(nu + 1.0);
  double log_peak = log_term;
  std::vector<double> logs{log_term};
  for (int k = 1; k < 100000; ++k) {
    log_term += log_q - std::log(static_cast<double>(k)) - std::log(k + nu);
    logs.push_back(log_term);
    log_peak = std::max(log_peak, log_term);
    if (log_term < log_peak - 40.0) break;
  }
  double sum = 0.0;
  for (auto it = logs.rbegin(); it != logs.rend(); ++it) sum += std::exp(*it - log_peak);
  return std::exp(log_peak + std::log(sum));
}

}  // namespace

double gegenbauer(int k, double lambda, double t) {
  if (k < 0) throw std::invalid_argument("gegenbauer: negative degree");
  require_lambda(lambda);
  require_point(t);
  if (k == 0) return 1.0;
  double prev = 1.0;
  double curr = 2.0 * lambda * t;
  for (int j = 2; j <= k; ++j) {
    const double next = (2.0 * (lambda + j - 1) * t * curr - (2.0 * lambda + j - 2) * prev) / j;
    prev = curr;
    curr = next;
  }
  return curr;
}

void gegenbauer_all(double lambda, double t, std::span<double> out) {
  require_lambda(lambda);
  require_point(t);
  if (out.empty()) return;
  out[0] = 1.0;
  if (out.size() == 1) return;
  out[1] = 2.0 * lambda * t;
  for (std::size_t j = 2; j < out.size(); ++j) {
    const double jd = static_cast<double>(j);
    out[j] = (2.0 * (lambda + jd - 1) * t * out[j - 1] - (2.0 * lambda + jd - 2) * out[j - 2]) / jd;
  }
}

double gegenbauer_at_one(int k, double lambda) {
  if (k < 0) throw std::invalid_argument("gegenbauer_at_one: negative degree");
  require_lambda(lambda);
  return std::exp(log_gamma(k + 2.0 * lambda) - log_gamma(2.0 * lambda) - log_gamma(k + 1.0));
}

double gegenbauer_norm_sq(int k, double lambda) {
  if (k < 0) throw std::invalid_argument("gegenbauer_norm_sq: negative degree");
  require_lambda(lambda);
  const double log_h = std::log(std::numbers::pi) + (1.0 - 2.0 * lambda) * std::numbers::ln2 +
                       log_gamma(k + 2.0 * lambda) - log_gamma(k + 1.0) - std::log(k + lambda) -
                       2.0 * log_gamma(lambda);
  return std::exp(log_h);
}

double gegenbauer_derivative(int k, double lambda, double t) {
  if (k == 0) {
    require_lambda(lambda);
    return 0.0;
  }
  return 2.0 * lambda * gegenbauer(k - 1, lambda + 1.0, t);
}

double log_gamma(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("log_gamma: argument must be positive");
  if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
  // Lanczos approximation, g = 671/128 with 14 terms.
  static constexpr std::array<double, 14> cof = {
      57.1562356658629235,     -59.5979603554754912,    14.1360979747417471,
      -0.491913816097620199,   .339946499848118887e-4,  .465236289270485756e-4,
      -.983744753048795646e-4, .158088703224912494e-3,  -.210264441724104883e-3,
      .217439618115212643e-3,  -.164318106536763890e-3, .844182239838527433e-4,
      -.261908384015814087e-4, .368991826595316234e-5};
  double y = x;
  double tmp = x + 5.24218750000000000;
  tmp = (x + 0.5) * std::log(tmp) - tmp;
  double ser = 0.999999999999997092;
  for (double c : cof) ser += c / ++y;
  return tmp + std::log(2.5066282746310005 * ser / x);
}

SignedLogGamma signed_log_gamma(double x) {
  if (std::isnan(x)) throw std::invalid_argument("signed_log_gamma: NaN argument");
  if (x > 0.0) return {log_gamma(x), 1};
  if (x == std::floor(x)) return {std::numeric_limits<double>::infinity(), 0};
  // Gamma(x) = pi / (sin(pi x) Gamma(1 - x)), with 1 - x > 1.
  const double s = sin_pi(x);
  return {std::log(std::numbers::pi) - std::log(std::abs(s)) - log_gamma(1.0 - x), s > 0 ? 1 : -1};
}

double bessel_i(double nu, double x) {
  if (!(nu >= 0.0) || !(x >= 0.0) || !std::isfinite(nu) || std::isnan(x)) {
    throw std::invalid_argument("bessel_i: order and argument must be non-negative");
  }
  if (x == 0.0) return nu == 0.0 ? 1.0 : 0.0;
  if (x > 15.0) {
    const double v = bessel_i_large_x(nu, x);
    if (std::isfinite(v)) return v;
  }
  return bessel_i_series(nu, x);
}

JacobiRule gauss_jacobi(int order, double alpha, double beta) {
  if (order < 1) throw std::invalid_argument("gauss_jacobi: order must be >= 1");
  if (!(alpha > -1.0) || !(beta > -1.0)) {
    throw std::invalid_argument("gauss_jacobi: exponents must exceed -1");
  }
  const double ab = alpha + beta;
  auto diag = [&](int k) {
    if (k == 0) return (beta - alpha) / (ab + 2.0);
    const double s = 2.0 * k + ab;
    return (beta * beta - alpha * alpha) / (s * (s + 2.0));
  };
  auto offdiag = [&](int k) {  // k >= 1
    if (k == 1) return std::sqrt(4.0 * (1.0 + alpha) * (1.0 + beta) / ((2.0 + ab) * (2.0 + ab) * (3.0 + ab)));
    const double s = 2.0 * k + ab;
    return std::sqrt(4.0 * k * (k + alpha) * (k + beta) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0)));
  };
  const double log_mu0 = (ab + 1.0) * std::numbers::ln2 + log_gamma(alpha + 1.0) +
                         log_gamma(beta + 1.0) - log_gamma(ab + 2.0);
  const double p0 = std::exp(-0.5 * log_mu0);

  Eigen::VectorXd d(order);
  Eigen::VectorXd e(std::max(order - 1, 0));
  for (int k = 0; k < order; ++k) d[k] = diag(k);
  for (int k = 1; k < order; ++k) e[k - 1] = offdiag(k);

  std::vector<double> nodes(order);
  if (order == 1) {
    nodes[0] = d[0];
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
    solver.computeFromTridiagonal(d, e, Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success) throw std::runtime_error("gauss_jacobi: eigenvalue solve failed");
    for (int i = 0; i < order; ++i) nodes[i] = solver.eigenvalues()[i];
  }
  std::sort(nodes.begin(), nodes.end());

  // Orthonormal recurrence: b_{k+1} p_{k+1} = (t - a_k) p_k - b_k p_{k-1}.
  // Returns p_M, p_M' and sum_{j<M} p_j^2 at t.
  struct Eval {
    double pm, dpm, sum_sq;
  };
  auto evaluate = [&](double t) {
    double p_prev = 0.0, p = p0, dp_prev = 0.0, dp = 0.0, sum_sq = 0.0;
    double b_k = 0.0;
    for (int k = 0; k < order; ++k) {
      sum_sq += p * p;
      const double b_next = offdiag(k + 1);
      const double p_next = ((t - diag(k)) * p - b_k * p_prev) / b_next;
      const double dp_next = (p + (t - diag(k)) * dp - b_k * dp_prev) / b_next;
      p_prev = p;
      p = p_next;
      dp_prev = dp;
      dp = dp_next;
      b_k = b_next;
    }
    return Eval{p, dp, sum_sq};
  };

  JacobiRule rule{alpha, beta, {}, {}};
  rule.nodes.resize(order);
  rule.weights.resize(order);
  for (int i = 0; i < order; ++i) {
    double t = nodes[i];
    for (int it = 0; it < 2; ++it) {
      const Eval ev = evaluate(t);
      if (ev.dpm == 0.0) break;
      const double step = ev.pm / ev.dpm;
      if (!std::isfinite(step) || std::abs(step) > 1e-6) break;
      t -= step;
    }
    rule.nodes[i] = t;
    rule.weights[i] = 1.0 / evaluate(t).sum_sq;
  }
  return rule;
}

QuadratureRule gauss_jacobi_rule(int n, int order) {
  if (n < 3) throw std::invalid_argument("gauss_jacobi_rule: sphere dimension must be >= 3");
  if (order < 1) throw std::invalid_argument("gauss_jacobi_rule: order must be >= 1");
  const double a = 0.5 * (n - 3);
  JacobiRule jr = gauss_jacobi(order, a, a);
  // The weight is symmetric; enforce exact node antisymmetry and weight symmetry.
  for (int i = 0; i < order / 2; ++i) {
    const int j = order - 1 - i;
    const double t = 0.5 * (jr.nodes[j] - jr.nodes[i]);
    const double w = 0.5 * (jr.weights[i] + jr.weights[j]);
    jr.nodes[i] = -t;
    jr.nodes[j] = t;
    jr.weights[i] = jr.weights[j] = w;
  }
  if (order % 2 == 1) jr.nodes[order / 2] = 0.0;
  return QuadratureRule{n, std::move(jr.nodes), std::move(jr.weights)};
}

}  // namespace sphere_mv::specfun
