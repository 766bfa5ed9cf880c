// Special functions and Gauss-Jacobi quadrature used by the zonal transforms.
//
// Everything here is a pure function of its arguments. Inputs outside the
// documented domain raise std::invalid_argument.

#pragma once

#include <span>
#include <vector>

namespace sphere_mv::specfun {

/// Gegenbauer polynomial C_k^lambda(t) by upward three-term recurrence.
double gegenbauer(int k, double lambda, double t);

/// Fills out[j] = C_j^lambda(t) for j = 0 .. out.size()-1.
void gegenbauer_all(double lambda, double t, std::span<double> out);

/// C_k^lambda(1) = Gamma(k + 2 lambda) / (Gamma(2 lambda) k!).
double gegenbauer_at_one(int k, double lambda);

/// Integral of [C_k^lambda(t)]^2 (1 - t^2)^(lambda - 1/2) over [-1, 1].
double gegenbauer_norm_sq(int k, double lambda);

/// Derivative d/dt C_k^lambda(t) = 2 lambda C_{k-1}^{lambda+1}(t).
double gegenbauer_derivative(int k, double lambda, double t);

double log_gamma(double x);

/// |Gamma(x)| in log space with the sign kept separately. Valid on the whole
/// real line; at the poles x = 0, -1, -2, ... sign is 0 (1/Gamma vanishes).
struct SignedLogGamma {
  double log_abs = 0.0;
  int sign = 1;
};
SignedLogGamma signed_log_gamma(double x);

/// Modified Bessel function of the first kind I_nu(x), nu >= 0, x >= 0.
double bessel_i(double nu, double x);

/// Gauss rule for the sphere marginal weight (1 - t^2)^((n-3)/2) on [-1, 1].
struct QuadratureRule {
  int n = 3;
  std::vector<double> nodes;
  std::vector<double> weights;

  [[nodiscard]] int order() const { return static_cast<int>(nodes.size()); }
  [[nodiscard]] double exponent() const { return 0.5 * (n - 3); }
};

/// Nodes and weights of the order-M Gauss rule for (1 - t)^alpha (1 + t)^beta.
/// Nodes come from the eigenvalues of the Jacobi matrix; weights from the
/// Christoffel numbers of the orthonormal recurrence.
struct JacobiRule {
  double alpha = 0.0;
  double beta = 0.0;
  std::vector<double> nodes;
  std::vector<double> weights;
};
JacobiRule gauss_jacobi(int order, double alpha, double beta);

QuadratureRule gauss_jacobi_rule(int n, int order);

}  // namespace sphere_mv::specfun
