// Zonal spherical harmonics on S^{n-1}.
//
// A zonal function depends only on t = <axis, x>. Its coefficients follow the
// convention
//
//   g_k = c_{(n-2)/2} * int g(t) C_k(t) / C_k(1) (1 - t^2)^{(n-3)/2} dt,
//   g   = sum_k g_k (2k + n - 2) / (n - 2) C_k(t),
//
// with C_k = C_k^{(n-2)/2}. Inner products are normalized by the sphere area:
// <f, g> = omega_n^{-1} int f g dsigma, and Y_{l,0} = A_l C_l is unit-norm.

#pragma once

#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "sphere_mv/specfun.hpp"

namespace sphere_mv {

using specfun::QuadratureRule;
using RulePtr = std::shared_ptr<const QuadratureRule>;

inline constexpr int kDefaultTruncation = 64;

/// Index lambda = (n - 2) / 2 of the Gegenbauer family on S^{n-1}.
double harmonic_index(int n);

/// Surface measure omega_n = 2 pi^{n/2} / Gamma(n/2) of S^{n-1}; n >= 2.
double omega(int n);

/// c_lambda = Gamma(lambda + 1) / (sqrt(pi) Gamma(lambda + 1/2)).
double c_lambda(double lambda);

/// A_l such that Y_{l,0} = A_l C_l^{(n-2)/2} has unit normalized norm.
double zonal_norm_constant(int l, int n);

/// Y_{l,0}(t).
double zonal_harmonic(int l, int n, double t);

/// Factor s_k with <g, Y_{k,0}> = s_k g_k; equals A_k C_k(1).
double harmonic_scale(int k, int n);

RulePtr make_rule(int n, int order);

struct ZonalCoefficients {
  int n = 3;
  std::vector<double> coeffs;

  [[nodiscard]] int truncation() const { return static_cast<int>(coeffs.size()) - 1; }
  [[nodiscard]] double operator[](std::size_t k) const { return coeffs[k]; }
  /// <g, Y_{k,0}>.
  [[nodiscard]] double normalized(int k) const { return harmonic_scale(k, n) * coeffs.at(k); }
};

/// Samples of a zonal function at the nodes of a quadrature rule.
struct ZonalProfile {
  int n = 3;
  RulePtr rule;
  std::vector<double> values;
};

ZonalProfile sample_profile(const RulePtr& rule, const std::function<double(double)>& g);

/// Requires rule order >= K + 2 and finite values.
ZonalCoefficients decompose(const ZonalProfile& profile, int K);

/// Truncated Gegenbauer series at each point of t_grid (all in [-1, 1]).
std::vector<double> reconstruct(const ZonalCoefficients& coeffs, std::span<const double> t_grid);
double reconstruct_at(const ZonalCoefficients& coeffs, double t);

/// Normalized L2 norm squared, sum_k <g, Y_k>^2.
double coefficient_norm_sq(const ZonalCoefficients& coeffs);

/// int Y_{l,0}^3 in three conventions. `reduced` integrates against
/// (1 - t^2)^{(n-3)/2} dt only (the form of the published l = 2, 4 closed
/// forms); `sphere` is the raw dsigma integral (= omega_{n-1} * reduced);
/// `normalized` uses omega_n^{-1} dsigma.
struct TripleProduct {
  double reduced = 0.0;
  double sphere = 0.0;
  double normalized = 0.0;
};
TripleProduct triple_product_integral(int l, int n);

/// Precomputed Gegenbauer tables for repeated transforms on a fixed rule.
class ZonalTransform {
 public:
  ZonalTransform(RulePtr rule, int truncation);

  [[nodiscard]] int n() const { return rule_->n; }
  [[nodiscard]] int truncation() const { return truncation_; }
  [[nodiscard]] int order() const { return rule_->order(); }
  [[nodiscard]] const RulePtr& rule() const { return rule_; }

  [[nodiscard]] std::vector<double> decompose(std::span<const double> values) const;
  /// Values at the rule nodes of the series with the given coefficients
  /// (entries beyond the truncation are ignored).
  [[nodiscard]] std::vector<double> reconstruct(std::span<const double> coeffs) const;
  /// c * sum_i w_i f(t_i), i.e. the normalized sphere average of a zonal f.
  [[nodiscard]] double average(std::span<const double> values) const;

 private:
  RulePtr rule_;
  int truncation_;
  double c_;
  std::vector<double> ratio_;  // C_k(t_i) / C_k(1), row-major [k][i]
  std::vector<double> synth_;  // (k + lambda)/lambda * C_k(1)
};

}  // namespace sphere_mv
