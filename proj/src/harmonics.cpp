#include "sphere_mv/harmonics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sphere_mv {

namespace {

void require_dimension(int n) {
  if (n < 3) throw std::invalid_argument("sphere dimension must be >= 3, got " + std::to_string(n));
}

}  // namespace

double harmonic_index(int n) {
  require_dimension(n);
  return 0.5 * (n - 2);
}

double omega(int n) {
  if (n < 2) throw std::invalid_argument("omega: n must be >= 2");
  return 2.0 * std::exp(0.5 * n * std::log(std::numbers::pi) - specfun::log_gamma(0.5 * n));
}

double c_lambda(double lambda) {
  if (!(lambda > 0.0)) throw std::invalid_argument("c_lambda: lambda must be positive");
  return std::exp(specfun::log_gamma(lambda + 1.0) - specfun::log_gamma(lambda + 0.5)) /
         std::sqrt(std::numbers::pi);
}

double zonal_norm_constant(int l, int n) {
  if (l < 0) throw std::invalid_argument("zonal_norm_constant: negative degree");
  const double lambda = harmonic_index(n);
  return 1.0 / std::sqrt(c_lambda(lambda) * specfun::gegenbauer_norm_sq(l, lambda));
}

double zonal_harmonic(int l, int n, double t) {
  return zonal_norm_constant(l, n) * specfun::gegenbauer(l, harmonic_index(n), t);
}

double harmonic_scale(int k, int n) {
  const double lambda = harmonic_index(n);
  // A_k^2 C_k(1) = (k + lambda) / lambda, hence A_k C_k(1) = (k + lambda) / (lambda A_k).
  return (k + lambda) / (lambda * zonal_norm_constant(k, n));
}

RulePtr make_rule(int n, int order) {
  return std::make_shared<const QuadratureRule>(specfun::gauss_jacobi_rule(n, order));
}

ZonalProfile sample_profile(const RulePtr& rule, const std::function<double(double)>& g) {
  if (!rule) throw std::invalid_argument("sample_profile: null rule");
  ZonalProfile p{rule->n, rule, {}};
  p.values.reserve(rule->nodes.size());
  for (double t : rule->nodes) p.values.push_back(g(t));
  return p;
}

ZonalCoefficients decompose(const ZonalProfile& profile, int K) {
  if (!profile.rule) throw std::invalid_argument("decompose: profile has no quadrature rule");
  if (K < 0) throw std::invalid_argument("decompose: negative truncation");
  if (profile.rule->order() < K + 2) {
    throw std::invalid_argument("decompose: quadrature order " + std::to_string(profile.rule->order()) +
                                " too small for truncation " + std::to_string(K));
  }
  if (profile.values.size() != profile.rule->nodes.size()) {
    throw std::invalid_argument("decompose: value count does not match the rule order");
  }
  for (double v : profile.values) {
    if (!std::isfinite(v)) throw std::invalid_argument("decompose: non-finite profile value");
  }
  ZonalTransform tr(profile.rule, K);
  return ZonalCoefficients{profile.n, tr.decompose(profile.values)};
}

double reconstruct_at(const ZonalCoefficients& coeffs, double t) {
  if (!(std::abs(t) <= 1.0)) throw std::invalid_argument("reconstruct: point outside [-1, 1]");
  const double lambda = harmonic_index(coeffs.n);
  std::vector<double> c(coeffs.coeffs.size());
  specfun::gegenbauer_all(lambda, t, c);
  double s = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) s += coeffs.coeffs[k] * (k + lambda) / lambda * c[k];
  return s;
}

std::vector<double> reconstruct(const ZonalCoefficients& coeffs, std::span<const double> t_grid) {
  std::vector<double> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) out.push_back(reconstruct_at(coeffs, t));
  return out;
}

double coefficient_norm_sq(const ZonalCoefficients& coeffs) {
  double s = 0.0;
  for (int k = 0; k <= coeffs.truncation(); ++k) {
    const double v = coeffs.normalized(k);
    s += v * v;
  }
  return s;
}

TripleProduct triple_product_integral(int l, int n) {
  if (l < 0) throw std::invalid_argument("triple_product_integral: negative degree");
  require_dimension(n);
  TripleProduct out;
  if (l % 2 == 1) return out;
  const double lambda = harmonic_index(n);
  const auto rule = specfun::gauss_jacobi_rule(n, 3 * l / 2 + 2);
  const double a = zonal_norm_constant(l, n);
  double s = 0.0;
  for (int i = 0; i < rule.order(); ++i) {
    const double y = a * specfun::gegenbauer(l, lambda, rule.nodes[i]);
    s += rule.weights[i] * y * y * y;
  }
  out.reduced = s;
  out.sphere = omega(n - 1) * s;
  out.normalized = c_lambda(lambda) * s;
  return out;
}

ZonalTransform::ZonalTransform(RulePtr rule, int truncation)
    : rule_(std::move(rule)), truncation_(truncation) {
  if (!rule_) throw std::invalid_argument("ZonalTransform: null rule");
  if (truncation_ < 0) throw std::invalid_argument("ZonalTransform: negative truncation");
  const double lambda = harmonic_index(rule_->n);
  c_ = c_lambda(lambda);
  const int m = rule_->order();
  const int kk = truncation_ + 1;
  ratio_.assign(static_cast<std::size_t>(kk) * m, 0.0);
  synth_.resize(kk);
  std::vector<double> at_one(kk);
  for (int k = 0; k < kk; ++k) {
    at_one[k] = specfun::gegenbauer_at_one(k, lambda);
    synth_[k] = (k + lambda) / lambda * at_one[k];
  }
  std::vector<double> c(kk);
  for (int i = 0; i < m; ++i) {
    specfun::gegenbauer_all(lambda, rule_->nodes[i], c);
    for (int k = 0; k < kk; ++k) ratio_[static_cast<std::size_t>(k) * m + i] = c[k] / at_one[k];
  }
}

std::vector<double> ZonalTransform::decompose(std::span<const double> values) const {
  const int m = order();
  if (static_cast<int>(values.size()) != m) throw std::invalid_argument("ZonalTransform: size mismatch");
  std::vector<double> wv(m);
  for (int i = 0; i < m; ++i) wv[i] = rule_->weights[i] * values[i];
  std::vector<double> out(truncation_ + 1);
  for (int k = 0; k <= truncation_; ++k) {
    const double* row = &ratio_[static_cast<std::size_t>(k) * m];
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += row[i] * wv[i];
    out[k] = c_ * s;
  }
  return out;
}

std::vector<double> ZonalTransform::reconstruct(std::span<const double> coeffs) const {
  const int m = order();
  std::vector<double> out(m, 0.0);
  const int kmax = std::min<int>(truncation_, static_cast<int>(coeffs.size()) - 1);
  for (int k = 0; k <= kmax; ++k) {
    const double a = coeffs[k] * synth_[k];
    if (a == 0.0) continue;
    const double* row = &ratio_[static_cast<std::size_t>(k) * m];
    for (int i = 0; i < m; ++i) out[i] += a * row[i];
  }
  return out;
}

double ZonalTransform::average(std::span<const double> values) const {
  double s = 0.0;
  for (int i = 0; i < order(); ++i) s += rule_->weights[i] * values[i];
  return c_ * s;
}

}  // namespace sphere_mv
