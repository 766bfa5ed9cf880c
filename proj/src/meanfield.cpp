#include "sphere_mv/meanfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sphere_mv {

TransformPtr make_transform(int n, int order, int K) {
  if (order < K + 2) {
    throw std::invalid_argument("quadrature order M = " + std::to_string(order) +
                                " must be at least K + 2 = " + std::to_string(K + 2));
  }
  return std::make_shared<const ZonalTransform>(make_rule(n, order), K);
}

double mass(const QuadratureRule& rule, const std::vector<double>& values) {
  double s = 0.0;
  for (int i = 0; i < rule.order(); ++i) s += rule.weights[i] * values[i];
  return omega(rule.n - 1) * s;
}

ZonalDensity::ZonalDensity(TransformPtr transform, std::vector<double> values)
    : transform_(std::move(transform)), values_(std::move(values)) {
  if (!transform_) throw std::invalid_argument("ZonalDensity: null transform");
  if (static_cast<int>(values_.size()) != transform_->order()) {
    throw std::invalid_argument("ZonalDensity: value count does not match the quadrature order");
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("ZonalDensity: values must be finite and nonnegative");
  }
  const double m = mass(*transform_->rule(), values_);
  if (std::abs(m - 1.0) > kMassTolerance) {
    throw std::invalid_argument("ZonalDensity: mass " + std::to_string(m) + " differs from 1");
  }
  coeffs_ = ZonalCoefficients{transform_->n(), transform_->decompose(values_)};
}

ZonalDensity ZonalDensity::uniform(TransformPtr transform) {
  if (!transform) throw std::invalid_argument("ZonalDensity: null transform");
  const int m = transform->order();
  const double v = 1.0 / omega(transform->n());
  return normalized(std::move(transform), std::vector<double>(m, v));
}

ZonalDensity ZonalDensity::normalized(TransformPtr transform, std::vector<double> values) {
  if (!transform) throw std::invalid_argument("ZonalDensity: null transform");
  if (static_cast<int>(values.size()) != transform->order()) {
    throw std::invalid_argument("ZonalDensity: value count does not match the quadrature order");
  }
  for (double v : values) {
    if (!std::isfinite(v) || v < 0.0) throw std::invalid_argument("ZonalDensity: values must be finite and nonnegative");
  }
  const double m = mass(*transform->rule(), values);
  if (!(m > 0.0)) throw std::invalid_argument("ZonalDensity: zero mass");
  for (double& v : values) v /= m;
  return ZonalDensity(std::move(transform), std::move(values));
}

ZonalDensity ZonalDensity::from_function(TransformPtr transform, const std::function<double(double)>& rho) {
  if (!transform) throw std::invalid_argument("ZonalDensity: null transform");
  std::vector<double> v;
  v.reserve(transform->order());
  for (double t : transform->rule()->nodes) v.push_back(rho(t));
  return normalized(std::move(transform), std::move(v));
}

ZonalDensity ZonalDensity::perturbed_uniform(TransformPtr transform, const std::vector<int>& modes,
                                             const std::vector<double>& weights) {
  if (!transform) throw std::invalid_argument("ZonalDensity: null transform");
  if (modes.size() != weights.size()) throw std::invalid_argument("perturbed_uniform: size mismatch");
  const int n = transform->n();
  const double rho_bar = 1.0 / omega(n);
  std::vector<double> v;
  v.reserve(transform->order());
  for (double t : transform->rule()->nodes) {
    double u = 1.0;
    for (std::size_t j = 0; j < modes.size(); ++j) u += weights[j] * zonal_harmonic(modes[j], n, t);
    if (!(u > 0.0)) throw std::invalid_argument("perturbed_uniform: perturbation makes the density nonpositive");
    v.push_back(rho_bar * u);
  }
  return normalized(std::move(transform), std::move(v));
}

double ZonalDensity::mode_amplitude(int k) const {
  if (k < 0 || k > truncation()) throw std::out_of_range("mode_amplitude: degree outside truncation");
  return omega(n()) * coeffs_.normalized(k);
}

int ZonalDensity::dominant_mode() const {
  int best = 1;
  double best_abs = -1.0;
  for (int k = 1; k <= truncation(); ++k) {
    const double a = std::abs(coeffs_.normalized(k));
    if (a > best_abs) {
      best_abs = a;
      best = k;
    }
  }
  return best;
}

namespace {

void require_match(const ZonalCoefficients& kernel, const ZonalDensity& rho) {
  if (kernel.n != rho.n()) {
    throw std::invalid_argument("dimension mismatch: kernel n = " + std::to_string(kernel.n) +
                                ", density n = " + std::to_string(rho.n()));
  }
  if (kernel.truncation() < rho.truncation()) {
    throw std::invalid_argument("kernel truncation is below the density truncation");
  }
}

}  // namespace

ZonalProfile convolve(const ZonalCoefficients& kernel, const ZonalDensity& rho) {
  require_match(kernel, rho);
  const double w = omega(rho.n());
  const auto& rc = rho.coeffs().coeffs;
  std::vector<double> c(rc.size());
  for (std::size_t p = 0; p < rc.size(); ++p) c[p] = w * kernel[p] * rc[p];
  return ZonalProfile{rho.n(), rho.rule(), rho.transform()->reconstruct(c)};
}

double entropy(const ZonalDensity& rho) {
  const double w = omega(rho.n());
  const auto& v = rho.values();
  std::vector<double> f(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0)) return std::numeric_limits<double>::infinity();
    const double r = w * v[i];
    f[i] = r * std::log(r);
  }
  return rho.transform()->average(f);
}

double interaction_energy(const ZonalCoefficients& kernel, const ZonalDensity& rho) {
  require_match(kernel, rho);
  const double w = omega(rho.n());
  double s = 0.0;
  for (int k = 0; k <= rho.truncation(); ++k) {
    const double a = rho.coeffs().normalized(k);
    s += kernel[k] * a * a;
  }
  return 0.5 * w * w * s;
}

EnergyReport free_energy(const ZonalCoefficients& kernel, const ZonalDensity& rho, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("free_energy: gamma must be positive");
  EnergyReport r;
  r.gamma = gamma;
  r.entropy = entropy(rho);
  r.interaction = interaction_energy(kernel, rho);
  r.free_energy = r.entropy / gamma + r.interaction;
  return r;
}

double free_energy_gap(const ZonalCoefficients& kernel, const ZonalDensity& rho, double gamma) {
  if (!(gamma > 0.0)) throw std::invalid_argument("free_energy_gap: gamma must be positive");
  require_match(kernel, rho);
  const double w = omega(rho.n());
  double s = 0.0;
  for (int k = 1; k <= rho.truncation(); ++k) {
    const double a = rho.coeffs().normalized(k);
    s += kernel[k] * a * a;
  }
  // Zero-mode term vanishes at unit mass; kept for densities normalized only to 1e-10.
  const double a0 = rho.coeffs()[0];
  const double bar = 1.0 / w;
  s += kernel[0] * (a0 - bar) * (a0 + bar);
  return entropy(rho) / gamma + 0.5 * w * w * s;
}

StabilitySpectrum linear_spectrum(const ZonalCoefficients& kernel, double gamma, int L) {
  if (!(gamma > 0.0)) throw std::invalid_argument("linear_spectrum: gamma must be positive");
  if (L < 0 || L > kernel.truncation()) throw std::invalid_argument("linear_spectrum: L exceeds truncation");
  StabilitySpectrum s{gamma, std::vector<double>(L + 1, 0.0)};
  for (int l = 1; l <= L; ++l) {
    s.eigenvalues[l] = -static_cast<double>(l) * (kernel.n + l - 2) * (1.0 + gamma * kernel[l]);
  }
  return s;
}

SharpPoint gamma_sharp(const ZonalCoefficients& kernel) {
  double min_w = 0.0;
  for (int k = 1; k <= kernel.truncation(); ++k) min_w = std::min(min_w, kernel[k]);
  if (!(min_w < -kStabilityTolerance)) throw std::domain_error("no instability: no negative coefficient with k >= 1");
  SharpPoint sp{-1.0 / min_w, {}};
  const double tol = kTieTolerance * std::abs(min_w);
  for (int k = 1; k <= kernel.truncation(); ++k) {
    if (kernel[k] - min_w <= tol) sp.indices.push_back(k);
  }
  return sp;
}

}  // namespace sphere_mv
