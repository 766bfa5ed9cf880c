// Rotationally symmetric interaction kernels W(<x, y>) on S^{n-1}.

#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "sphere_mv/harmonics.hpp"

namespace sphere_mv {

/// W(t) = -exp(beta t) / beta.
struct Transformer {
  double beta = 1.0;
};

/// W(t) = sqrt(1 - t^2).
struct Onsager {};

/// W(t) = -(1 + t)^p.
struct Opinion {
  double p = 1.0;
};

/// W = minus the heat kernel of S^{n-1} at time epsilon.
struct HeatLocalized {
  double epsilon = 0.1;
};

/// Bounds on sup|W'|, sup|W''| and |W'(+-1)| used by the convexity threshold.
struct DerivativeBounds {
  double first = 0.0;
  double second = 0.0;
  double endpoint = 0.0;
};

/// A user-supplied profile g : [-1, 1] -> R.
class CustomProfile {
 public:
  enum class Interpolation { linear, polynomial };

  static CustomProfile from_function(std::function<double(double)> g,
                                     std::function<double(double)> dg = {});
  /// Sample table (t_j, g_j) with strictly increasing t_j in [-1, 1].
  static CustomProfile from_table(std::vector<double> t, std::vector<double> g,
                                  Interpolation mode = Interpolation::polynomial);
  /// g(t) = sum_m a_m t^m.
  static CustomProfile from_polynomial(std::vector<double> monomials);

  [[nodiscard]] double value(double t) const { return value_(t); }
  [[nodiscard]] double derivative(double t) const;

  std::optional<DerivativeBounds> bounds;
  /// JSON text describing the source; empty for function-backed profiles.
  std::string source;

 private:
  std::function<double(double)> value_;
  std::function<double(double)> derivative_;
};

using KernelFamily = std::variant<Transformer, Onsager, Opinion, HeatLocalized, CustomProfile>;

struct KernelSpec {
  int n = 3;
  KernelFamily family;

  [[nodiscard]] std::string family_name() const;
  [[nodiscard]] bool is_custom() const { return std::holds_alternative<CustomProfile>(family); }
  /// W(t).
  [[nodiscard]] double value(double t) const;
  /// W'(t); infinite where the family has a derivative singularity.
  [[nodiscard]] double derivative(double t) const;
};

/// Throws std::invalid_argument on non-positive parameters or n < 3.
void validate(const KernelSpec& spec);

/// Closed-form coefficients for the named families. Gamma ratios are
/// evaluated in log space; poles of Gamma in a denominator give exactly zero.
/// Ill-conditioned near-pole evaluations append a message to `warnings`.
ZonalCoefficients closed_form_coefficients(const KernelSpec& spec, int K,
                                           std::vector<std::string>* warnings = nullptr);

/// Coefficients by Gauss-Jacobi quadrature. Endpoint factors of the named
/// families ((1-t^2)^{1/2} for Onsager, (1+t)^p for Opinion) are folded into
/// the Jacobi weight. `order` <= 0 picks a default.
ZonalCoefficients quadrature_coefficients(const KernelSpec& spec, int K, int order = 0);

/// Closed form for named families, quadrature for custom profiles.
ZonalCoefficients coefficients(const KernelSpec& spec, int K);

struct Stability {
  bool stable = true;
  int first_negative = -1;
};

inline constexpr double kStabilityTolerance = 1e-12;

/// Stable iff every W_k >= -1e-12.
Stability stability_check(const ZonalCoefficients& coeffs);

/// gamma_o = (n - 2) / (4 C) below which the free energy is geodesically
/// convex; nullopt when a derivative of W is unbounded or unknown.
std::optional<double> convexity_threshold(const KernelSpec& spec);

}  // namespace sphere_mv
