// Axially symmetric densities, spherical convolution and free energy.
//
// Densities are taken w.r.t. the un-normalized surface measure, so the
// uniform state is 1 / omega_n.

#pragma once

#include <memory>
#include <vector>

#include "sphere_mv/harmonics.hpp"
#include "sphere_mv/kernels.hpp"

namespace sphere_mv {

using TransformPtr = std::shared_ptr<const ZonalTransform>;

TransformPtr make_transform(int n, int order, int K);

class ZonalDensity {
 public:
  inline static constexpr double kMassTolerance = 1e-10;

  /// Validates nonnegativity and unit mass.
  ZonalDensity(TransformPtr transform, std::vector<double> values);

  static ZonalDensity uniform(TransformPtr transform);
  /// Rescales `values` to unit mass; they must be nonnegative with positive mass.
  static ZonalDensity normalized(TransformPtr transform, std::vector<double> values);
  /// Samples rho(t) at the nodes and normalizes.
  static ZonalDensity from_function(TransformPtr transform, const std::function<double(double)>& rho);
  /// rho_bar (1 + sum_j weights[j] Y_{modes[j],0}), which has unit mass whenever it is nonnegative.
  static ZonalDensity perturbed_uniform(TransformPtr transform, const std::vector<int>& modes,
                                        const std::vector<double>& weights);

  [[nodiscard]] int n() const { return transform_->n(); }
  [[nodiscard]] const TransformPtr& transform() const { return transform_; }
  [[nodiscard]] const RulePtr& rule() const { return transform_->rule(); }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }
  [[nodiscard]] const ZonalCoefficients& coeffs() const { return coeffs_; }
  [[nodiscard]] int truncation() const { return transform_->truncation(); }

  /// E_rho[Y_{k,0}] = <rho / rho_bar - 1, Y_{k,0}> for k >= 1.
  [[nodiscard]] double mode_amplitude(int k) const;
  /// Degree l >= 1 with the largest |mode_amplitude|.
  [[nodiscard]] int dominant_mode() const;

 private:
  TransformPtr transform_;
  std::vector<double> values_;
  ZonalCoefficients coeffs_;
};

/// omega_{n-1} sum_i w_i rho(t_i).
double mass(const QuadratureRule& rule, const std::vector<double>& values);

/// W * rho on the node grid; coefficients omega_n W_p rho_p.
ZonalProfile convolve(const ZonalCoefficients& kernel, const ZonalDensity& rho);

/// Relative entropy w.r.t. the normalized measure; +inf if rho <= 0 at a node.
double entropy(const ZonalDensity& rho);

/// 1/2 int int W(<x,y>) rho(x) rho(y), evaluated spectrally.
double interaction_energy(const ZonalCoefficients& kernel, const ZonalDensity& rho);

struct EnergyReport {
  double entropy = 0.0;
  double interaction = 0.0;
  double free_energy = 0.0;
  double gamma = 0.0;
};

/// F = entropy / gamma + interaction.
EnergyReport free_energy(const ZonalCoefficients& kernel, const ZonalDensity& rho, double gamma);

/// F(rho) - F(uniform), summed over k >= 1 so the W_0 terms cancel exactly.
double free_energy_gap(const ZonalCoefficients& kernel, const ZonalDensity& rho, double gamma);

struct StabilitySpectrum {
  double gamma = 0.0;
  std::vector<double> eigenvalues;
};

/// lambda_l = -l (n + l - 2)(1 + gamma W_l), l = 0 .. L.
StabilitySpectrum linear_spectrum(const ZonalCoefficients& kernel, double gamma, int L);

struct SharpPoint {
  double gamma = 0.0;
  std::vector<int> indices;
};

/// Relative tolerance for treating two coefficients as tied.
inline constexpr double kTieTolerance = 1e-12;

/// gamma_# = -1 / min_{k >= 1} W_k with every minimizing index.
/// Throws std::domain_error if no W_k with k >= 1 is negative.
SharpPoint gamma_sharp(const ZonalCoefficients& kernel);

}  // namespace sphere_mv
