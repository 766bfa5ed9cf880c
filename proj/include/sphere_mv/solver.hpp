// Stationary states: Gibbs-map fixed points, branches and transition scans.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sphere_mv/meanfield.hpp"

namespace sphere_mv {

struct SolverConfig {
  double tau = 0.5;
  double tol = 1e-10;
  int max_iters = 20000;
  int K = kDefaultTruncation;
  int M = 128;
  /// Amplitude of the Y_{k,0} probe used to start a branch.
  double seed_amplitude = 0.05;

  /// Throws std::invalid_argument if a field is out of range.
  void validate() const;
};

/// The map rho -> exp(-gamma W * rho) / Z on a fixed grid.
class GibbsMap {
 public:
  GibbsMap(ZonalCoefficients kernel, TransformPtr transform);

  [[nodiscard]] const TransformPtr& transform() const { return transform_; }
  [[nodiscard]] const ZonalCoefficients& kernel() const { return kernel_; }

  /// W * rho at the nodes.
  [[nodiscard]] std::vector<double> potential(const std::vector<double>& rho) const;
  /// Normalized exp(-gamma phi), with the extremum of phi subtracted first.
  [[nodiscard]] std::vector<double> boltzmann(const std::vector<double>& phi, double gamma) const;
  [[nodiscard]] std::vector<double> apply(const std::vector<double>& rho, double gamma) const;
  /// Normalized L2 norm of omega_n (rho - g).
  [[nodiscard]] double distance(const std::vector<double>& rho, const std::vector<double>& g) const;
  /// E_rho[Y_{k,0}].
  [[nodiscard]] double amplitude(const std::vector<double>& rho, int k) const;

 private:
  ZonalCoefficients kernel_;
  TransformPtr transform_;
  double omega_n_;
  double omega_lat_;
};

struct FixedPoint {
  ZonalDensity density;
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  std::string diagnostic;
};

/// Damped Picard iteration rho <- (1 - tau) rho + tau G(rho). On
/// non-convergence the best iterate is returned with converged = false.
FixedPoint gibbs_fixed_point(const ZonalCoefficients& kernel, double gamma, const ZonalDensity& init,
                             const SolverConfig& config);

/// ||rho - G(rho)|| in the normalized norm, scaled by omega_n.
double residual(const ZonalCoefficients& kernel, double gamma, const ZonalDensity& rho);

struct Bifurcation {
  int k = 0;
  double gamma = 0.0;
};

struct BifurcationSet {
  std::vector<Bifurcation> points;  // sorted by gamma
  /// Groups of degrees whose negative coefficients coincide; excluded from `points`.
  std::vector<std::vector<int>> ties;
};

/// gamma_k = -1 / W_k for each unique negative W_k, k >= 1.
/// Throws std::domain_error for a kernel without negative modes.
BifurcationSet bifurcation_points(const ZonalCoefficients& kernel);

struct BranchPoint {
  double gamma = 0.0;
  ZonalDensity density;
  int mode = 0;             // traced degree k
  double amplitude = 0.0;   // E[Y_{k,0}]
  int dominant_mode = 0;
  EnergyReport energy;
  double residual = 0.0;
  int iterations = 0;
};

struct Branch {
  int mode = 0;
  double gamma_k = 0.0;
  double seed_amplitude = 0.0;
  /// Sign of the mode amplitude on the traced side.
  int orientation = 0;
  std::vector<BranchPoint> points;
  std::string diagnostic;
};

/// Traces the branch leaving (gamma_k, uniform) into gamma > gamma_k.
///
/// The mode-k amplitude is held fixed while gamma is solved for, which keeps
/// unstable branches reachable; a secant in the amplitude then lands on each
/// requested gamma. Gammas must be increasing and above gamma_k.
Branch trace_branch(const ZonalCoefficients& kernel, int k, const std::vector<double>& gammas,
                    const SolverConfig& config);

/// u = sum_j weights[j] Y_{modes[j],0}.
struct HarmonicCombination {
  std::vector<int> modes;
  std::vector<double> weights;

  [[nodiscard]] double operator()(int n, double t) const;
  [[nodiscard]] std::string describe() const;
};

struct ResonanceReport {
  bool satisfied = false;
  double delta = 0.0;
  double gamma_sharp = 0.0;
  std::vector<int> critical_modes;
  HarmonicCombination witness;
  /// int u^3 dsigma over S^{n-1}, and the same divided by omega_n.
  double u3_sphere = 0.0;
  double u3_normalized = 0.0;
  /// min(1/4, (u3_sphere / omega_n)^2 / 49).
  double bandwidth_bound = 0.0;
  std::string convention = "u3_sphere in raw dsigma; bound uses u3_sphere / omega_n";
};

/// Searches single modes, pairs and triples from {k : W_k <= -(1 - delta) / gamma_#}
/// for the u with |u|_inf = 1 maximizing |int u^3|.
ResonanceReport resonance_check(const ZonalCoefficients& kernel, double delta);

/// Smallest delta for which mode k enters the critical set: 1 + gamma_# W_k.
double minimal_bandwidth(const ZonalCoefficients& kernel, int k);

/// epsilon prescribed for the competitor: min(1/2, |U3| / (4 omega_n)) at delta = 0, sqrt(delta) otherwise.
double competitor_epsilon(const ResonanceReport& report, int n);

/// F(rho_bar (1 + epsilon xi u)) - F(rho_bar) with xi = sign(int u^3).
double competitor_energy_gap(const ZonalCoefficients& kernel, const HarmonicCombination& u, double epsilon,
                             double gamma, int order = 0);

enum class TransitionType { discontinuous, continuous_candidate, none };
std::string to_string(TransitionType type);

struct ScanRow {
  double gamma = 0.0;
  double best_gap = 0.0;  // min over candidates of F - F(uniform); 0 means uniform wins
  std::string source;
};

struct TransitionWitness {
  std::string description;
  double gamma = 0.0;
  double gap = 0.0;
  int mode = 0;
  double amplitude = 0.0;
  double residual = 0.0;
  bool certified = false;  // a converged fixed point rather than the competitor
};

struct TransitionReport {
  double gamma_sharp = 0.0;
  double gamma_lo = 0.0;
  double gamma_hi = 0.0;
  TransitionType type = TransitionType::none;
  std::optional<TransitionWitness> witness;
  std::vector<ScanRow> scan;
  std::string diagnostic;
};

/// Default scan grid: 200 log-spaced points on [0.2 gamma_#, gamma_#].
std::vector<double> default_transition_grid(double gamma_sharp, int points = 200);

/// Minimum-energy scan over uniform, continued branches seeded from the
/// critical modes, and the cubic competitor. An empty grid selects the default.
TransitionReport find_transition(const ZonalCoefficients& kernel, const std::vector<double>& gamma_grid,
                                 const SolverConfig& config);

}  // namespace sphere_mv
