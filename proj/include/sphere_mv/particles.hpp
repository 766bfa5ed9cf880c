// Interacting particles on S^{n-1} under projected Euler-Maruyama Langevin dynamics
//
//   x <- normalize(x + dt F(x) + sqrt(2 dt / gamma) (xi - <xi, x> x)),
//   F(x) = -(1/N) sum_j W'(<x, x_j>) (x_j - <x, x_j> x).

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "sphere_mv/kernels.hpp"

namespace sphere_mv {

/// Particles sharing one random engine; fixed so results do not depend on threading.
inline constexpr std::size_t kParticleBlock = 64;

struct ParticleEnsemble {
  int n = 3;
  std::vector<double> positions;  // row-major, size() x n
  std::uint64_t seed = 0;
  std::vector<std::mt19937_64> engines;  // one per block of kParticleBlock particles

  [[nodiscard]] std::size_t size() const { return positions.size() / static_cast<std::size_t>(n); }
  [[nodiscard]] std::span<const double> at(std::size_t i) const {
    return {positions.data() + i * static_cast<std::size_t>(n), static_cast<std::size_t>(n)};
  }
};

/// Validates unit norms (to 1e-12 after renormalizing) and seeds the engines.
ParticleEnsemble make_ensemble(int n, std::vector<double> positions, std::uint64_t seed);
ParticleEnsemble uniform_ensemble(int n, std::size_t count, std::uint64_t seed);
/// All particles at `axis`.
ParticleEnsemble polar_ensemble(int n, std::size_t count, std::span<const double> axis, std::uint64_t seed);

enum class ForceMethod { automatic, pairwise, spectral };

struct SimConfig {
  double dt = 1e-3;
  long long steps = 1;
  double gamma = std::numeric_limits<double>::infinity();
  std::uint64_t seed = 0;
  double burn_in = 0.5;
  ForceMethod method = ForceMethod::automatic;
  /// Polynomial degree of the kernel expansion used by the spectral force.
  int degree = 8;
  long long sample_every = 100;
  std::vector<int> degrees{2};
  /// Inner products are clipped to [-1 + clamp, 1 - clamp] where W' is singular.
  double clamp = 1e-9;
  /// Fixed order-parameter axis; estimated from each snapshot when empty.
  std::optional<std::vector<double>> axis;

  void validate() const;
};

/// Exact pairwise force at x. `clamped` counts clipped inner products.
std::vector<double> kernel_force(const KernelSpec& spec, std::span<const double> x, const ParticleEnsemble& ensemble,
                                 std::uint64_t* clamped = nullptr, double clamp = 1e-9);

/// Drift evaluator for a whole ensemble.
///
/// `pairwise` sums W' over all pairs. `spectral` replaces W by its degree-L
/// Gegenbauer truncation. On the sphere that polynomial equals a sum of two
/// bi-homogeneous forms of degrees L and L - 1, so the mean field reduces to
/// the degree-L and degree-(L-1) moments of the ensemble and costs O(N) per
/// step. It is exact for polynomial kernels of degree <= L.
class ForceModel {
 public:
  ForceModel(const KernelSpec& spec, ForceMethod method, int degree, double clamp, std::size_t particles);

  [[nodiscard]] ForceMethod method() const { return method_; }
  [[nodiscard]] int degree() const { return degree_; }
  /// True when the truncated kernel is constant, so the drift vanishes.
  [[nodiscard]] bool zero() const { return zero_; }

  /// forces has size N x n on return. Returns the number of clamped pairs.
  std::uint64_t evaluate(const ParticleEnsemble& ensemble, std::vector<double>& forces) const;

  /// Monomial coefficients b_m of the truncated profile (spectral method).
  [[nodiscard]] const std::vector<double>& profile_monomials() const { return b_; }

  /// One projected Euler-Maruyama step; returns the number of clamped pairs.
  std::uint64_t advance(ParticleEnsemble& ensemble, const SimConfig& config) const;

 private:
  // Monomials given as (variable, exponent) factors with nonzero exponents.
  using Monomial = std::vector<std::pair<int, int>>;

  // Terms b_m t^m with m = D mod 2, written as sum_{a,b} A_ab x^a y^b over |a| = |b| = D.
  struct Piece {
    int degree = 0;
    std::vector<Monomial> top;    // |a| = D
    std::vector<Monomial> lower;  // |g| = D - 1
    std::vector<double> coupling;  // top x top, row-major
    std::vector<int> raise;        // index of g + e_v in top, lower x n
  };

  // Gradient coefficients per piece: lower x n, row-major.
  [[nodiscard]] std::vector<std::vector<double>> gradient_coefficients(const ParticleEnsemble& e) const;
  // Drift for particles [first, first + count) into out (row-major count x n).
  void spectral_block(const ParticleEnsemble& e, std::size_t first, std::size_t count,
                      const std::vector<std::vector<double>>& grad, double* out) const;
  std::uint64_t pairwise_forces(const ParticleEnsemble& e, std::vector<double>& forces) const;

  KernelSpec spec_;
  ForceMethod method_;
  int degree_;
  double clamp_;
  bool zero_ = false;
  int n_ = 3;
  std::vector<double> b_;
  std::vector<Piece> pieces_;
};

/// One step for every particle; returns the number of clamped pairs.
std::uint64_t step(ParticleEnsemble& ensemble, const ForceModel& model, const SimConfig& config);
std::uint64_t step(ParticleEnsemble& ensemble, const KernelSpec& spec, const SimConfig& config);

struct MomentSummary {
  std::vector<int> degrees;
  std::vector<double> mean;
  std::vector<double> std_error;
};

/// Sample means of Y_{l,0}(<axis, x_j>) with standard errors sd / sqrt(N).
MomentSummary empirical_moments(const ParticleEnsemble& ensemble, std::span<const double> axis,
                                const std::vector<int>& degrees);

/// Order-parameter axis. Even: the eigenvector of (1/N) sum x x^T whose
/// eigenvalue is farthest from 1/n. Odd: the normalized mean position.
std::vector<double> estimate_axis(const ParticleEnsemble& ensemble, bool even = true);

struct TrajectoryRow {
  long long step = 0;
  std::vector<double> moments;
};

struct SimulationResult {
  MomentSummary moments;  // time average after burn-in, batch-means standard errors
  std::vector<TrajectoryRow> trajectory;
  std::vector<double> axis;
  std::uint64_t clamped = 0;
  ForceMethod method = ForceMethod::automatic;
  int degree = 0;
  long long samples = 0;
};

SimulationResult simulate(ParticleEnsemble& ensemble, const KernelSpec& spec, const SimConfig& config);

/// Positions as raw little-endian doubles, n per particle.
void write_snapshot(std::ostream& out, const ParticleEnsemble& ensemble);
std::vector<double> read_snapshot(std::istream& in);

}  // namespace sphere_mv
