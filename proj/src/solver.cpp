#include "sphere_mv/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

#include "sphere_mv/parallel.hpp"

namespace sphere_mv {

void SolverConfig::validate() const {
  if (!(tau > 0.0 && tau <= 1.0)) throw std::invalid_argument("solver: damping tau must lie in (0, 1]");
  if (!(tol > 0.0)) throw std::invalid_argument("solver: tolerance must be positive");
  if (max_iters < 1) throw std::invalid_argument("solver: max_iters must be >= 1");
  if (K < 1) throw std::invalid_argument("solver: truncation K must be >= 1");
  if (M < K + 2) throw std::invalid_argument("solver: quadrature order M must be >= K + 2");
  if (!(seed_amplitude > 0.0) || !std::isfinite(seed_amplitude)) {
    throw std::invalid_argument("solver: seed amplitude must be positive");
  }
}

// ---------------------------------------------------------------------------
// Gibbs map

GibbsMap::GibbsMap(ZonalCoefficients kernel, TransformPtr transform)
    : kernel_(std::move(kernel)), transform_(std::move(transform)) {
  if (!transform_) throw std::invalid_argument("GibbsMap: null transform");
  if (kernel_.n != transform_->n()) throw std::invalid_argument("GibbsMap: dimension mismatch");
  if (kernel_.truncation() < transform_->truncation()) {
    throw std::invalid_argument("GibbsMap: kernel truncation below the transform truncation");
  }
  omega_n_ = omega(kernel_.n);
  omega_lat_ = omega(kernel_.n - 1);
}

std::vector<double> GibbsMap::potential(const std::vector<double>& rho) const {
  std::vector<double> c = transform_->decompose(rho);
  for (std::size_t k = 0; k < c.size(); ++k) c[k] *= omega_n_ * kernel_[k];
  return transform_->reconstruct(c);
}

std::vector<double> GibbsMap::boltzmann(const std::vector<double>& phi, double gamma) const {
  const double lo = *std::min_element(phi.begin(), phi.end());
  const auto& w = transform_->rule()->weights;
  std::vector<double> g(phi.size());
  double z = 0.0;
  for (std::size_t i = 0; i < phi.size(); ++i) {
    g[i] = std::exp(-gamma * (phi[i] - lo));
    z += w[i] * g[i];
  }
  z *= omega_lat_;
  for (double& v : g) v /= z;
  return g;
}

std::vector<double> GibbsMap::apply(const std::vector<double>& rho, double gamma) const {
  return boltzmann(potential(rho), gamma);
}

double GibbsMap::distance(const std::vector<double>& rho, const std::vector<double>& g) const {
  std::vector<double> d(rho.size());
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double e = omega_n_ * (rho[i] - g[i]);
    d[i] = e * e;
  }
  return std::sqrt(std::max(0.0, transform_->average(d)));
}

double GibbsMap::amplitude(const std::vector<double>& rho, int k) const {
  const auto& r = *transform_->rule();
  double s = 0.0;
  for (int i = 0; i < r.order(); ++i) s += r.weights[i] * rho[i] * zonal_harmonic(k, r.n, r.nodes[i]);
  return omega_lat_ * s;
}

namespace {

double max_mode_amplitude(const ZonalDensity& rho) {
  double m = 0.0;
  for (int k = 1; k <= rho.truncation(); ++k) m = std::max(m, std::abs(rho.coeffs().normalized(k)));
  return omega(rho.n()) * m;
}

constexpr double kCollapseAmplitude = 1e-6;

}  // namespace

FixedPoint gibbs_fixed_point(const ZonalCoefficients& kernel, double gamma, const ZonalDensity& init,
                             const SolverConfig& config) {
  config.validate();
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("solver: gamma must be positive");
  const GibbsMap G(kernel, init.transform());

  std::vector<double> rho = init.values();
  std::vector<double> best = rho;
  double best_r = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  std::string diagnostic;
  for (int it = 0; it <= config.max_iters; ++it) {
    const std::vector<double> g = G.apply(rho, gamma);
    const double r = G.distance(rho, g);
    if (!std::isfinite(r)) {
      diagnostic = "non-finite residual at iteration " + std::to_string(it);
      break;
    }
    if (r < best_r) {
      best_r = r;
      best = rho;
      iterations = it;
    }
    if (r <= config.tol) {
      converged = true;
      break;
    }
    if (it == config.max_iters) break;
    for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = (1.0 - config.tau) * rho[i] + config.tau * g[i];
  }
  if (!converged && diagnostic.empty()) {
    std::ostringstream os;
    os << "no convergence after " << config.max_iters << " iterations; best residual " << best_r;
    diagnostic = os.str();
  }

  ZonalDensity out = ZonalDensity::normalized(init.transform(), std::move(best));
  const double r_out = residual(kernel, gamma, out);
  if (converged) {
    const double f_seed = free_energy(kernel, init, gamma).free_energy;
    const double f_out = free_energy(kernel, out, gamma).free_energy;
    if (std::isfinite(f_seed) && f_out > f_seed + 1e-12 * std::max(1.0, std::abs(f_seed))) {
      std::ostringstream os;
      os << "free energy increased from the seed (" << f_seed << " -> " << f_out << ")";
      diagnostic = os.str();
    }
  }
  return FixedPoint{std::move(out), iterations, r_out, converged, diagnostic};
}

double residual(const ZonalCoefficients& kernel, double gamma, const ZonalDensity& rho) {
  if (!(gamma > 0.0)) throw std::invalid_argument("residual: gamma must be positive");
  const GibbsMap G(kernel, rho.transform());
  return G.distance(rho.values(), G.apply(rho.values(), gamma));
}

BifurcationSet bifurcation_points(const ZonalCoefficients& kernel) {
  BifurcationSet out;
  const int K = kernel.truncation();
  std::vector<bool> grouped(K + 1, false);
  bool any = false;
  for (int k = 1; k <= K; ++k) {
    if (!(kernel[k] < -kStabilityTolerance)) continue;
    any = true;
    if (grouped[k]) continue;
    std::vector<int> group{k};
    for (int j = k + 1; j <= K; ++j) {
      if (std::abs(kernel[j] - kernel[k]) <= kTieTolerance * std::abs(kernel[k])) group.push_back(j);
    }
    if (group.size() == 1) {
      out.points.push_back({k, -1.0 / kernel[k]});
    } else {
      for (int j : group) grouped[j] = true;
      out.ties.push_back(std::move(group));
    }
  }
  if (!any) throw std::domain_error("no instability: kernel has no negative coefficient with k >= 1");
  std::stable_sort(out.points.begin(), out.points.end(),
                   [](const Bifurcation& a, const Bifurcation& b) { return a.gamma < b.gamma; });
  return out;
}

// ---------------------------------------------------------------------------
// Branch tracing with the mode amplitude held fixed.

namespace {

class PinnedSolver {
 public:
  PinnedSolver(const GibbsMap& G, int k, const SolverConfig& config) : G_(G), config_(config) {
    const auto& r = *G.transform()->rule();
    const double lat = omega(r.n - 1);
    y_.resize(r.order());
    q_.resize(r.order());
    for (int i = 0; i < r.order(); ++i) {
      y_[i] = zonal_harmonic(k, r.n, r.nodes[i]);
      q_[i] = lat * r.weights[i];
    }
    inner_tol_ = 0.01 * config.tol;
  }

  struct State {
    std::vector<double> rho;
    double gamma = 0.0;
    double amplitude = 0.0;
    int iterations = 0;
    bool ok = false;
  };

  // Fixed point of rho -> G_{gamma(rho)}(rho) where gamma(rho) gives the
  // image mode-k amplitude `a`.
  State solve(double a, std::vector<double> rho, double gamma) const {
    State s;
    for (int it = 0; it < config_.max_iters; ++it) {
      const std::vector<double> phi = G_.potential(rho);
      const auto g_opt = solve_gamma(phi, a, gamma);
      if (!g_opt) return s;
      gamma = *g_opt;
      const std::vector<double> g = G_.boltzmann(phi, gamma);
      const double r = G_.distance(rho, g);
      if (!std::isfinite(r)) return s;
      if (r <= inner_tol_) {
        s.rho = std::move(rho);
        s.gamma = gamma;
        s.amplitude = a;
        s.iterations = it;
        s.ok = true;
        return s;
      }
      for (std::size_t i = 0; i < rho.size(); ++i) rho[i] = (1.0 - config_.tau) * rho[i] + config_.tau * g[i];
    }
    return s;
  }

 private:
  // Newton on gamma for E_{G_gamma}[Y_k] = a with the potential frozen.
  std::optional<double> solve_gamma(const std::vector<double>& phi, double a, double gamma) const {
    const double lo = *std::min_element(phi.begin(), phi.end());
    auto moments = [&](double g, double& f, double& df) {
      double z = 0.0, ey = 0.0, ep = 0.0, eyp = 0.0;
      for (std::size_t i = 0; i < phi.size(); ++i) {
        const double p = phi[i] - lo;
        const double e = q_[i] * std::exp(-g * p);
        z += e;
        ey += e * y_[i];
        ep += e * p;
        eyp += e * y_[i] * p;
      }
      ey /= z;
      ep /= z;
      eyp /= z;
      f = ey - a;
      df = -(eyp - ey * ep);
    };
    double f = 0.0, df = 0.0;
    moments(gamma, f, df);
    for (int it = 0; it < 100; ++it) {
      if (std::abs(f) <= 1e-15) return gamma;
      if (df == 0.0 || !std::isfinite(df)) return std::nullopt;
      double step = -f / df;
      // Backtrack until |f| decreases and gamma stays positive.
      bool accepted = false;
      for (int h = 0; h < 60; ++h) {
        const double trial = gamma + step;
        if (trial > 0.0) {
          double ft = 0.0, dft = 0.0;
          moments(trial, ft, dft);
          if (std::isfinite(ft) && std::abs(ft) < std::abs(f)) {
            gamma = trial;
            f = ft;
            df = dft;
            accepted = true;
            break;
          }
        }
        step *= 0.5;
      }
      if (!accepted) return std::abs(f) <= 1e-13 ? std::optional<double>(gamma) : std::nullopt;
    }
    return std::abs(f) <= 1e-13 ? std::optional<double>(gamma) : std::nullopt;
  }

  const GibbsMap& G_;
  const SolverConfig& config_;
  std::vector<double> y_;
  std::vector<double> q_;
  double inner_tol_ = 0.0;
};

std::vector<double> seeded_values(const TransformPtr& T, int k, double a) {
  const int n = T->n();
  const double bar = 1.0 / omega(n);
  std::vector<double> v;
  v.reserve(T->order());
  for (double t : T->rule()->nodes) v.push_back(bar * (1.0 + a * zonal_harmonic(k, n, t)));
  return v;
}

}  // namespace

Branch trace_branch(const ZonalCoefficients& kernel, int k, const std::vector<double>& gammas,
                    const SolverConfig& config) {
  config.validate();
  if (k < 1 || k > std::min(config.K, kernel.truncation())) {
    throw std::invalid_argument("trace_branch: mode outside the truncation");
  }
  if (!(kernel[k] < -kStabilityTolerance)) {
    throw std::domain_error("trace_branch: W_" + std::to_string(k) + " is not negative; no bifurcation");
  }
  const double gamma_k = -1.0 / kernel[k];
  for (std::size_t i = 0; i < gammas.size(); ++i) {
    if (!(gammas[i] > gamma_k) || (i > 0 && !(gammas[i] > gammas[i - 1]))) {
      throw std::invalid_argument("trace_branch: gammas must be increasing and above gamma_k");
    }
  }

  Branch out;
  out.mode = k;
  out.gamma_k = gamma_k;
  out.seed_amplitude = config.seed_amplitude;

  const TransformPtr T = make_transform(kernel.n, config.M, config.K);
  const GibbsMap G(kernel, T);
  const PinnedSolver pinned(G, k, config);

  const double y_max = harmonic_scale(k, kernel.n);  // |Y_k|_inf = Y_k(1)
  const double a0 = config.seed_amplitude;
  if (a0 * y_max >= 1.0) throw std::invalid_argument("trace_branch: seed amplitude makes the seed nonpositive");

  auto plus = pinned.solve(a0, seeded_values(T, k, a0), gamma_k);
  auto minus = pinned.solve(-a0, seeded_values(T, k, -a0), gamma_k);
  const bool plus_up = plus.ok && plus.gamma > gamma_k;
  const bool minus_up = minus.ok && minus.gamma > gamma_k;
  if (!plus_up && !minus_up) {
    out.diagnostic = "no branch found above gamma_k at probe amplitude " + std::to_string(a0);
    return out;
  }
  PinnedSolver::State current =
      (plus_up && (!minus_up || plus.gamma >= minus.gamma)) ? std::move(plus) : std::move(minus);
  out.orientation = current.amplitude > 0 ? 1 : -1;

  // Known (amplitude, gamma) pairs along the branch, in branch order.
  std::vector<std::pair<double, double>> history{{0.0, gamma_k}, {current.amplitude, current.gamma}};
  int spent = current.iterations;

  for (double target : gammas) {
    // Two history points nearest the target by gamma for the initial guess.
    std::size_t j = history.size() - 1;
    for (std::size_t i = 1; i < history.size(); ++i) {
      if (history[i].second >= target) {
        j = i;
        break;
      }
    }
    const auto [a1, g1] = history[j - 1];
    const auto [a2, g2] = history[j];
    double a_prev = a2, g_prev = g2;
    double a_cur = a1 + (target - g1) * (a2 - a1) / (g2 - g1);
    if (std::abs(a_cur - a_prev) < 1e-14) a_cur = a_prev + 1e-3 * out.orientation;

    PinnedSolver::State best;
    double best_err = std::numeric_limits<double>::infinity();
    bool lost = false;
    for (int it = 0; it < 60; ++it) {
      auto s = pinned.solve(a_cur, current.rho, current.gamma);
      if (!s.ok) {
        lost = true;
        break;
      }
      spent += s.iterations;
      const double err = s.gamma - target;
      if (std::abs(err) < best_err) {
        best_err = std::abs(err);
        best = s;
      }
      if (std::abs(err) <= 1e-13 * target) break;
      const double denom = s.gamma - g_prev;
      if (denom == 0.0) break;
      double a_next = a_cur - err * (a_cur - a_prev) / denom;
      const double max_step = 4.0 * std::abs(a_cur - a_prev) + 1e-3;
      a_next = std::clamp(a_next, a_cur - max_step, a_cur + max_step);
      a_prev = a_cur;
      g_prev = s.gamma;
      a_cur = a_next;
      current = std::move(s);
    }
    if (lost || !best.ok) {
      out.diagnostic = "branch lost near gamma = " + std::to_string(target);
      break;
    }

    ZonalDensity rho = ZonalDensity::normalized(T, best.rho);
    const double r = residual(kernel, target, rho);
    if (!(r <= config.tol)) {
      std::ostringstream os;
      os << "residual " << r << " above tolerance at gamma = " << target;
      out.diagnostic = os.str();
      break;
    }
    history.emplace_back(best.amplitude, best.gamma);
    std::sort(history.begin(), history.end(), [&](const auto& x, const auto& y) {
      return x.first * out.orientation < y.first * out.orientation;
    });
    current = best;
    BranchPoint bp{target, rho, k, rho.mode_amplitude(k), rho.dominant_mode(),
                   free_energy(kernel, rho, target), r, spent};
    out.points.push_back(std::move(bp));
    spent = 0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resonance and the cubic competitor

double HarmonicCombination::operator()(int n, double t) const {
  double s = 0.0;
  for (std::size_t j = 0; j < modes.size(); ++j) s += weights[j] * zonal_harmonic(modes[j], n, t);
  return s;
}

std::string HarmonicCombination::describe() const {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t j = 0; j < modes.size(); ++j) {
    if (j) os << " + ";
    os << weights[j] << "*Y_" << modes[j];
  }
  return os.str();
}

namespace {

struct CubeEvaluator {
  int n;
  std::vector<int> modes;
  std::vector<std::vector<double>> at_nodes;  // Y_m at quadrature nodes
  std::vector<std::vector<double>> at_grid;   // Y_m on a dense grid for sup norms
  std::vector<double> q;                      // omega_{n-1} w_i

  CubeEvaluator(int n_, std::vector<int> modes_) : n(n_), modes(std::move(modes_)) {
    const int kmax = *std::max_element(modes.begin(), modes.end());
    const auto rule = specfun::gauss_jacobi_rule(n, 3 * kmax / 2 + 4);
    const double lat = omega(n - 1);
    for (double w : rule.weights) q.push_back(lat * w);
    constexpr int kGrid = 4001;
    for (int m : modes) {
      std::vector<double> a, b;
      for (double t : rule.nodes) a.push_back(zonal_harmonic(m, n, t));
      for (int i = 0; i < kGrid; ++i) b.push_back(zonal_harmonic(m, n, -1.0 + 2.0 * i / (kGrid - 1)));
      at_nodes.push_back(std::move(a));
      at_grid.push_back(std::move(b));
    }
  }

  // Returns (int u^3 dsigma, weights rescaled so |u|_inf = 1).
  std::pair<double, std::vector<double>> evaluate(const std::vector<std::size_t>& idx,
                                                  std::vector<double> w) const {
    double sup = 0.0;
    for (std::size_t i = 0; i < at_grid[0].size(); ++i) {
      double u = 0.0;
      for (std::size_t j = 0; j < idx.size(); ++j) u += w[j] * at_grid[idx[j]][i];
      sup = std::max(sup, std::abs(u));
    }
    if (sup == 0.0) return {0.0, w};
    for (double& v : w) v /= sup;
    double s = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) {
      double u = 0.0;
      for (std::size_t j = 0; j < idx.size(); ++j) u += w[j] * at_nodes[idx[j]][i];
      s += q[i] * u * u * u;
    }
    return {s, w};
  }
};

}  // namespace

ResonanceReport resonance_check(const ZonalCoefficients& kernel, double delta) {
  if (!(delta >= 0.0) || !(delta < 1.0)) throw std::invalid_argument("resonance_check: delta must lie in [0, 1)");
  const SharpPoint sp = gamma_sharp(kernel);
  const int n = kernel.n;
  ResonanceReport rep;
  rep.delta = delta;
  rep.gamma_sharp = sp.gamma;
  const double threshold = -(1.0 - delta) / sp.gamma;
  for (int k = 1; k <= kernel.truncation(); ++k) {
    if (kernel[k] <= threshold * (1.0 - kTieTolerance)) rep.critical_modes.push_back(k);
  }
  // Most negative coefficients first; the pair and triple searches use the leading ones.
  std::vector<int> ordered = rep.critical_modes;
  std::stable_sort(ordered.begin(), ordered.end(), [&](int a, int b) { return kernel[a] < kernel[b]; });
  if (ordered.size() > 12) ordered.resize(12);
  const CubeEvaluator cube(n, ordered);

  double best = 0.0;
  std::vector<std::size_t> best_idx;
  std::vector<double> best_w;
  auto consider = [&](const std::vector<std::size_t>& idx, std::vector<double> w) {
    auto [u3, scaled] = cube.evaluate(idx, std::move(w));
    if (std::abs(u3) > best * (1.0 + 1e-9) + 1e-300) {
      best = std::abs(u3);
      best_idx = idx;
      best_w = std::move(scaled);
    }
  };
  const std::size_t m = ordered.size();
  for (std::size_t a = 0; a < m; ++a) consider({a}, {1.0});
  constexpr int kAngles = 720;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = a + 1; b < m; ++b) {
      for (int i = 1; i < kAngles; ++i) {
        if (i == kAngles / 2) continue;
        const double th = std::numbers::pi * i / kAngles;
        consider({a, b}, {std::cos(th), std::sin(th)});
      }
    }
  }
  const std::size_t m3 = std::min<std::size_t>(m, 6);
  constexpr int kPolar = 48;
  for (std::size_t a = 0; a < m3; ++a) {
    for (std::size_t b = a + 1; b < m3; ++b) {
      for (std::size_t c = b + 1; c < m3; ++c) {
        for (int i = 1; i < kPolar; ++i) {
          const double th = std::numbers::pi * i / kPolar;
          for (int j = 1; j < 2 * kPolar; ++j) {
            if (j == kPolar) continue;
            const double ph = std::numbers::pi * j / kPolar;
            consider({a, b, c}, {std::sin(th) * std::cos(ph), std::sin(th) * std::sin(ph), std::cos(th)});
          }
        }
      }
    }
  }

  if (!best_idx.empty()) {
    for (std::size_t j = 0; j < best_idx.size(); ++j) {
      rep.witness.modes.push_back(ordered[best_idx[j]]);
      rep.witness.weights.push_back(best_w[j]);
    }
    rep.u3_sphere = cube.evaluate(best_idx, best_w).first;
  }
  const double on = omega(n);
  rep.u3_normalized = rep.u3_sphere / on;
  rep.bandwidth_bound = std::min(0.25, rep.u3_normalized * rep.u3_normalized / 49.0);
  rep.satisfied = std::abs(rep.u3_normalized) > 1e-12 && delta < rep.bandwidth_bound;
  return rep;
}

double minimal_bandwidth(const ZonalCoefficients& kernel, int k) {
  if (k < 1 || k > kernel.truncation()) throw std::invalid_argument("minimal_bandwidth: mode outside truncation");
  return std::max(0.0, 1.0 + gamma_sharp(kernel).gamma * kernel[k]);
}

double competitor_epsilon(const ResonanceReport& report, int n) {
  if (report.delta == 0.0) return std::min(0.5, std::abs(report.u3_sphere) / (4.0 * omega(n)));
  return std::sqrt(report.delta);
}

double competitor_energy_gap(const ZonalCoefficients& kernel, const HarmonicCombination& u, double epsilon,
                             double gamma, int order) {
  if (u.modes.empty() || u.modes.size() != u.weights.size()) {
    throw std::invalid_argument("competitor: empty or malformed harmonic combination");
  }
  if (!(gamma > 0.0)) throw std::invalid_argument("competitor: gamma must be positive");
  const int kmax = *std::max_element(u.modes.begin(), u.modes.end());
  if (kmax > kernel.truncation()) throw std::invalid_argument("competitor: mode beyond kernel truncation");
  if (order <= 0) order = std::max(128, 2 * kmax + 8);
  const TransformPtr T = make_transform(kernel.n, order, kmax);

  const auto& r = *T->rule();
  const double lat = omega(kernel.n - 1);
  double u3 = 0.0;
  for (int i = 0; i < r.order(); ++i) {
    const double v = u(kernel.n, r.nodes[i]);
    u3 += lat * r.weights[i] * v * v * v;
  }
  const double xi = u3 >= 0.0 ? 1.0 : -1.0;
  std::vector<double> w = u.weights;
  for (double& v : w) v *= epsilon * xi;
  const ZonalDensity rho = ZonalDensity::perturbed_uniform(T, u.modes, w);
  ZonalCoefficients kc{kernel.n, std::vector<double>(kernel.coeffs.begin(), kernel.coeffs.begin() + kmax + 1)};
  return free_energy_gap(kc, rho, gamma);
}

// ---------------------------------------------------------------------------
// Transition scan

std::string to_string(TransitionType type) {
  switch (type) {
    case TransitionType::discontinuous:
      return "discontinuous";
    case TransitionType::continuous_candidate:
      return "continuous-candidate";
    case TransitionType::none:
      return "none";
  }
  return "none";
}

std::vector<double> default_transition_grid(double gamma_sharp, int points) {
  if (!(gamma_sharp > 0.0) || points < 2) throw std::invalid_argument("transition grid: invalid arguments");
  std::vector<double> g(points);
  const double lo = std::log(0.2 * gamma_sharp);
  const double hi = std::log(gamma_sharp);
  for (int i = 0; i < points; ++i) g[i] = std::exp(lo + (hi - lo) * i / (points - 1));
  g.back() = gamma_sharp;
  return g;
}

namespace {

struct FamilyState {
  std::vector<double> rho;
  double gap = 0.0;
  double amplitude = 0.0;
  int mode = 0;
  double residual = 0.0;
  bool valid = false;
};

struct Family {
  int mode = 0;
  int sign = 1;
  std::vector<FamilyState> states;  // indexed like the grid
  std::string diagnostic;
};

std::optional<FamilyState> certified_state(const ZonalCoefficients& kernel, double gamma, const ZonalDensity& seed,
                                           const SolverConfig& config) {
  const FixedPoint fp = gibbs_fixed_point(kernel, gamma, seed, config);
  if (!fp.converged || max_mode_amplitude(fp.density) < kCollapseAmplitude) return std::nullopt;
  FamilyState s;
  s.gap = free_energy_gap(kernel, fp.density, gamma);
  s.mode = fp.density.dominant_mode();
  s.amplitude = fp.density.mode_amplitude(s.mode);
  s.residual = fp.residual;
  s.rho = fp.density.values();
  s.valid = true;
  return s;
}

}  // namespace

TransitionReport find_transition(const ZonalCoefficients& kernel, const std::vector<double>& gamma_grid,
                                 const SolverConfig& config) {
  config.validate();
  TransitionReport rep;
  SharpPoint sp;
  try {
    sp = gamma_sharp(kernel);
  } catch (const std::domain_error& e) {
    rep.diagnostic = std::string("uniform state is the unique minimizer: ") + e.what();
    return rep;
  }
  rep.gamma_sharp = sp.gamma;
  const std::vector<double> grid = gamma_grid.empty() ? default_transition_grid(sp.gamma) : gamma_grid;
  if (grid.size() < 2) throw std::invalid_argument("find_transition: grid needs at least two points");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] > 0.0) || (i > 0 && !(grid[i] > grid[i - 1]))) {
      throw std::invalid_argument("find_transition: grid must be positive and increasing");
    }
  }

  const TransformPtr T = make_transform(kernel.n, config.M, config.K);
  const ZonalDensity uniform = ZonalDensity::uniform(T);

  // Seed modes: bifurcation and tied modes that go unstable by 1.5 gamma_#.
  std::vector<int> modes = sp.indices;
  try {
    const BifurcationSet bs = bifurcation_points(kernel);
    for (const auto& b : bs.points) {
      if (b.k <= config.K && b.gamma <= 1.5 * sp.gamma) modes.push_back(b.k);
    }
    for (const auto& t : bs.ties) {
      for (int k : t) {
        if (k <= config.K && -1.0 / kernel[k] <= 1.5 * sp.gamma) modes.push_back(k);
      }
    }
  } catch (const std::domain_error&) {
  }
  std::sort(modes.begin(), modes.end());
  modes.erase(std::unique(modes.begin(), modes.end()), modes.end());
  modes.erase(std::remove_if(modes.begin(), modes.end(), [&](int k) { return k > config.K; }), modes.end());
  if (modes.size() > 8) modes.resize(8);

  std::vector<Family> families;
  for (int k : modes) {
    for (int s : {1, -1}) families.push_back({k, s, std::vector<FamilyState>(grid.size()), {}});
  }

  // Each family: solve at the top of the grid, then continue downward until it collapses.
  parallel_for(families.size(), [&](std::size_t f) {
    Family& fam = families[f];
    const double a = 0.9 / harmonic_scale(fam.mode, kernel.n);
    ZonalDensity seed = ZonalDensity::perturbed_uniform(T, {fam.mode}, {fam.sign * a});
    for (std::size_t i = grid.size(); i-- > 0;) {
      auto st = certified_state(kernel, grid[i], seed, config);
      if (!st) {
        if (i + 1 == grid.size()) fam.diagnostic = "seed did not reach a non-uniform fixed point";
        break;
      }
      seed = ZonalDensity::normalized(T, st->rho);
      fam.states[i] = std::move(*st);
    }
  });

  // Cubic competitor when the resonance condition holds at delta = 0.
  std::optional<HarmonicCombination> competitor;
  double comp_eps = 0.0;
  {
    const ResonanceReport rr = resonance_check(kernel, 0.0);
    if (rr.satisfied) {
      competitor = rr.witness;
      comp_eps = competitor_epsilon(rr, kernel.n);
    }
  }
  auto competitor_gap = [&](double g) {
    return competitor ? competitor_energy_gap(kernel, *competitor, comp_eps, g, config.M)
                      : std::numeric_limits<double>::infinity();
  };

  constexpr double kGapTol = -1e-13;
  int first = -1;
  int first_family = -1;
  rep.scan.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    ScanRow row{grid[i], 0.0, "uniform"};
    int best_f = -1;
    for (std::size_t f = 0; f < families.size(); ++f) {
      const auto& st = families[f].states[i];
      if (st.valid && st.gap < row.best_gap) {
        row.best_gap = st.gap;
        best_f = static_cast<int>(f);
        row.source = "branch seeded from " + std::string(families[f].sign > 0 ? "+" : "-") + "Y_" +
                     std::to_string(families[f].mode);
      }
    }
    const double cg = competitor_gap(grid[i]);
    if (cg < row.best_gap) {
      row.best_gap = cg;
      best_f = -1;
      row.source = "competitor";
    }
    if (first < 0 && row.best_gap < kGapTol) {
      first = static_cast<int>(i);
      first_family = best_f;
    }
    rep.scan.push_back(std::move(row));
  }

  const double step = grid.back() - grid[grid.size() - 2];
  if (first >= 0) {
    double lo = first > 0 ? grid[first - 1] : 0.0;
    double hi = grid[first];
    TransitionWitness w;
    w.gamma = hi;
    w.gap = rep.scan[first].best_gap;
    w.description = rep.scan[first].source;
    if (first_family >= 0) {
      const auto& st = families[first_family].states[first];
      w.mode = st.mode;
      w.amplitude = st.amplitude;
      w.residual = st.residual;
      w.certified = true;
      // Bisection on [lo, hi], continuing the certified state downward.
      ZonalDensity seed = ZonalDensity::normalized(T, st.rho);
      while (lo > 0.0 && (hi - lo) > 1e-3 * hi) {
        const double mid = 0.5 * (lo + hi);
        auto s = certified_state(kernel, mid, seed, config);
        if (s && s->gap < kGapTol) {
          hi = mid;
          seed = ZonalDensity::normalized(T, s->rho);
          w.gamma = mid;
          w.gap = s->gap;
          w.mode = s->mode;
          w.amplitude = s->amplitude;
          w.residual = s->residual;
        } else if (competitor_gap(mid) < kGapTol) {
          hi = mid;
        } else {
          lo = mid;
        }
      }
    } else {
      w.mode = competitor ? competitor->modes.front() : 0;
      while (lo > 0.0 && (hi - lo) > 1e-3 * hi) {
        const double mid = 0.5 * (lo + hi);
        const double cg = competitor_gap(mid);
        if (cg < kGapTol) {
          hi = mid;
          w.gamma = mid;
          w.gap = cg;
        } else {
          lo = mid;
        }
      }
    }
    rep.gamma_lo = lo;
    rep.gamma_hi = hi;
    rep.witness = w;
    if (lo == 0.0) rep.diagnostic = "uniform state already beaten at the first grid point";
    if (hi <= sp.gamma - step && w.gap < 0.0) {
      rep.type = TransitionType::discontinuous;
      return rep;
    }
  }

  // No crossing clearly below gamma_#: look for non-uniform minimizers just above it.
  const double probe = sp.gamma * 1.02;
  for (int k : sp.indices) {
    if (k > config.K) continue;
    for (int s : {1, -1}) {
      const ZonalDensity seed = ZonalDensity::perturbed_uniform(
          T, {k}, {s * config.seed_amplitude / harmonic_scale(k, kernel.n)});
      auto st = certified_state(kernel, probe, seed, config);
      if (st && st->gap < kGapTol) {
        rep.type = TransitionType::continuous_candidate;
        if (first < 0) {
          rep.gamma_lo = grid.back();
          rep.gamma_hi = probe;
          rep.witness = TransitionWitness{"branch seeded from " + std::string(s > 0 ? "+" : "-") + "Y_" +
                                              std::to_string(k),
                                          probe, st->gap, st->mode, st->amplitude, st->residual, true};
        }
        return rep;
      }
    }
  }
  if (first >= 0) {
    rep.type = TransitionType::continuous_candidate;
    return rep;
  }
  rep.type = TransitionType::none;
  if (rep.diagnostic.empty()) rep.diagnostic = "no crossing of the uniform free energy found on the grid";
  return rep;
}

}  // namespace sphere_mv
