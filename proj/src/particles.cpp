#include "sphere_mv/particles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>

#include <Eigen/Eigenvalues>
#include <boost/random/normal_distribution.hpp>

#include "sphere_mv/harmonics.hpp"
#include "sphere_mv/parallel.hpp"

namespace sphere_mv {

namespace {

std::mt19937_64 block_engine(std::uint64_t seed, std::uint64_t block) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

std::mt19937_64 init_engine(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xffffffffu, 0x1a1au};
  return std::mt19937_64(seq);
}

std::size_t block_count(std::size_t particles) { return (particles + kParticleBlock - 1) / kParticleBlock; }

// Per-thread scratch reused across blocks and steps.
struct Scratch {
  std::vector<double> xs, table, grad, local;
};
Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

// Loads particles [first, first + count) as n rows of kParticleBlock, zero-padded.
void load_block(const ParticleEnsemble& e, std::size_t first, std::size_t count, std::vector<double>& xs) {
  constexpr std::size_t B = kParticleBlock;
  const int n = e.n;
  xs.resize(static_cast<std::size_t>(n) * B);
  for (int v = 0; v < n; ++v) {
    double* row = xs.data() + static_cast<std::size_t>(v) * B;
    for (std::size_t p = 0; p < count; ++p) row[p] = e.positions[(first + p) * n + v];
    for (std::size_t p = count; p < B; ++p) row[p] = 0.0;
  }
}

void require_unit(std::span<const double> x, const char* what) {
  double s = 0.0;
  for (double v : x) s += v * v;
  if (!(std::abs(std::sqrt(s) - 1.0) <= 1e-10)) throw std::invalid_argument(std::string(what) + " must be a unit vector");
}

bool singular_derivative(const KernelSpec& spec) { return std::holds_alternative<Onsager>(spec.family); }

}  // namespace

ParticleEnsemble make_ensemble(int n, std::vector<double> positions, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("ensemble: ambient dimension must be >= 2");
  if (positions.empty() || positions.size() % static_cast<std::size_t>(n) != 0) {
    throw std::invalid_argument("ensemble: position count must be a positive multiple of n");
  }
  const std::size_t count = positions.size() / n;
  for (std::size_t i = 0; i < count; ++i) {
    double* x = positions.data() + i * n;
    double s = 0.0;
    for (int v = 0; v < n; ++v) s += x[v] * x[v];
    s = std::sqrt(s);
    if (!(s > 0.0) || !std::isfinite(s)) throw std::invalid_argument("ensemble: zero or non-finite position");
    for (int v = 0; v < n; ++v) x[v] /= s;
  }
  ParticleEnsemble e;
  e.n = n;
  e.positions = std::move(positions);
  e.seed = seed;
  const std::size_t blocks = block_count(count);
  e.engines.reserve(blocks);
  for (std::size_t b = 0; b < blocks; ++b) e.engines.push_back(block_engine(seed, b));
  return e;
}

ParticleEnsemble uniform_ensemble(int n, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("ensemble: empty");
  auto eng = init_engine(seed);
  boost::random::normal_distribution<double> nd;
  std::vector<double> p(count * n);
  for (std::size_t i = 0; i < count; ++i) {
    double s = 0.0;
    do {
      s = 0.0;
      for (int v = 0; v < n; ++v) {
        p[i * n + v] = nd(eng);
        s += p[i * n + v] * p[i * n + v];
      }
    } while (s == 0.0);
  }
  return make_ensemble(n, std::move(p), seed);
}

ParticleEnsemble polar_ensemble(int n, std::size_t count, std::span<const double> axis, std::uint64_t seed) {
  if (count == 0) throw std::invalid_argument("ensemble: empty");
  if (static_cast<int>(axis.size()) != n) throw std::invalid_argument("ensemble: axis has the wrong dimension");
  require_unit(axis, "axis");
  std::vector<double> p;
  p.reserve(count * n);
  for (std::size_t i = 0; i < count; ++i) p.insert(p.end(), axis.begin(), axis.end());
  return make_ensemble(n, std::move(p), seed);
}

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw std::invalid_argument("simulate: dt must be positive");
  if (steps < 1) throw std::invalid_argument("simulate: steps must be >= 1");
  if (!(gamma > 0.0)) throw std::invalid_argument("simulate: gamma must be positive (infinity allowed)");
  if (!(burn_in >= 0.0 && burn_in < 1.0)) throw std::invalid_argument("simulate: burn_in must lie in [0, 1)");
  if (degree < 1 || degree > 40) throw std::invalid_argument("simulate: force degree must lie in [1, 40]");
  if (sample_every < 1) throw std::invalid_argument("simulate: sample_every must be >= 1");
  for (int l : degrees) {
    if (l < 0) throw std::invalid_argument("simulate: moment degrees must be nonnegative");
  }
  if (!(clamp > 0.0 && clamp < 0.5)) throw std::invalid_argument("simulate: clamp must lie in (0, 0.5)");
}

std::vector<double> kernel_force(const KernelSpec& spec, std::span<const double> x, const ParticleEnsemble& ensemble,
                                 std::uint64_t* clamped, double clamp) {
  const int n = ensemble.n;
  if (static_cast<int>(x.size()) != n) throw std::invalid_argument("kernel_force: dimension mismatch");
  if (ensemble.size() == 0) throw std::invalid_argument("kernel_force: empty ensemble");
  require_unit(x, "kernel_force: x");
  const bool singular = singular_derivative(spec);
  std::vector<double> f(n, 0.0);
  for (std::size_t j = 0; j < ensemble.size(); ++j) {
    const auto y = ensemble.at(j);
    double t = 0.0;
    for (int v = 0; v < n; ++v) t += x[v] * y[v];
    double d;
    const double tc = std::clamp(t, -1.0 + clamp, 1.0 - clamp);
    if (singular && tc != t) {
      d = spec.derivative(tc);
      if (clamped) ++*clamped;
    } else {
      d = spec.derivative(t);
      if (!std::isfinite(d)) {
        d = spec.derivative(tc);
        if (clamped) ++*clamped;
      }
    }
    for (int v = 0; v < n; ++v) f[v] -= d * (y[v] - t * x[v]);
  }
  const double inv = 1.0 / static_cast<double>(ensemble.size());
  double dot = 0.0;
  for (int v = 0; v < n; ++v) {
    f[v] *= inv;
    dot += f[v] * x[v];
  }
  for (int v = 0; v < n; ++v) f[v] -= dot * x[v];
  return f;
}

// ---------------------------------------------------------------------------

namespace {

// Exponent vectors with |alpha| = d in n variables.
std::vector<std::vector<int>> homogeneous(int n, int d) {
  std::vector<std::vector<int>> out;
  std::vector<int> e(n, 0);
  auto rec = [&](auto&& self, int v, int left) -> void {
    if (v == n - 1) {
      e[v] = left;
      out.push_back(e);
      return;
    }
    for (int k = left; k >= 0; --k) {
      e[v] = k;
      self(self, v + 1, left - k);
    }
  };
  if (d >= 0) rec(rec, 0, d);
  return out;
}

double multinomial(const std::vector<int>& e, const std::vector<double>& factorial) {
  int m = 0;
  double r = 1.0;
  for (int k : e) {
    m += k;
    r /= factorial[k];
  }
  return r * factorial[m];
}

std::size_t binomial(int a, int b) {
  if (b < 0 || b > a) return 0;
  double r = 1.0;
  for (int i = 1; i <= b; ++i) r = r * (a - b + i) / i;
  return static_cast<std::size_t>(std::llround(r));
}

constexpr std::size_t kMaxPieceMonomials = 3000;

}  // namespace

ForceModel::ForceModel(const KernelSpec& spec, ForceMethod method, int degree, double clamp, std::size_t particles)
    : spec_(spec), method_(method), degree_(degree), clamp_(clamp), n_(spec.n) {
  validate(spec);
  if (degree < 1) throw std::invalid_argument("force model: degree must be >= 1");

  const std::size_t largest = binomial(degree + n_ - 1, n_ - 1);
  if (method_ == ForceMethod::automatic) {
    method_ = (particles > 2000 && largest <= 2000) ? ForceMethod::spectral : ForceMethod::pairwise;
  }
  if (method_ == ForceMethod::pairwise) return;
  if (largest > kMaxPieceMonomials) throw std::invalid_argument("force model: too many monomials for the spectral force");

  // Truncated profile sum_k W_k (k + lambda)/lambda C_k(t) in the monomial basis.
  const double lambda = harmonic_index(n_);
  const ZonalCoefficients w = coefficients(spec, degree);
  std::vector<std::vector<double>> c(degree + 1, std::vector<double>(degree + 1, 0.0));
  c[0][0] = 1.0;
  if (degree >= 1) c[1][1] = 2.0 * lambda;
  for (int j = 2; j <= degree; ++j) {
    for (int m = 0; m <= j; ++m) {
      const double up = m > 0 ? 2.0 * (lambda + j - 1) * c[j - 1][m - 1] : 0.0;
      c[j][m] = (up - (2.0 * lambda + j - 2) * c[j - 2][m]) / j;
    }
  }
  // Quadrature noise in vanishing coefficients would otherwise switch on spurious moments.
  double wmax = 0.0;
  for (int k = 0; k <= degree; ++k) wmax = std::max(wmax, std::abs(w[k]));
  b_.assign(degree + 1, 0.0);
  for (int k = 0; k <= degree; ++k) {
    if (std::abs(w[k]) <= 1e-13 * wmax) continue;
    const double a = w[k] * (k + lambda) / lambda;
    for (int m = 0; m <= k; ++m) b_[m] += a * c[k][m];
  }
  double scale = 0.0;
  for (double v : b_) scale = std::max(scale, std::abs(v));
  for (double& v : b_) {
    if (std::abs(v) <= 1e-13 * scale) v = 0.0;
  }

  std::vector<double> factorial(degree + 1, 1.0);
  for (int m = 1; m <= degree; ++m) factorial[m] = factorial[m - 1] * m;
  auto sparse = [](const std::vector<int>& e) {
    Monomial f;
    for (int v = 0; v < static_cast<int>(e.size()); ++v) {
      if (e[v] > 0) f.emplace_back(v, e[v]);
    }
    return f;
  };

  // On the sphere t^m = (x.y)^m |x|^{2r} |y|^{2r} with D = m + 2r; b_0 only shifts the potential.
  for (int D = degree; D >= std::max(1, degree - 1); --D) {
    bool active = false;
    for (int m = D; m >= 1; m -= 2) active = active || b_[m] != 0.0;
    if (!active) continue;
    Piece piece;
    piece.degree = D;
    const auto top = homogeneous(n_, D);
    const auto lower = homogeneous(n_, D - 1);
    std::map<std::vector<int>, int> index;
    for (std::size_t i = 0; i < top.size(); ++i) index[top[i]] = static_cast<int>(i);
    const std::size_t T = top.size();
    piece.coupling.assign(T * T, 0.0);
    for (int m = D; m >= 1; m -= 2) {
      if (b_[m] == 0.0) continue;
      const auto halves = homogeneous(n_, (D - m) / 2);
      for (const auto& g : homogeneous(n_, m)) {
        const double cg = b_[m] * multinomial(g, factorial);
        for (const auto& d : halves) {
          auto al = g;
          for (int v = 0; v < n_; ++v) al[v] += 2 * d[v];
          const int ia = index.at(al);
          const double cd = cg * multinomial(d, factorial);
          for (const auto& f : halves) {
            auto be = g;
            for (int v = 0; v < n_; ++v) be[v] += 2 * f[v];
            piece.coupling[ia * T + index.at(be)] += cd * multinomial(f, factorial);
          }
        }
      }
    }
    for (const auto& e : top) piece.top.push_back(sparse(e));
    for (const auto& e : lower) {
      piece.lower.push_back(sparse(e));
      for (int v = 0; v < n_; ++v) {
        auto up = e;
        ++up[v];
        piece.raise.push_back(index.at(up));
      }
    }
    pieces_.push_back(std::move(piece));
  }
  zero_ = pieces_.empty();
}

namespace {

// Rows pw[v * (L + 1) + k] = x_v^k for a block of kParticleBlock lanes.
void block_powers(const double* xs, int n, int L, std::vector<double>& pw) {
  constexpr std::size_t B = kParticleBlock;
  pw.resize(static_cast<std::size_t>(n) * (L + 1) * B);
  for (int v = 0; v < n; ++v) {
    double* base = pw.data() + static_cast<std::size_t>(v) * (L + 1) * B;
    const double* __restrict x = xs + static_cast<std::size_t>(v) * B;
    for (std::size_t p = 0; p < B; ++p) base[p] = 1.0;
    for (int k = 1; k <= L; ++k) {
      const double* __restrict prev = base + static_cast<std::size_t>(k - 1) * B;
      double* __restrict cur = base + static_cast<std::size_t>(k) * B;
      for (std::size_t p = 0; p < B; ++p) cur[p] = prev[p] * x[p];
    }
  }
}

void monomial_row(const std::vector<std::pair<int, int>>& mono, const double* pw, int L, double* __restrict out) {
  constexpr std::size_t B = kParticleBlock;
  auto row = [&](const std::pair<int, int>& f) {
    return pw + (static_cast<std::size_t>(f.first) * (L + 1) + f.second) * B;
  };
  if (mono.empty()) {
    for (std::size_t p = 0; p < B; ++p) out[p] = 1.0;
    return;
  }
  const double* __restrict r0 = row(mono[0]);
  if (mono.size() == 1) {
    for (std::size_t p = 0; p < B; ++p) out[p] = r0[p];
    return;
  }
  const double* __restrict r1 = row(mono[1]);
  for (std::size_t p = 0; p < B; ++p) out[p] = r0[p] * r1[p];
  for (std::size_t f = 2; f < mono.size(); ++f) {
    const double* __restrict rf = row(mono[f]);
    for (std::size_t p = 0; p < B; ++p) out[p] *= rf[p];
  }
}

}  // namespace

std::vector<std::vector<double>> ForceModel::gradient_coefficients(const ParticleEnsemble& e) const {
  constexpr std::size_t B = kParticleBlock;
  const std::size_t N = e.size();
  const std::size_t blocks = block_count(N);
  std::size_t total = 0;
  for (const auto& pc : pieces_) total += pc.top.size();
  std::vector<double> partial(blocks * total, 0.0);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t first = b * B;
    Scratch& sc = scratch();
    load_block(e, first, std::min(B, N - first), sc.xs);
    block_powers(sc.xs.data(), n_, degree_, sc.table);
    sc.grad.resize(B);
    std::size_t j = 0;
    for (const auto& pc : pieces_) {
      for (const auto& mono : pc.top) {
        // Padding lanes are zero and every monomial here has positive degree.
        monomial_row(mono, sc.table.data(), degree_, sc.grad.data());
        double s = 0.0;
        for (std::size_t p = 0; p < B; ++p) s += sc.grad[p];
        partial[b * total + j++] = s;
      }
    }
  });
  std::vector<double> moments(total, 0.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t j = 0; j < total; ++j) moments[j] += partial[b * total + j];
  }
  for (double& v : moments) v /= static_cast<double>(N);

  std::vector<std::vector<double>> grad;
  std::size_t offset = 0;
  for (const auto& pc : pieces_) {
    const std::size_t T = pc.top.size();
    std::vector<double> coef(T, 0.0);
    for (std::size_t a = 0; a < T; ++a) {
      double s = 0.0;
      for (std::size_t q = 0; q < T; ++q) s += pc.coupling[a * T + q] * moments[offset + q];
      coef[a] = s;
    }
    offset += T;
    std::vector<double> g(pc.lower.size() * n_, 0.0);
    for (std::size_t l = 0; l < pc.lower.size(); ++l) {
      for (int v = 0; v < n_; ++v) {
        int ev = 1;
        for (const auto& [var, k] : pc.lower[l]) {
          if (var == v) ev = k + 1;
        }
        g[l * n_ + v] = ev * coef[pc.raise[l * n_ + v]];
      }
    }
    grad.push_back(std::move(g));
  }
  return grad;
}

void ForceModel::spectral_block(const ParticleEnsemble& e, std::size_t first, std::size_t count,
                                const std::vector<std::vector<double>>& grad, double* out) const {
  constexpr std::size_t B = kParticleBlock;
  Scratch& sc = scratch();
  load_block(e, first, count, sc.xs);
  block_powers(sc.xs.data(), n_, degree_, sc.table);
  sc.grad.assign(static_cast<std::size_t>(n_ + 1) * B, 0.0);
  double* __restrict row = sc.grad.data() + static_cast<std::size_t>(n_) * B;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const auto& pc = pieces_[i];
    const auto& gc = grad[i];
    for (std::size_t l = 0; l < pc.lower.size(); ++l) {
      monomial_row(pc.lower[l], sc.table.data(), degree_, row);
      for (int v = 0; v < n_; ++v) {
        const double c = gc[l * n_ + v];
        if (c == 0.0) continue;
        double* __restrict g = sc.grad.data() + static_cast<std::size_t>(v) * B;
        for (std::size_t p = 0; p < B; ++p) g[p] += c * row[p];
      }
    }
  }
  // Drift is minus the tangential part of the Euclidean gradient.
  const auto& xs = sc.xs;
  const auto& g = sc.grad;
  for (std::size_t p = 0; p < count; ++p) {
    double dot = 0.0;
    for (int v = 0; v < n_; ++v) dot += g[v * B + p] * xs[v * B + p];
    for (int v = 0; v < n_; ++v) out[p * n_ + v] = -(g[v * B + p] - dot * xs[v * B + p]);
  }
}

std::uint64_t ForceModel::pairwise_forces(const ParticleEnsemble& e, std::vector<double>& forces) const {
  const std::size_t N = e.size();
  const bool singular = singular_derivative(spec_);
  forces.assign(N * n_, 0.0);
  const std::size_t blocks = block_count(N);
  std::vector<std::uint64_t> clamped(blocks, 0);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t end = std::min(N, (b + 1) * kParticleBlock);
    for (std::size_t i = b * kParticleBlock; i < end; ++i) {
      const double* x = e.positions.data() + i * n_;
      double* f = forces.data() + i * n_;
      for (std::size_t j = 0; j < N; ++j) {
        if (j == i) continue;
        const double* y = e.positions.data() + j * n_;
        double t = 0.0;
        for (int v = 0; v < n_; ++v) t += x[v] * y[v];
        const double tc = std::clamp(t, -1.0 + clamp_, 1.0 - clamp_);
        double d;
        if (singular && tc != t) {
          d = spec_.derivative(tc);
          ++clamped[b];
        } else {
          d = spec_.derivative(t);
          if (!std::isfinite(d)) {
            d = spec_.derivative(tc);
            ++clamped[b];
          }
        }
        for (int v = 0; v < n_; ++v) f[v] -= d * (y[v] - t * x[v]);
      }
      double dot = 0.0;
      for (int v = 0; v < n_; ++v) {
        f[v] /= static_cast<double>(N);
        dot += f[v] * x[v];
      }
      for (int v = 0; v < n_; ++v) f[v] -= dot * x[v];
    }
  });
  std::uint64_t total = 0;
  for (auto c : clamped) total += c;
  return total;
}

std::uint64_t ForceModel::evaluate(const ParticleEnsemble& e, std::vector<double>& forces) const {
  if (e.n != n_) throw std::invalid_argument("force model: dimension mismatch");
  const std::size_t N = e.size();
  if (method_ == ForceMethod::pairwise) return pairwise_forces(e, forces);
  forces.assign(N * n_, 0.0);
  if (zero_) return 0;
  const auto grad = gradient_coefficients(e);
  parallel_for(block_count(N), [&](std::size_t b) {
    const std::size_t first = b * kParticleBlock;
    spectral_block(e, first, std::min(kParticleBlock, N - first), grad, forces.data() + first * n_);
  });
  return 0;
}

std::uint64_t ForceModel::advance(ParticleEnsemble& e, const SimConfig& config) const {
  if (e.n != n_) throw std::invalid_argument("step: dimension mismatch");
  const std::size_t N = e.size();
  const std::size_t blocks = block_count(N);
  if (e.engines.size() != blocks) throw std::invalid_argument("step: ensemble engines do not match its size");
  const double dt = config.dt;
  const double sigma = std::isinf(config.gamma) ? 0.0 : std::sqrt(2.0 * dt / config.gamma);

  std::uint64_t clamped = 0;
  std::vector<double> forces;
  std::vector<std::vector<double>> grad;
  const bool spectral = method_ == ForceMethod::spectral;
  if (!spectral) {
    clamped = pairwise_forces(e, forces);
  } else if (!zero_) {
    grad = gradient_coefficients(e);
  }
  // Moments and pairwise forces above read the old positions; updates below
  // touch only each block's own particles.
  std::vector<int> failed(blocks, 0);
  parallel_for(blocks, [&](std::size_t b) {
    const std::size_t first = b * kParticleBlock;
    const std::size_t count = std::min(kParticleBlock, N - first);
    std::vector<double>& local = scratch().local;
    const double* f = nullptr;
    if (spectral) {
      local.assign(count * n_, 0.0);
      if (!zero_) spectral_block(e, first, count, grad, local.data());
      f = local.data();
    } else {
      f = forces.data() + first * n_;
    }
    auto& eng = e.engines[b];
    boost::random::normal_distribution<double> nd;
    std::vector<double> xi(n_);
    for (std::size_t p = 0; p < count; ++p) {
      double* x = e.positions.data() + (first + p) * n_;
      double dot = 0.0;
      if (sigma > 0.0) {
        for (int v = 0; v < n_; ++v) {
          xi[v] = nd(eng);
          dot += xi[v] * x[v];
        }
      }
      bool moved = sigma > 0.0;
      for (int v = 0; v < n_; ++v) moved = moved || f[p * n_ + v] != 0.0;
      if (!moved) continue;  // renormalizing would perturb x in the last bit
      double s = 0.0;
      for (int v = 0; v < n_; ++v) {
        double y = x[v] + dt * f[p * n_ + v];
        if (sigma > 0.0) y += sigma * (xi[v] - dot * x[v]);
        xi[v] = y;
        s += y * y;
      }
      s = std::sqrt(s);
      if (!(s > 1e-300) || !std::isfinite(s)) {
        failed[b] = 1;
        continue;
      }
      for (int v = 0; v < n_; ++v) x[v] = xi[v] / s;
    }
  });
  if (std::any_of(failed.begin(), failed.end(), [](int v) { return v != 0; })) {
    throw std::runtime_error("step: a particle update vanished or overflowed; reduce dt");
  }
  return clamped;
}

std::uint64_t step(ParticleEnsemble& ensemble, const ForceModel& model, const SimConfig& config) {
  config.validate();
  return model.advance(ensemble, config);
}

std::uint64_t step(ParticleEnsemble& ensemble, const KernelSpec& spec, const SimConfig& config) {
  config.validate();
  const ForceModel model(spec, config.method, config.degree, config.clamp, ensemble.size());
  return model.advance(ensemble, config);
}

// ---------------------------------------------------------------------------

MomentSummary empirical_moments(const ParticleEnsemble& ensemble, std::span<const double> axis,
                                const std::vector<int>& degrees) {
  const std::size_t N = ensemble.size();
  if (N == 0) throw std::invalid_argument("empirical_moments: empty ensemble");
  if (static_cast<int>(axis.size()) != ensemble.n) throw std::invalid_argument("empirical_moments: axis dimension");
  require_unit(axis, "empirical_moments: axis");
  const int n = ensemble.n;
  const double lambda = harmonic_index(n);
  MomentSummary out{degrees, {}, {}};
  int lmax = 0;
  for (int l : degrees) {
    if (l < 0) throw std::invalid_argument("empirical_moments: negative degree");
    lmax = std::max(lmax, l);
  }
  std::vector<double> a(lmax + 1);
  for (int l = 0; l <= lmax; ++l) a[l] = zonal_norm_constant(l, n);
  std::vector<double> sum(degrees.size(), 0.0), sum_sq(degrees.size(), 0.0);
  std::vector<double> c(lmax + 1);
  for (std::size_t j = 0; j < N; ++j) {
    const auto x = ensemble.at(j);
    double t = 0.0;
    for (int v = 0; v < n; ++v) t += axis[v] * x[v];
    specfun::gegenbauer_all(lambda, std::clamp(t, -1.0, 1.0), c);
    for (std::size_t d = 0; d < degrees.size(); ++d) {
      const double y = a[degrees[d]] * c[degrees[d]];
      sum[d] += y;
      sum_sq[d] += y * y;
    }
  }
  for (std::size_t d = 0; d < degrees.size(); ++d) {
    const double mean = sum[d] / N;
    const double var = N > 1 ? std::max(0.0, (sum_sq[d] - N * mean * mean) / (N - 1.0)) : 0.0;
    out.mean.push_back(mean);
    out.std_error.push_back(std::sqrt(var / N));
  }
  return out;
}

std::vector<double> estimate_axis(const ParticleEnsemble& ensemble, bool even) {
  const int n = ensemble.n;
  const std::size_t N = ensemble.size();
  if (N == 0) throw std::invalid_argument("estimate_axis: empty ensemble");
  auto canonical = [](std::vector<double> v) {
    const auto it = std::max_element(v.begin(), v.end(), [](double a, double b) { return std::abs(a) < std::abs(b); });
    if (*it < 0) {
      for (double& x : v) x = -x;
    }
    return v;
  };
  if (!even) {
    std::vector<double> m(n, 0.0);
    for (std::size_t j = 0; j < N; ++j) {
      for (int v = 0; v < n; ++v) m[v] += ensemble.positions[j * n + v];
    }
    double s = 0.0;
    for (double v : m) s += v * v;
    s = std::sqrt(s);
    if (s > 1e-12 * N) {
      for (double& v : m) v /= s;
      return m;
    }
  }
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t j = 0; j < N; ++j) {
    Eigen::Map<const Eigen::VectorXd> x(ensemble.positions.data() + j * n, n);
    q.noalias() += x * x.transpose();
  }
  q /= static_cast<double>(N);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(q);
  int best = 0;
  double dev = -1.0;
  for (int i = 0; i < n; ++i) {
    const double d = std::abs(es.eigenvalues()[i] - 1.0 / n);
    if (d > dev) {
      dev = d;
      best = i;
    }
  }
  std::vector<double> axis(n);
  for (int v = 0; v < n; ++v) axis[v] = es.eigenvectors()(v, best);
  return canonical(std::move(axis));
}

SimulationResult simulate(ParticleEnsemble& ensemble, const KernelSpec& spec, const SimConfig& config) {
  config.validate();
  if (ensemble.n != spec.n) throw std::invalid_argument("simulate: kernel and ensemble dimensions differ");
  if (config.axis && static_cast<int>(config.axis->size()) != ensemble.n) {
    throw std::invalid_argument("simulate: axis has the wrong dimension");
  }
  const ForceModel model(spec, config.method, config.degree, config.clamp, ensemble.size());
  SimulationResult res;
  res.method = model.method();
  res.degree = model.degree();
  res.moments.degrees = config.degrees;

  const long long burn = static_cast<long long>(std::floor(config.burn_in * config.steps));
  const std::size_t nd = config.degrees.size();
  std::vector<std::vector<double>> samples(nd);
  std::vector<double> last_se(nd, 0.0);

  auto observe = [&](long long s) {
    TrajectoryRow row{s, {}};
    std::vector<double> even_axis, odd_axis;
    for (std::size_t d = 0; d < nd; ++d) {
      const int l = config.degrees[d];
      std::vector<double> ax;
      if (config.axis) {
        ax = *config.axis;
      } else if (l % 2 == 0) {
        if (even_axis.empty()) even_axis = estimate_axis(ensemble, true);
        ax = even_axis;
      } else {
        if (odd_axis.empty()) odd_axis = estimate_axis(ensemble, false);
        ax = odd_axis;
      }
      const auto m = empirical_moments(ensemble, ax, {l});
      row.moments.push_back(m.mean[0]);
      if (s > burn) {
        samples[d].push_back(m.mean[0]);
        last_se[d] = m.std_error[0];
      }
      res.axis = ax;
    }
    res.trajectory.push_back(std::move(row));
  };

  observe(0);
  for (long long s = 1; s <= config.steps; ++s) {
    res.clamped += model.advance(ensemble, config);
    if (s % config.sample_every == 0 || s == config.steps) observe(s);
  }

  for (std::size_t d = 0; d < nd; ++d) {
    const auto& x = samples[d];
    const std::size_t m = x.size();
    double mean = 0.0;
    for (double v : x) mean += v;
    mean = m ? mean / m : 0.0;
    double se = last_se[d];
    if (m >= 4) {
      const std::size_t batches = std::min<std::size_t>(20, m);
      const std::size_t per = m / batches;
      std::vector<double> bm(batches, 0.0);
      for (std::size_t b = 0; b < batches; ++b) {
        for (std::size_t i = b * per; i < (b + 1) * per; ++i) bm[b] += x[i];
        bm[b] /= per;
      }
      double bmean = 0.0;
      for (double v : bm) bmean += v;
      bmean /= batches;
      double var = 0.0;
      for (double v : bm) var += (v - bmean) * (v - bmean);
      var /= (batches - 1.0);
      se = std::max(std::sqrt(var / batches), last_se[d] / std::sqrt(static_cast<double>(m)));
    }
    res.moments.mean.push_back(mean);
    res.moments.std_error.push_back(se);
    res.samples = static_cast<long long>(m);
  }
  return res;
}

void write_snapshot(std::ostream& out, const ParticleEnsemble& ensemble) {
  for (double v : ensemble.positions) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    char buf[8];
    std::memcpy(buf, &bits, 8);
    out.write(buf, 8);
  }
  if (!out) throw std::runtime_error("write_snapshot: write failed");
}

std::vector<double> read_snapshot(std::istream& in) {
  std::vector<double> v;
  char buf[8];
  while (in.read(buf, 8)) {
    std::uint64_t bits;
    std::memcpy(&bits, buf, 8);
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    v.push_back(std::bit_cast<double>(bits));
  }
  if (in.gcount() != 0) throw std::runtime_error("read_snapshot: truncated record");
  return v;
}

}  // namespace sphere_mv
