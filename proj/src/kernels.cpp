#include "sphere_mv/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sphere_mv {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

using specfun::log_gamma;
using specfun::signed_log_gamma;

double heat_prefactor(int n) {
  return std::exp(log_gamma(0.5 * n) - std::numbers::ln2 - 0.5 * n * std::log(std::numbers::pi));
}

// Number of series terms after which the heat kernel (or its derivatives up to
// `order`) has converged to double precision.
int heat_terms(int n, double eps, int order) {
  const double lambda = harmonic_index(n);
  constexpr int kMax = 20000;
  double first = 0.0;
  for (int k = 0; k < kMax; ++k) {
    const double log_mag = -k * (k + n - 2.0) * eps + std::log((k + lambda) / lambda) +
                           std::log(specfun::gegenbauer_at_one(k, lambda)) +
                           2.0 * order * std::log(k + 1.0);
    if (k == 0) first = log_mag;
    if (k > 2 && log_mag < first - 40.0) return k;
  }
  throw std::domain_error("heat kernel series does not converge for epsilon = " + std::to_string(eps));
}

// d^order/dt^order of the heat-kernel profile W(t) = sum_k W_k (k+lambda)/lambda C_k(t).
double heat_series(int n, double eps, double t, int order) {
  const double lambda = harmonic_index(n);
  const int terms = heat_terms(n, eps, order);
  std::vector<double> c(terms);
  specfun::gegenbauer_all(lambda + order, std::clamp(t, -1.0, 1.0), c);
  // d^m/dt^m C_k^lambda = 2^m (lambda)_m C_{k-m}^{lambda+m}.
  double factor = 1.0;
  for (int m = 0; m < order; ++m) factor *= 2.0 * (lambda + m);
  const double pre = -heat_prefactor(n);
  double s = 0.0;
  for (int k = terms - 1; k >= order; --k) {
    s += std::exp(-k * (k + n - 2.0) * eps) * (k + lambda) / lambda * c[k - order];
  }
  return pre * factor * s;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::invalid_argument(std::string(what) + " must be a positive finite number");
  }
}

// Barycentric weights for polynomial interpolation on arbitrary nodes.
std::vector<double> barycentric_weights(const std::vector<double>& x) {
  const std::size_t m = x.size();
  std::vector<double> w(m, 1.0);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t k = 0; k < m; ++k) {
      if (k != j) w[j] /= (x[j] - x[k]);
    }
  }
  const double scale = *std::max_element(w.begin(), w.end(), [](double a, double b) {
    return std::abs(a) < std::abs(b);
  });
  for (double& v : w) v /= std::abs(scale);
  return w;
}

struct Barycentric {
  std::vector<double> x, f, w;

  [[nodiscard]] double value(double t) const {
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = t - x[j];
      if (d == 0.0) return f[j];
      const double q = w[j] / d;
      num += q * f[j];
      den += q;
    }
    return num / den;
  }

  [[nodiscard]] double derivative(double t) const {
    for (std::size_t k = 0; k < x.size(); ++k) {
      if (t == x[k]) {
        double s = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) {
          if (j != k) s += (w[j] / w[k]) * (f[j] - f[k]) / (x[k] - x[j]);
        }
        return s;
      }
    }
    const double p = value(t);
    double num = 0.0, den = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
      const double d = t - x[j];
      const double q = w[j] / d;
      num += q * (p - f[j]) / d;
      den += q;
    }
    return num / den;
  }
};

struct PiecewiseLinear {
  std::vector<double> x, f;

  [[nodiscard]] std::size_t segment(double t) const {
    const auto it = std::upper_bound(x.begin(), x.end(), t);
    const std::size_t i = (it == x.begin()) ? 0 : static_cast<std::size_t>(it - x.begin()) - 1;
    return std::min(i, x.size() - 2);
  }
  [[nodiscard]] double value(double t) const {
    const std::size_t i = segment(t);
    const double s = (t - x[i]) / (x[i + 1] - x[i]);
    return (1.0 - s) * f[i] + s * f[i + 1];
  }
  [[nodiscard]] double derivative(double t) const {
    const std::size_t i = segment(t);
    return (f[i + 1] - f[i]) / (x[i + 1] - x[i]);
  }
};

std::string json_array(const std::vector<double>& v) {
  std::string s = "[";
  char buf[32];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v[i]);
    if (i) s += ",";
    s += buf;
  }
  return s + "]";
}

double custom_value(const CustomProfile& c, double t) { return c.value(t); }

}  // namespace

CustomProfile CustomProfile::from_function(std::function<double(double)> g,
                                           std::function<double(double)> dg) {
  if (!g) throw std::invalid_argument("custom profile: empty function");
  CustomProfile p;
  p.value_ = std::move(g);
  p.derivative_ = std::move(dg);
  return p;
}

CustomProfile CustomProfile::from_table(std::vector<double> t, std::vector<double> g,
                                        Interpolation mode) {
  if (t.size() != g.size()) throw std::invalid_argument("custom profile: table columns differ in length");
  if (t.size() < 2) throw std::invalid_argument("custom profile: table needs at least two samples");
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (!std::isfinite(t[i]) || !std::isfinite(g[i])) {
      throw std::invalid_argument("custom profile: non-finite table entry");
    }
    if (std::abs(t[i]) > 1.0) throw std::invalid_argument("custom profile: table abscissa outside [-1, 1]");
    if (i > 0 && !(t[i] > t[i - 1])) {
      throw std::invalid_argument("custom profile: table abscissae must be strictly increasing");
    }
  }
  CustomProfile p;
  p.source = std::string("{\"t\":") + json_array(t) + ",\"g\":" + json_array(g) + ",\"interpolation\":\"" +
             (mode == Interpolation::linear ? "linear" : "polynomial") + "\"}";
  if (mode == Interpolation::linear) {
    auto interp = std::make_shared<PiecewiseLinear>(PiecewiseLinear{std::move(t), std::move(g)});
    p.value_ = [interp](double s) { return interp->value(s); };
    p.derivative_ = [interp](double s) { return interp->derivative(s); };
  } else {
    auto w = barycentric_weights(t);
    auto interp = std::make_shared<Barycentric>(Barycentric{std::move(t), std::move(g), std::move(w)});
    p.value_ = [interp](double s) { return interp->value(s); };
    p.derivative_ = [interp](double s) { return interp->derivative(s); };
  }
  return p;
}

CustomProfile CustomProfile::from_polynomial(std::vector<double> monomials) {
  if (monomials.empty()) throw std::invalid_argument("custom profile: empty polynomial");
  for (double a : monomials) {
    if (!std::isfinite(a)) throw std::invalid_argument("custom profile: non-finite polynomial coefficient");
  }
  CustomProfile p;
  p.source = "{\"polynomial\":" + json_array(monomials) + "}";
  auto a = std::make_shared<const std::vector<double>>(std::move(monomials));
  p.value_ = [a](double t) {
    double s = 0.0;
    for (auto it = a->rbegin(); it != a->rend(); ++it) s = s * t + *it;
    return s;
  };
  p.derivative_ = [a](double t) {
    double s = 0.0;
    for (std::size_t m = a->size() - 1; m >= 1; --m) s = s * t + m * (*a)[m];
    return s;
  };
  // Bounds on [-1, 1]: sup|g'| <= sum m|a_m|, sup|g''| <= sum m(m-1)|a_m|.
  DerivativeBounds b;
  for (std::size_t m = 1; m < a->size(); ++m) {
    b.first += m * std::abs((*a)[m]);
    b.second += m * (m - 1.0) * std::abs((*a)[m]);
  }
  b.endpoint = std::max(std::abs(p.derivative_(1.0)), std::abs(p.derivative_(-1.0)));
  p.bounds = b;
  return p;
}

double CustomProfile::derivative(double t) const {
  if (derivative_) return derivative_(t);
  // Central difference, one-sided at the endpoints.
  const double h = 1e-6;
  const double lo = std::max(-1.0, t - h);
  const double hi = std::min(1.0, t + h);
  return (value_(hi) - value_(lo)) / (hi - lo);
}

std::string KernelSpec::family_name() const {
  return std::visit(overloaded{[](const Transformer&) { return std::string("transformer"); },
                               [](const Onsager&) { return std::string("onsager"); },
                               [](const Opinion&) { return std::string("opinion"); },
                               [](const HeatLocalized&) { return std::string("heat"); },
                               [](const CustomProfile&) { return std::string("custom"); }},
                    family);
}

double KernelSpec::value(double t) const {
  return std::visit(overloaded{[&](const Transformer& f) { return -std::exp(f.beta * t) / f.beta; },
                               [&](const Onsager&) { return std::sqrt(std::max(0.0, 1.0 - t * t)); },
                               [&](const Opinion& f) { return -std::pow(std::max(0.0, 1.0 + t), f.p); },
                               [&](const HeatLocalized& f) { return heat_series(n, f.epsilon, t, 0); },
                               [&](const CustomProfile& c) { return custom_value(c, t); }},
                    family);
}

double KernelSpec::derivative(double t) const {
  constexpr double inf = std::numeric_limits<double>::infinity();
  return std::visit(
      overloaded{[&](const Transformer& f) { return -std::exp(f.beta * t); },
                 [&](const Onsager&) {
                   const double s = 1.0 - t * t;
                   if (s <= 0.0) return t > 0 ? -inf : inf;
                   return -t / std::sqrt(s);
                 },
                 [&](const Opinion& f) {
                   const double u = 1.0 + t;
                   if (u <= 0.0) return f.p < 1.0 ? -inf : (f.p == 1.0 ? -1.0 : 0.0);
                   return -f.p * std::pow(u, f.p - 1.0);
                 },
                 [&](const HeatLocalized& f) { return heat_series(n, f.epsilon, t, 1); },
                 [&](const CustomProfile& c) { return c.derivative(t); }},
      family);
}

void validate(const KernelSpec& spec) {
  if (spec.n < 3) throw std::invalid_argument("kernel: sphere dimension n must be >= 3");
  std::visit(overloaded{[](const Transformer& f) { require_positive(f.beta, "transformer beta"); },
                        [](const Onsager&) {},
                        [](const Opinion& f) { require_positive(f.p, "opinion p"); },
                        [](const HeatLocalized& f) { require_positive(f.epsilon, "heat epsilon"); },
                        [](const CustomProfile&) {}},
             spec.family);
}

ZonalCoefficients closed_form_coefficients(const KernelSpec& spec, int K, std::vector<std::string>* warnings) {
  validate(spec);
  if (K < 0) throw std::invalid_argument("closed_form_coefficients: negative truncation");
  const int n = spec.n;
  const double lambda = harmonic_index(n);
  ZonalCoefficients out{n, std::vector<double>(K + 1, 0.0)};
  auto& w = out.coeffs;

  std::visit(
      overloaded{
          [&](const Transformer& f) {
            const double log_pre = lambda * std::numbers::ln2 - 0.5 * n * std::log(f.beta) + log_gamma(0.5 * n);
            for (int k = 0; k <= K; ++k) {
              w[k] = -std::exp(log_pre) * specfun::bessel_i(k + lambda, f.beta);
            }
          },
          [&](const Onsager&) {
            // W_{2j} = -(Gamma(n/2)^2 / (2 pi)) Gamma(j - 1/2) Gamma(j + 1/2)
            //          / (Gamma(j + (n+1)/2) Gamma(j + (n-1)/2)).
            const double log_pre = 2.0 * log_gamma(0.5 * n) - std::log(2.0 * std::numbers::pi);
            for (int k = 0; k <= K; k += 2) {
              const double j = 0.5 * k;
              const auto a = signed_log_gamma(j - 0.5);
              const double log_mag = log_pre + a.log_abs + log_gamma(j + 0.5) -
                                     log_gamma(j + 0.5 * (n + 1)) - log_gamma(j + 0.5 * (n - 1));
              w[k] = -a.sign * std::exp(log_mag);
            }
          },
          [&](const Opinion& f) {
            // W_k = -2^{n-2+p} Gamma(n/2) Gamma((n-1)/2 + p) Gamma(p+1)
            //       / (sqrt(pi) Gamma(p+1-k) Gamma(n+p+k-1)).
            const double p = f.p;
            const double log_pre = (n - 2 + p) * std::numbers::ln2 + log_gamma(0.5 * n) +
                                   log_gamma(0.5 * (n - 1) + p) + log_gamma(p + 1.0) -
                                   0.5 * std::log(std::numbers::pi);
            for (int k = 0; k <= K; ++k) {
              const double arg = p + 1.0 - k;
              const auto g = signed_log_gamma(arg);
              if (g.sign == 0) continue;
              const double dist = std::abs(arg - std::round(arg));
              if (arg < 0.5 && dist < 1e-9 && warnings) {
                warnings->push_back("opinion: Gamma(" + std::to_string(arg) + ") evaluated within " +
                                    std::to_string(dist) + " of a pole at k = " + std::to_string(k));
              }
              const double log_mag = log_pre - g.log_abs - log_gamma(n + p + k - 1.0);
              w[k] = -g.sign * std::exp(log_mag);
            }
          },
          [&](const HeatLocalized& f) {
            const double pre = heat_prefactor(n);
            for (int k = 0; k <= K; ++k) w[k] = -pre * std::exp(-k * (k + n - 2.0) * f.epsilon);
          },
          [&](const CustomProfile&) {
            throw std::invalid_argument("closed_form_coefficients: custom kernels have no closed form");
          }},
      spec.family);

  for (int k = 0; k <= K; ++k) {
    if (!std::isfinite(w[k])) {
      throw std::overflow_error("closed_form_coefficients: non-finite coefficient at k = " + std::to_string(k));
    }
  }
  return out;
}

ZonalCoefficients quadrature_coefficients(const KernelSpec& spec, int K, int order) {
  validate(spec);
  if (K < 0) throw std::invalid_argument("quadrature_coefficients: negative truncation");
  if (order <= 0) order = std::max(2 * K + 16, 160);
  if (order < K + 2) throw std::invalid_argument("quadrature_coefficients: order too small for truncation");
  const int n = spec.n;
  const double lambda = harmonic_index(n);
  const double a = 0.5 * (n - 3);

  // Integrand h with weight (1-t)^alpha (1+t)^beta.
  specfun::JacobiRule rule;
  std::function<double(double)> h;
  if (std::holds_alternative<Onsager>(spec.family)) {
    rule = specfun::gauss_jacobi(order, a + 0.5, a + 0.5);
    h = [](double) { return 1.0; };
  } else if (const auto* op = std::get_if<Opinion>(&spec.family)) {
    rule = specfun::gauss_jacobi(order, a, a + op->p);
    h = [](double) { return -1.0; };
  } else {
    auto base = specfun::gauss_jacobi_rule(n, order);
    rule.alpha = rule.beta = a;
    rule.nodes = std::move(base.nodes);
    rule.weights = std::move(base.weights);
    h = [&spec](double t) { return spec.value(t); };
  }

  std::vector<double> acc(K + 1, 0.0);
  std::vector<double> c(K + 1);
  std::vector<double> at_one(K + 1);
  for (int k = 0; k <= K; ++k) at_one[k] = specfun::gegenbauer_at_one(k, lambda);
  for (int i = 0; i < order; ++i) {
    const double t = rule.nodes[i];
    const double v = h(t);
    if (!std::isfinite(v)) {
      throw std::invalid_argument("kernel profile is not finite at t = " + std::to_string(t) +
                                  " (integrability failure)");
    }
    specfun::gegenbauer_all(lambda, t, c);
    const double wv = rule.weights[i] * v;
    for (int k = 0; k <= K; ++k) acc[k] += wv * c[k] / at_one[k];
  }
  const double cl = c_lambda(lambda);
  for (double& v : acc) v *= cl;
  return ZonalCoefficients{n, std::move(acc)};
}

ZonalCoefficients coefficients(const KernelSpec& spec, int K) {
  if (spec.is_custom()) return quadrature_coefficients(spec, K);
  return closed_form_coefficients(spec, K);
}

Stability stability_check(const ZonalCoefficients& coeffs) {
  for (int k = 0; k <= coeffs.truncation(); ++k) {
    if (coeffs[k] < -kStabilityTolerance) return {false, k};
  }
  return {};
}

std::optional<double> convexity_threshold(const KernelSpec& spec) {
  validate(spec);
  const double num = spec.n - 2.0;
  std::optional<double> c = std::visit(
      overloaded{[](const Transformer& f) -> std::optional<double> {
                   return std::max(f.beta * std::exp(f.beta), std::exp(f.beta));
                 },
                 [](const Onsager&) -> std::optional<double> { return std::nullopt; },
                 [](const Opinion& f) -> std::optional<double> {
                   const double p = f.p;
                   if (p == 1.0) return 1.0;
                   if (p < 2.0) return std::nullopt;
                   return std::max(p * std::pow(2.0, p - 1.0), p * (p - 1.0) * std::pow(2.0, p - 2.0));
                 },
                 [&](const HeatLocalized& f) -> std::optional<double> {
                   // All coefficients share a sign, so sup|W'| and sup|W''| sit at t = 1.
                   return std::max(std::abs(heat_series(spec.n, f.epsilon, 1.0, 1)),
                                   std::abs(heat_series(spec.n, f.epsilon, 1.0, 2)));
                 },
                 [](const CustomProfile& cp) -> std::optional<double> {
                   if (!cp.bounds) return std::nullopt;
                   return std::max({cp.bounds->first, cp.bounds->second, cp.bounds->endpoint});
                 }},
      spec.family);
  if (!c) return std::nullopt;
  if (*c == 0.0) return std::numeric_limits<double>::infinity();
  return num / (4.0 * *c);
}

}  // namespace sphere_mv
