#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/bessel.hpp>

#include "doctest.h"
#include "sphere_mv/solver.hpp"

using namespace sphere_mv;
using doctest::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

SolverConfig small_config() {
  SolverConfig c;
  c.K = 32;
  c.M = 64;
  return c;
}

}  // namespace

TEST_CASE("solver config validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.tau = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = SolverConfig{};
  c.M = c.K;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("uniform is a fixed point") {
  const auto cfg = small_config();
  const auto W = coefficients({3, Onsager{}}, cfg.K);
  const auto T = make_transform(3, cfg.M, cfg.K);
  const auto fp = gibbs_fixed_point(W, 20.0, ZonalDensity::uniform(T), cfg);
  CHECK(fp.converged);
  CHECK(fp.iterations == 0);
  CHECK(fp.residual < 1e-14);
  CHECK(residual(W, 20.0, ZonalDensity::uniform(T)) < 1e-14);
}

TEST_CASE("below the convexity threshold the iteration returns to uniform") {
  const auto cfg = small_config();
  const KernelSpec spec{3, Transformer{1.0}};
  const auto W = coefficients(spec, cfg.K);
  const auto T = make_transform(3, cfg.M, cfg.K);
  const double g = 0.9 * *convexity_threshold(spec);
  const auto fp = gibbs_fixed_point(W, g, ZonalDensity::perturbed_uniform(T, {1}, {0.2}), cfg);
  CHECK(fp.converged);
  CHECK(fp.residual <= cfg.tol);
  for (int k = 1; k <= 4; ++k) CHECK(std::abs(fp.density.mode_amplitude(k)) < 1e-9);
}

TEST_CASE("a nematic state above the threshold") {
  const auto cfg = small_config();
  const auto W = coefficients({3, Onsager{}}, cfg.K);
  const auto T = make_transform(3, cfg.M, cfg.K);
  const double g = 1.2 * 32 / kPi;
  const auto fp = gibbs_fixed_point(W, g, ZonalDensity::perturbed_uniform(T, {2}, {0.1}), cfg);
  CHECK(fp.converged);
  CHECK(fp.residual <= 1e-10);
  CHECK(residual(W, g, fp.density) <= 1e-10);
  CHECK(fp.density.dominant_mode() == 2);
  CHECK(free_energy_gap(W, fp.density, g) < 0.0);
}

TEST_CASE("residual linearization") {
  const auto cfg = small_config();
  const auto W = coefficients({3, Onsager{}}, cfg.K);
  const auto T = make_transform(3, cfg.M, cfg.K);
  const double g = 7.0;
  // At first order G(rho_bar(1 + eps Y)) = rho_bar(1 - gamma W_k eps Y).
  for (int k : {2, 4}) {
    const double slope = std::abs(1 + g * W[k]);
    const double r1 = residual(W, g, ZonalDensity::perturbed_uniform(T, {k}, {1e-4}));
    const double r2 = residual(W, g, ZonalDensity::perturbed_uniform(T, {k}, {5e-5}));
    CHECK(r1 == Approx(1e-4 * slope).epsilon(2e-3));
    CHECK(r2 == Approx(5e-5 * slope).epsilon(1e-3));
  }
}

TEST_CASE("bifurcation points") {
  const auto W = coefficients({3, Onsager{}}, 20);
  const auto set = bifurcation_points(W);
  REQUIRE(set.points.size() == 10);
  for (std::size_t i = 0; i < 5; ++i) {
    const double l = static_cast<double>(i + 1);
    const double ref = 8 * std::tgamma(l + 2) * std::tgamma(l + 1) / (std::tgamma(l - 0.5) * std::tgamma(l + 0.5));
    CHECK(set.points[i].k == 2 * (i + 1));
    CHECK(set.points[i].gamma == Approx(ref).epsilon(1e-12));
  }

  const double beta = 1.3;
  for (int n : {3, 4}) {
    const auto Wt = coefficients({n, Transformer{beta}}, 12);
    const auto bt = bifurcation_points(Wt);
    const double lambda = (n - 2) / 2.0;
    for (const auto& b : bt.points) {
      const double ref = std::pow(beta, n / 2.0) /
                         (std::pow(2.0, lambda) * std::tgamma(n / 2.0) * boost::math::cyl_bessel_i(b.k + lambda, beta));
      CHECK(b.gamma == Approx(ref).epsilon(1e-11));
    }
  }

  const auto bo = bifurcation_points(coefficients({3, Opinion{2.0}}, 12));
  REQUIRE(bo.points.size() == 2);
  CHECK(bo.points[0].k + bo.points[1].k == 3);
  CHECK_THROWS_AS(bifurcation_points(coefficients({3, CustomProfile::from_polynomial({0.0, 0.0, 1.0})}, 8)),
                  std::domain_error);
}

TEST_CASE("branch leaving the second bifurcation point") {
  const auto cfg = small_config();
  const auto W = coefficients({3, Onsager{}}, cfg.K);
  const double g2 = 32 / kPi;
  std::vector<double> gammas;
  for (int i = 1; i <= 8; ++i) gammas.push_back(g2 * (1.0 + 0.5 * i / 8.0));
  const auto b = trace_branch(W, 2, gammas, cfg);
  REQUIRE(b.points.size() == gammas.size());
  for (const auto& p : b.points) {
    CHECK(p.residual <= 1e-9);
    CHECK(p.dominant_mode == 2);
  }
  // Amplitudes shrink towards the bifurcation point.
  for (std::size_t i = 1; i < b.points.size(); ++i) {
    CHECK(std::abs(b.points[i - 1].amplitude) < std::abs(b.points[i].amplitude));
  }
  // Energy outside mode 2 vanishes faster than the mode-2 amplitude.
  std::vector<double> ratio;
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& d = b.points[i].density;
    double other = 0.0;
    for (int k = 1; k <= d.truncation(); ++k) {
      if (k != 2) other += std::pow(d.mode_amplitude(k), 2);
    }
    ratio.push_back(std::sqrt(other) / std::abs(d.mode_amplitude(2)));
  }
  CHECK(ratio[0] < ratio[1]);
  CHECK(ratio[1] < ratio[2]);

  CHECK_THROWS_AS(trace_branch(W, 2, {g2 * 0.9}, cfg), std::invalid_argument);
  CHECK_THROWS(trace_branch(W, 3, {g2 * 1.1}, cfg));
}

TEST_CASE("resonance") {
  const auto ons = resonance_check(coefficients({3, Onsager{}}, 32), 0.0);
  CHECK(ons.satisfied);
  CHECK(ons.critical_modes == std::vector<int>{2});
  CHECK(ons.witness.modes == std::vector<int>{2});
  CHECK(ons.u3_sphere != 0.0);

  const auto tr = resonance_check(coefficients({3, Transformer{1.0}}, 32), 0.0);
  CHECK_FALSE(tr.satisfied);
  CHECK(tr.critical_modes == std::vector<int>{1});

  // The mode-2 bandwidth 1 - exp(-4 eps) must fall below (U3 / omega)^2 / 49.
  const auto Wh = coefficients({3, HeatLocalized{1e-5}}, 32);
  CHECK_FALSE(resonance_check(Wh, 0.0).satisfied);
  const double d2 = minimal_bandwidth(Wh, 2);
  CHECK(d2 == Approx(1 - Wh[2] / Wh[1]).epsilon(1e-13));
  const auto hr = resonance_check(Wh, d2 * 1.01);
  CHECK(hr.satisfied);
  CHECK(hr.critical_modes == std::vector<int>{1, 2});
}

TEST_CASE("cubic competitor") {
  const auto W = coefficients({3, Onsager{}}, 32);
  const double gs = 32 / kPi;
  HarmonicCombination u{{2}, {1.0 / zonal_harmonic(2, 3, 1.0)}};
  CHECK(std::abs(competitor_energy_gap(W, u, 1e-6, gs)) < 1e-15);
  const auto rep = resonance_check(W, 0.0);
  const double eps = competitor_epsilon(rep, 3);
  CHECK(eps == Approx(std::min(0.5, std::abs(rep.u3_sphere) / (4 * omega(3)))).epsilon(1e-14));
  CHECK(competitor_energy_gap(W, rep.witness, eps, gs) < 0.0);
}

TEST_CASE("transition: stable kernels have none") {
  const auto cfg = small_config();
  const auto rep = find_transition(coefficients({3, CustomProfile::from_polynomial({0.0, 0.0, 1.0})}, cfg.K), {}, cfg);
  CHECK(rep.type == TransitionType::none);
  CHECK_FALSE(rep.diagnostic.empty());
  CHECK(to_string(TransitionType::continuous_candidate) == "continuous-candidate");
}
