#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "sphere_mv/harmonics.hpp"
#include "sphere_mv/kernels.hpp"

using namespace sphere_mv;
using doctest::Approx;

TEST_CASE("sphere areas and normalizing constants") {
  const double pi = std::numbers::pi;
  CHECK(omega(3) == Approx(4 * pi).epsilon(1e-15));
  CHECK(omega(2) == Approx(2 * pi).epsilon(1e-15));
  CHECK(omega(4) == Approx(2 * pi * pi).epsilon(1e-15));
  CHECK(c_lambda(0.5) == Approx(0.5).epsilon(1e-15));
  CHECK(c_lambda(1.0) == Approx(2 / pi).epsilon(1e-15));
  for (int n : {3, 4, 7}) {
    const auto rule = make_rule(n, 10);
    double s = 0.0;
    for (double w : rule->weights) s += w;
    CHECK(c_lambda(harmonic_index(n)) == Approx(1.0 / s).epsilon(1e-13));
  }
}

TEST_CASE("zonal harmonics are unit-norm and orthogonal") {
  CHECK(zonal_norm_constant(0, 5) == Approx(1.0));
  CHECK(zonal_norm_constant(2, 3) == Approx(std::sqrt(5.0)).epsilon(1e-14));
  CHECK(zonal_norm_constant(1, 3) == Approx(std::sqrt(3.0)).epsilon(1e-14));
  for (int n : {3, 4, 5, 10}) {
    const auto rule = make_rule(n, 40);
    const double c = c_lambda(harmonic_index(n));
    for (int l : {1, 2, 5}) {
      double nn = 0.0, cross = 0.0;
      for (int i = 0; i < rule->order(); ++i) {
        const double y = zonal_harmonic(l, n, rule->nodes[i]);
        nn += rule->weights[i] * y * y;
        cross += rule->weights[i] * y * zonal_harmonic(l + 1, n, rule->nodes[i]);
      }
      CHECK(c * nn == Approx(1.0).epsilon(1e-12));
      CHECK(std::abs(c * cross) < 1e-12);
    }
  }
}

TEST_CASE("decompose: simple profiles") {
  const auto rule = make_rule(3, 40);
  const auto k = decompose(sample_profile(rule, [](double) { return 2.5; }), 6);
  CHECK(k[0] == Approx(2.5).epsilon(1e-14));
  for (int j = 1; j <= 6; ++j) CHECK(std::abs(k[j]) < 1e-14);

  const auto lin = decompose(sample_profile(rule, [](double t) { return t; }), 6);
  CHECK(lin[1] == Approx(1.0 / 3.0).epsilon(1e-14));
  for (int j : {0, 2, 3, 4}) CHECK(std::abs(lin[j]) < 1e-14);

  const auto ex = decompose(sample_profile(rule, [](double t) { return -std::exp(t); }), 4);
  CHECK(ex[0] == Approx(-std::sinh(1.0)).epsilon(1e-14));
}

TEST_CASE("decompose then reconstruct a cubic") {
  for (int n : {3, 6}) {
    const auto rule = make_rule(n, 12);
    auto g = [](double t) { return 0.3 - 1.1 * t + 0.4 * t * t + 2.0 * t * t * t; };
    const auto c = decompose(sample_profile(rule, g), 5);
    for (double t : {-1.0, -0.4, 0.0, 0.77, 1.0}) CHECK(reconstruct_at(c, t) == Approx(g(t)).epsilon(1e-12));
    const ZonalCoefficients flat{n, {1.75, 0.0, 0.0}};
    CHECK(reconstruct_at(flat, 0.3) == Approx(1.75));
  }
}

TEST_CASE("transform tables agree with the free functions") {
  const auto rule = make_rule(4, 30);
  const ZonalTransform tr(rule, 10);
  auto g = [](double t) { return std::exp(0.7 * t) + t * t; };
  const auto prof = sample_profile(rule, g);
  const auto a = tr.decompose(prof.values);
  const auto b = decompose(prof, 10);
  for (int k = 0; k <= 10; ++k) CHECK(a[k] == Approx(b[k]).epsilon(1e-13).scale(1e-3));
  const auto back = tr.reconstruct(a);
  const auto ref = reconstruct(b, rule->nodes);
  for (int i = 0; i < 30; ++i) CHECK(back[i] == Approx(ref[i]).epsilon(1e-13));
}

TEST_CASE("heat kernel truncation obeys the coefficient tail bound") {
  const KernelSpec heat{3, HeatLocalized{0.05}};
  const int K = 12;
  const auto full = coefficients(heat, K + 10);
  ZonalCoefficients cut{3, std::vector<double>(full.coeffs.begin(), full.coeffs.begin() + K + 1)};
  const double lambda = harmonic_index(3);
  double bound = 0.0;
  for (int k = K + 1; k <= K + 10; ++k) {
    bound += std::abs(full[k]) * (k + lambda) / lambda * specfun::gegenbauer_at_one(k, lambda);
  }
  double worst = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double t = -1.0 + i / 100.0;
    worst = std::max(worst, std::abs(reconstruct_at(full, t) - reconstruct_at(cut, t)));
  }
  CHECK(worst > 0.0);
  CHECK(worst <= bound * (1 + 1e-12));
}

TEST_CASE("triple products") {
  for (int n : {3, 4, 5}) {
    for (int l : {1, 3, 5}) {
      const auto tp = triple_product_integral(l, n);
      CHECK(std::abs(tp.reduced) < 1e-12);
      CHECK(std::abs(tp.normalized) < 1e-12);
    }
  }
  // Y_{2,0} = sqrt(5) P_2 on S^2 and int P_2^3 = 4/35.
  const auto t3 = triple_product_integral(2, 3);
  CHECK(t3.reduced / std::pow(std::sqrt(5.0), 3) == Approx(4.0 / 35.0).epsilon(1e-12));
  CHECK(t3.sphere == Approx(omega(2) * t3.reduced).epsilon(1e-13));
  CHECK(t3.normalized == Approx(t3.sphere / omega(3)).epsilon(1e-13));
  // Brute-force quadrature of Y^3 for other dimensions.
  for (int n : {4, 10}) {
    const auto rule = make_rule(n, 30);
    double s = 0.0;
    for (int i = 0; i < 30; ++i) s += rule->weights[i] * std::pow(zonal_harmonic(4, n, rule->nodes[i]), 3);
    CHECK(triple_product_integral(4, n).reduced == Approx(s).epsilon(1e-11));
  }
}
