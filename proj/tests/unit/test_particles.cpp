#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "doctest.h"
#include "sphere_mv/parallel.hpp"
#include "sphere_mv/particles.hpp"

using namespace sphere_mv;
using doctest::Approx;

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("pairwise force basics") {
  const KernelSpec tr{3, Transformer{1.0}};
  const auto e = make_ensemble(3, {1, 0, 0, 0, 1, 0}, 1);
  const auto f = kernel_force(tr, e.at(0), e);
  // W' = -e^{t}; with t = 0 the pull from y is y / 2 after averaging over both particles.
  CHECK(f[0] == Approx(0.0));
  CHECK(f[1] == Approx(0.5));
  CHECK(f[2] == Approx(0.0));

  const auto zero = kernel_force({3, CustomProfile::from_polynomial({2.0})}, e.at(0), e);
  for (double v : zero) CHECK(v == 0.0);

  const auto u = uniform_ensemble(4, 50, 3);
  for (std::size_t i = 0; i < 5; ++i) {
    const auto fi = kernel_force({4, Opinion{3.0}}, u.at(i), u);
    CHECK(std::abs(dot(fi, u.at(i))) < 1e-15);
  }
}

TEST_CASE("spectral force is exact for polynomial kernels") {
  for (int n : {3, 5}) {
    const KernelSpec spec{n, CustomProfile::from_polynomial({0.4, -1.0, 0.5, 2.0, -0.3})};
    const auto e = uniform_ensemble(n, 300, 11);
    for (int L : {4, 5}) {
      const ForceModel sp(spec, ForceMethod::spectral, L, 1e-9, e.size());
      const ForceModel pw(spec, ForceMethod::pairwise, L, 1e-9, e.size());
      std::vector<double> a, b;
      sp.evaluate(e, a);
      pw.evaluate(e, b);
      double err = 0.0;
      for (std::size_t i = 0; i < a.size(); ++i) err = std::max(err, std::abs(a[i] - b[i]));
      CHECK(err < 1e-13);
    }
  }
  CHECK(ForceModel({3, CustomProfile::from_polynomial({1.0})}, ForceMethod::spectral, 8, 1e-9, 10).zero());
  CHECK_FALSE(ForceModel({3, Onsager{}}, ForceMethod::spectral, 8, 1e-9, 10).zero());
  CHECK(ForceModel({3, Onsager{}}, ForceMethod::automatic, 8, 1e-9, 100).method() == ForceMethod::pairwise);
  CHECK(ForceModel({3, Onsager{}}, ForceMethod::automatic, 8, 1e-9, 10000).method() == ForceMethod::spectral);
}

TEST_CASE("onsager pairwise force clamps coincident particles") {
  const auto e = make_ensemble(3, {0, 0, 1, 0, 0, 1, 1, 0, 0}, 5);
  const ForceModel pw({3, Onsager{}}, ForceMethod::pairwise, 8, 1e-9, e.size());
  std::vector<double> f;
  const auto clamped = pw.evaluate(e, f);
  CHECK(clamped == 2);
  for (double v : f) CHECK(std::isfinite(v));
}

TEST_CASE("stepping") {
  SimConfig cfg;
  cfg.dt = 1e-2;
  auto e = uniform_ensemble(3, 40, 9);
  const auto before = e.positions;
  step(e, KernelSpec{3, CustomProfile::from_polynomial({1.0})}, cfg);
  CHECK(e.positions == before);

  cfg.gamma = 2.0;
  cfg.method = ForceMethod::pairwise;
  const ForceModel model({3, Onsager{}}, cfg.method, cfg.degree, cfg.clamp, e.size());
  for (int s = 0; s < 10000; ++s) model.advance(e, cfg);
  for (std::size_t i = 0; i < e.size(); ++i) CHECK(dot(e.at(i), e.at(i)) == Approx(1.0).epsilon(1e-14));

  // Two attracting particles align monotonically.
  SimConfig det;
  det.dt = 1e-2;
  auto pair = make_ensemble(3, {1, 0, 0, 0, 0.6, 0.8}, 2);
  double prev = dot(pair.at(0), pair.at(1));
  for (int s = 0; s < 500; ++s) {
    step(pair, KernelSpec{3, Transformer{1.0}}, det);
    const double now = dot(pair.at(0), pair.at(1));
    CHECK(now >= prev);
    prev = now;
  }
  CHECK(prev > 0.999);

  cfg.dt = -1.0;
  CHECK_THROWS_AS(step(e, KernelSpec{3, Onsager{}}, cfg), std::invalid_argument);
}

TEST_CASE("results do not depend on the thread count") {
  SimConfig cfg;
  cfg.gamma = 5.0;
  cfg.steps = 20;
  cfg.sample_every = 5;
  cfg.method = ForceMethod::spectral;
  auto run = [&](const char* threads) {
    setenv("SPHERE_MV_THREADS", threads, 1);
    auto e = uniform_ensemble(3, 1000, 77);
    simulate(e, KernelSpec{3, Onsager{}}, cfg);
    unsetenv("SPHERE_MV_THREADS");
    return e.positions;
  };
  CHECK(run("1") == run("3"));
}

TEST_CASE("moments") {
  const std::vector<double> axis{0, 0, 1};
  const auto pole = polar_ensemble(3, 30, axis, 1);
  const auto m = empirical_moments(pole, axis, {1, 2, 3});
  for (int i = 0; i < 3; ++i) CHECK(m.mean[i] == Approx(zonal_harmonic(i + 1, 3, 1.0)).epsilon(1e-14));

  const auto u = uniform_ensemble(3, 100000, 21);
  const auto mu = empirical_moments(u, axis, {1, 2, 3, 4});
  for (int i = 0; i < 4; ++i) CHECK(std::abs(mu.mean[i]) < 4 * mu.std_error[i]);

  // A nematic cloud around e_1 recovers that axis up to sign.
  std::vector<double> pts;
  for (int i = 0; i < 200; ++i) {
    const double s = (i % 2 ? 1.0 : -1.0);
    pts.insert(pts.end(), {s, 0.05 * std::sin(i), 0.05 * std::cos(i)});
  }
  const auto ax = estimate_axis(make_ensemble(3, pts, 0), true);
  CHECK(std::abs(ax[0]) == Approx(1.0).epsilon(1e-3));
}

TEST_CASE("snapshots round-trip") {
  const auto e = uniform_ensemble(4, 17, 8);
  std::stringstream s;
  write_snapshot(s, e);
  CHECK(read_snapshot(s) == e.positions);
}
