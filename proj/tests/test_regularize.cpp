#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "lot/regularize.hpp"

using namespace lot;

namespace {

std::shared_ptr<const RescaledGraph> torus1(int n) {
  return std::make_shared<const RescaledGraph>(RescaledGraph::make(lt::make_zd(1), n));
}

DiscretePath random_path(std::shared_ptr<const RescaledGraph> rg, int K, rng& gen,
                         double mass_floor = 0.5) {
  TorusField m0 = make_torus_field(rg);
  for (double& x : m0.v) x = gen.uniform(mass_floor, mass_floor + 1.0);
  std::vector<TorusFlux> J(K, make_torus_flux(rg));
  for (auto& Jk : J)
    for (double& x : Jk.v) x = gen.uniform(-0.2, 0.2);
  return integrate_path(m0, J);
}

}  // namespace

TEST_CASE("tilting: formula, limits, bad deltas") {
  auto rg = torus1(4);
  WpMeanCost w2(rg->base, 2.0, Mean{});
  rng gen(2);
  TorusField m = make_torus_field(rg);
  for (double& x : m.v) x = gen.uniform(0.0, 2.0);
  TorusFlux J = make_torus_flux(rg);
  for (double& x : J.v) x = gen.uniform(-1.0, 1.0);

  SUBCASE("componentwise convex combination with the scaled reference") {
    double delta = 0.3, eps = rg->eps();
    auto [tm, tJ] = tilt_pair(m, J, delta, w2);
    for (long long c = 0; c < rg->cells.total; ++c) {
      CHECK(tm.v[c] == doctest::Approx(0.7 * m.v[c] + delta * eps * w2.m_ref.v[0]).epsilon(1e-14));
      CHECK(tJ.v[c] == doctest::Approx(0.7 * J.v[c] + delta * w2.J_ref.v[0]).epsilon(1e-14));
    }
  }
  SUBCASE("a vanishing tilt is the identity to first order") {
    auto [tm, tJ] = tilt_pair(m, J, 1e-12, w2);
    for (size_t i = 0; i < m.v.size(); ++i) {
      CHECK(std::abs(tm.v[i] - m.v[i]) <= 1e-10);
      CHECK(std::abs(tJ.v[i] - J.v[i]) <= 1e-10);
    }
  }
  SUBCASE("the tilted energy obeys the convexity bound") {
    TorusField ref_m = replicate(PeriodicField{rg->base, w2.m_ref.v}, rg);
    TorusFlux ref_J = replicate(PeriodicFlux{rg->base, w2.J_ref.v}, rg);
    double eps = rg->eps();
    for (double& x : ref_m.v) x *= eps;  // eps^d, d = 1
    double ref_energy = w2.rescaled_energy(ref_m, ref_J);
    for (double delta : {0.1, 0.5, 0.9}) {
      auto [tm, tJ] = tilt_pair(m, J, delta, w2);
      double lhs = w2.rescaled_energy(tm, tJ);
      double rhs = (1 - delta) * w2.rescaled_energy(m, J) + delta * ref_energy;
      CHECK(lhs <= rhs + 1e-10);
    }
  }
  SUBCASE("delta must lie strictly inside (0,1)") {
    for (double bad : {0.0, 1.0, -0.2, 1.5}) {
      CAPTURE(bad);
      CHECK_THROWS_AS(tilt_pair(m, J, bad, w2), domain_error);
    }
  }
}

TEST_CASE("tilting a path preserves the continuity equation") {
  auto rg = torus1(5);
  WpMeanCost w2(rg->base, 2.0, Mean{});  // reference flux is divergence free
  rng gen(9);
  DiscretePath p = random_path(rg, 4, gen);

  DiscretePath tp = tilt_path(p, 0.25, w2);
  CHECK(tp.steps() == p.steps());
  CHECK(ce_residual(tp).max_residual <= 1e-12);
  for (const auto& mk : tp.m)
    for (double x : mk.v) CHECK(x >= 0.0);
}

TEST_CASE("heat kernel weights: positivity, symmetry, normalization") {
  for (int d : {1, 2}) {
    SpaceKernel ker = space_kernel(d, 6, 0.02);
    CHECK(ker.min_weight > 0.0);
    double sum = 0.0;
    for (long long c = 0; c < ker.cells.total; ++c) {
      CHECK(ker.w[c] >= ker.min_weight);
      sum += ker.w[c];
      ivec z = ker.cells.coords(c);
      for (int i = 0; i < d; ++i) z[i] = -z[i];
      CHECK(ker.w[c] == doctest::Approx(ker.w[ker.cells.index(z)]).epsilon(1e-12));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));
  }
  CHECK_THROWS_AS(space_kernel(1, 6, 0.0), domain_error);
  CHECK_THROWS_AS(space_kernel(1, 6, -1.0), domain_error);
}

TEST_CASE("space smoothing: invariances and strict positivity") {
  auto rg = torus1(6);
  const double lambda = 0.01;

  SUBCASE("constant fields are fixed points") {
    TorusField m = make_torus_field(rg);
    m.v.assign(m.v.size(), 0.7);
    TorusField sm = smooth_space(m, lambda);
    for (double x : sm.v) CHECK(x == doctest::Approx(0.7).epsilon(1e-14));
  }
  SUBCASE("a point mass spreads to every cell, mass preserved") {
    TorusField m = make_torus_field(rg);
    m.v[0] = 1.0;
    TorusField sm = smooth_space(m, lambda);
    SpaceKernel ker = space_kernel(1, 6, lambda);
    double lo = inf;
    for (double x : sm.v) lo = std::min(lo, x);
    CHECK(lo >= ker.min_weight * (1 - 1e-12));
    CHECK(lo > 0.0);
    CHECK(vsum(sm.v) == doctest::Approx(1.0).epsilon(1e-13));
  }
  SUBCASE("smoothing commutes with torus shifts, bit for bit") {
    rng gen(12);
    TorusField m = make_torus_field(rg);
    for (double& x : m.v) x = gen.uniform(0.0, 1.0);
    TorusFlux J = make_torus_flux(rg);
    for (double& x : J.v) x = gen.uniform(-1.0, 1.0);
    for (int s : {1, 2, 5}) {
      ivec z{s};
      CHECK(smooth_space(shift_field(m, z), lambda).v == shift_field(smooth_space(m, lambda), z).v);
      CHECK(smooth_space(shift_field(J, z), lambda).v == shift_field(smooth_space(J, lambda), z).v);
    }
  }
  SUBCASE("shift-invariant convex energies never increase") {
    WpMeanCost w2(rg->base, 2.0, Mean{});
    rng gen(13);
    for (int trial = 0; trial < 100; ++trial) {
      TorusField m = make_torus_field(rg);
      for (double& x : m.v) x = gen.uniform(0.05, 1.0);
      TorusFlux J = make_torus_flux(rg);
      for (double& x : J.v) x = gen.uniform(-1.0, 1.0);
      double before = w2.rescaled_energy(m, J);
      double after = w2.rescaled_energy(smooth_space(m, lambda), smooth_space(J, lambda));
      CHECK(after <= before + 1e-10);
    }
  }
}

TEST_CASE("time smoothing: window algebra and the continuity equation") {
  auto rg = torus1(4);
  rng gen(21);
  const int K = 8;
  DiscretePath p = random_path(rg, K, gen);
  const double dt = p.dt();

  SUBCASE("misaligned or oversized windows are rejected") {
    CHECK_THROWS_AS(smooth_time(p, 0.3 * dt), domain_error);
    CHECK_THROWS_AS(smooth_time(p, 4 * dt), domain_error);  // no interval left
    CHECK_THROWS_AS(smooth_time(p, 0.0), domain_error);
  }
  SUBCASE("constant paths are fixed points") {
    TorusField m = make_torus_field(rg);
    m.v.assign(m.v.size(), 0.4);
    DiscretePath c = constant_path(rg, m, K);
    DiscretePath sc = smooth_time(c, 2 * dt);
    CHECK(sc.steps() == K - 4);
    CHECK(sc.t0 == doctest::Approx(2 * dt));
    CHECK(sc.t1 == doctest::Approx(1.0 - 2 * dt));
    for (const auto& mk : sc.m)
      for (double x : mk.v) CHECK(x == doctest::Approx(0.4).epsilon(1e-14));
    for (const auto& Jk : sc.J)
      for (double x : Jk.v) CHECK(x == 0.0);
  }
  SUBCASE("the smoothed path still solves the continuity equation") {
    for (int r : {1, 2, 3}) {
      DiscretePath sp = smooth_time(p, r * dt);
      CHECK(sp.steps() == K - 2 * r);
      CHECK(ce_residual(sp).max_residual <= 1e-12);
    }
  }
  SUBCASE("time derivative gains the 1/tau bound") {
    double sup = 0.0;
    for (const auto& mk : p.m) sup = std::max(sup, linf_norm(mk.v));
    for (int r : {1, 2}) {
      double tau = r * dt;
      DiscretePath sp = smooth_time(p, tau);
      for (int k = 0; k < sp.steps(); ++k)
        for (size_t i = 0; i < sp.m[k].v.size(); ++i)
          CHECK(std::abs(sp.m[k + 1].v[i] - sp.m[k].v[i]) / sp.dt() <= sup / tau + 1e-12);
    }
  }
  SUBCASE("interval energies obey the window Jensen inequality") {
    WpMeanCost w2(rg->base, 2.0, Mean{});
    const int r = 2;
    DiscretePath sp = smooth_time(p, r * dt);
    dvec coeff(2 * r + 1, 1.0 / (2 * r));
    coeff.front() *= 0.5;
    coeff.back() *= 0.5;
    for (int k = 0; k < sp.steps(); ++k) {
      TorusField mbar = make_torus_field(rg);
      for (size_t i = 0; i < mbar.v.size(); ++i)
        mbar.v[i] = 0.5 * (sp.m[k].v[i] + sp.m[k + 1].v[i]);
      double lhs = w2.rescaled_energy(mbar, sp.J[k]);
      double rhs = 0.0;
      for (int w = 0; w <= 2 * r; ++w) {
        TorusField mw = make_torus_field(rg);
        for (size_t i = 0; i < mw.v.size(); ++i)
          mw.v[i] = 0.5 * (p.m[k + w].v[i] + p.m[k + w + 1].v[i]);
        rhs += coeff[w] * w2.rescaled_energy(mw, p.J[k + w]);
      }
      CHECK(lhs <= rhs + 1e-10);
    }
  }
}
