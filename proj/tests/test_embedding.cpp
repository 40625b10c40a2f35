#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "lot/embedding.hpp"

using namespace lot;

namespace {

std::shared_ptr<const RescaledGraph> torus(std::shared_ptr<const PeriodicGraph> g, int n) {
  return std::make_shared<const RescaledGraph>(RescaledGraph::make(std::move(g), n));
}

// Z^2 with an axis rail and a diagonal rail, to exercise multi-axis sweeps.
std::shared_ptr<const PeriodicGraph> make_diag() {
  std::vector<stencil_edge> e = {{0, {1, 0}, 0}, {0, {1, 1}, 0}};
  return std::make_shared<const PeriodicGraph>(PeriodicGraph::make(2, {"v"}, e));
}

// 8-point Gauss-Legendre on [-1,1], for independent quadrature oracles.
constexpr double qx[8] = {-0.9602898564975362, -0.7966664774136267, -0.5255324099163290,
                          -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                          0.7966664774136267,  0.9602898564975362};
constexpr double qw[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                          0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                          0.2223810344533745, 0.1012285362903763};

// Composite tensor quadrature of phi (or d_axis phi) over lo + [0, side]^d.
double quad_box(const TestFunction& phi, const dvec& lo, double side, int axis = -1) {
  const int d = phi.d, panels = 8;
  long long pts = 1;
  for (int i = 0; i < d; ++i) pts *= panels * 8;
  double total = 0.0;
  dvec x(d);
  for (long long t = 0; t < pts; ++t) {
    long long rest = t;
    double wt = 1.0;
    for (int i = 0; i < d; ++i) {
      int node = static_cast<int>(rest % 8);
      int panel = static_cast<int>((rest / 8) % panels);
      rest /= 8 * panels;
      double h = side / panels;
      x[i] = lo[i] + h * (panel + 0.5 + 0.5 * qx[node]);
      wt *= qw[node] * 0.5 * h;
    }
    total += wt * (axis < 0 ? phi.value(x) : phi.gradient(x)[axis]);
  }
  return total;
}

}  // namespace

TEST_CASE("embedded point mass fills exactly one cube") {
  auto rg = torus(lt::make_zd(2), 4);
  TorusField m = make_torus_field(rg);
  long long cell = rg->cells.index({1, 2});
  m.v[rg->vidx(cell, 0)] = 1.0;

  TorusMeasure mu = embed_density(m);
  CHECK(mu.comps == 1);
  CHECK(mu.w[cell] == 1.0);
  CHECK(mu.total() == 1.0);
  CHECK(mu.tv() == 1.0);
}

TEST_CASE("embedded densities sum the fibers and preserve mass") {
  auto rg = torus(lt::make_ladder(), 5);
  rng gen(7);
  TorusField m = make_torus_field(rg);
  for (double& x : m.v) x = gen.uniform(0.0, 2.0);

  TorusMeasure mu = embed_density(m);
  CHECK(mu.total() == doctest::Approx(vsum(m.v)).epsilon(1e-14));
  for (long long c = 0; c < rg->cells.total; ++c)
    CHECK(mu.w[c] == doctest::Approx(m.v[rg->vidx(c, 0)] + m.v[rg->vidx(c, 1)]).epsilon(1e-14));
}

TEST_CASE("one edge drags half a cube into each neighbor") {
  auto rg = torus(lt::make_zd(1), 4);
  TorusFlux J = make_torus_flux(rg);
  J.v[rg->eidx(0, 0)] = 1.0;

  TorusMeasure mu = embed_flux(J);
  CHECK(mu.comps == 1);
  // The sliding cube spends half its time over each of the two cubes it
  // touches, so the momentum density J * dz lands half and half.
  CHECK(mu.w[0] == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(mu.w[1] == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(mu.w[2] == 0.0);
  CHECK(mu.w[3] == 0.0);
  CHECK(mu.tv() == doctest::Approx(0.25).epsilon(1e-13));
  CHECK(embedded_flux_tv(J) == doctest::Approx(0.25).epsilon(1e-13));
}

TEST_CASE("embedded momentum totals are exact for every edge shape") {
  auto rg = torus(make_diag(), 5);
  rng gen(19);
  TorusFlux J = make_torus_flux(rg);
  for (double& x : J.v) x = gen.uniform(-1.0, 1.0);

  TorusMeasure mu = embed_flux(J);
  const double eps = rg->eps();
  double cube_vol = eps * eps;
  for (int i = 0; i < 2; ++i) {
    double want = 0.0;
    for (long long c = 0; c < rg->cells.total; ++c)
      for (int e = 0; e < rg->base->edge_count(); ++e)
        want += eps * J.v[rg->eidx(c, e)] * rg->base->edges[e].dz[i];
    double got = 0.0;
    for (long long c = 0; c < rg->cells.total; ++c) got += mu.w[c * 2 + i] * cube_vol;
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("variation bounds sandwich the embedded flux") {
  auto rg = torus(make_diag(), 5);
  rng gen(23);
  const double eps = rg->eps();
  const double cap_rate = eps * rg->base->r0 * std::sqrt(2.0);
  for (int trial = 0; trial < 25; ++trial) {
    TorusFlux J = make_torus_flux(rg);
    double l1 = 0.0;
    for (double& x : J.v) {
      x = gen.uniform(-2.0, 2.0);
      l1 += std::abs(x);
    }
    TorusMeasure mu = embed_flux(J);
    double upper = embedded_flux_tv(J);
    CHECK(mu.tv() <= upper + 1e-12);
    CHECK(upper <= cap_rate * l1 + 1e-12);
  }
}

TEST_CASE("trig test functions: values, gradients, box integrals") {
  rng gen(3);
  for (int d : {1, 2}) {
    for (int trial = 0; trial < 4; ++trial) {
      TestFunction phi = TestFunction::random(d, 2, 3, gen);

      // gradient vs central differences
      dvec x(d);
      for (int i = 0; i < d; ++i) x[i] = gen.uniform(0.0, 1.0);
      dvec grad = phi.gradient(x);
      for (int i = 0; i < d; ++i) {
        double h = 1e-6;
        dvec xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        CHECK(grad[i] ==
              doctest::Approx((phi.value(xp) - phi.value(xm)) / (2 * h)).epsilon(1e-5));
      }

      // analytic box integrals vs quadrature, on an awkward box
      dvec lo(d);
      for (int i = 0; i < d; ++i) lo[i] = gen.uniform(-0.3, 1.3);
      double side = gen.uniform(0.05, 0.45);
      CHECK(phi.box_integral(lo, side) ==
            doctest::Approx(quad_box(phi, lo, side)).epsilon(1e-9));
      for (int i = 0; i < d; ++i)
        CHECK(phi.box_integral_grad(lo, side, i) ==
              doctest::Approx(quad_box(phi, lo, side, i)).epsilon(1e-9));

      // nonzero frequencies integrate to zero over the full torus
      CHECK(phi.box_integral(dvec(d, 0.0), 1.0) == doctest::Approx(0.0).epsilon(1e-12));
    }
  }

  // a constant mode integrates to amplitude * volume
  TestFunction cst{1, {{{0}, 2.0, 0.0}}};
  CHECK(cst.box_integral({0.25}, 0.5) == doctest::Approx(1.0).epsilon(1e-14));

  auto rg = torus(lt::make_zd(1), 4);
  TorusField m = make_torus_field(rg);
  rng gen2(4);
  for (double& v : m.v) v = gen2.uniform(0.0, 1.0);
  CHECK(integrate(embed_density(m), cst) == doctest::Approx(2.0 * vsum(m.v)).epsilon(1e-13));
}

TEST_CASE("embedded paths solve the continuity equation weakly") {
  rng gen(31);
  std::vector<TestFunction> phis;
  for (int i = 0; i < 6; ++i) phis.push_back(TestFunction::random(2, 2, 2, gen));

  SUBCASE("axis and diagonal rails") {
    auto rg = torus(make_diag(), 5);
    TorusField m0 = make_torus_field(rg);
    for (double& x : m0.v) x = gen.uniform(0.5, 1.5);
    std::vector<TorusFlux> J(3, make_torus_flux(rg));
    for (auto& Jk : J)
      for (double& x : Jk.v) x = gen.uniform(-1.0, 1.0);
    CHECK(weak_ce_residual(integrate_path(m0, J), phis) <= 1e-8);
  }
  SUBCASE("rung fluxes move mass invisibly inside a cube") {
    auto rg = torus(lt::make_ladder(), 5);
    std::vector<TestFunction> phis1;
    for (int i = 0; i < 6; ++i) phis1.push_back(TestFunction::random(1, 2, 2, gen));
    TorusField m0 = make_torus_field(rg);
    for (double& x : m0.v) x = gen.uniform(0.5, 1.5);
    std::vector<TorusFlux> J(2, make_torus_flux(rg));
    for (auto& Jk : J)
      for (double& x : Jk.v) x = gen.uniform(-1.0, 1.0);
    CHECK(weak_ce_residual(integrate_path(m0, J), phis1) <= 1e-8);
  }
}

TEST_CASE("flux embedding rejects wrap-degenerate tori") {
  auto rg = torus(lt::make_zd(1), 2);  // n <= 2 r0: a sweep can lap itself
  TorusFlux J = make_torus_flux(rg);
  J.v[0] = 1.0;
  CHECK_THROWS_AS(embed_flux(J), domain_error);
}
