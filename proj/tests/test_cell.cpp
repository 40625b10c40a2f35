#include <cmath>
#include <memory>

#include "doctest.h"
#include "helpers.hpp"
#include "lot/cell.hpp"
#include "lot/cost.hpp"

using namespace lot;

namespace {

std::shared_ptr<WpMeanCost> wp(std::shared_ptr<const PeriodicGraph> g, double p,
                               Mean::Kind k = Mean::Kind::arithmetic) {
  return std::make_shared<WpMeanCost>(std::move(g), p, Mean{k});
}

// Z^2 rails plus one diagonal (1,-1) rail: the smallest stencil whose zoomed
// copies pick up orientation flips, and it has a one-dimensional kernel.
std::shared_ptr<const PeriodicGraph> make_diag() {
  std::vector<stencil_edge> edges = {
      {0, {1, 0}, 0},
      {0, {0, 1}, 0},
      {0, {1, -1}, 0},
  };
  return std::make_shared<const PeriodicGraph>(PeriodicGraph::make(2, {"v"}, edges));
}

void check_feasible(const CellSolution& s, const PeriodicGraph& g, const CostFunction& F,
                    double rho, const dvec& j) {
  if (!std::isfinite(s.value)) return;
  dvec dv = divergence(s.J_opt);
  CHECK(linf_norm(dv) <= 1e-10);
  dvec eff = effective_flux(s.J_opt);
  for (int i = 0; i < g.d; ++i) CHECK(std::abs(eff[i] - j[i]) <= 1e-10);
  CHECK(std::abs(vsum(s.m_opt.v) - rho) <= 1e-10 * (1 + rho));
  for (double m : s.m_opt.v) CHECK(m >= -1e-14);
  double re = F.evaluate_periodic(s.m_opt, s.J_opt);
  CHECK(std::abs(re - s.value) <= 1e-10 * (1 + std::abs(s.value)));
}

// Grid search over the (simplex mass, kernel coefficient) chart with
// successive refinement. Independent of the descent solver: it only calls
// the cost evaluator. Usable while (|V| - 1) + nullity <= 2.
double brute_cell(const RepParametrization& rep, const CostFunction& F, double rho,
                  double final_step = 1e-6) {
  const int V = rep.g->fiber_count();
  const int K = rep.nullity;
  REQUIRE(V <= 2);
  REQUIRE(K <= 1);

  auto value = [&](double x, double t) {
    PeriodicField m;
    m.g = rep.g;
    m.v = (V == 1) ? dvec{rho} : dvec{x, rho - x};
    return F.evaluate_periodic(m, rep.flux(K ? dvec{t} : dvec{}));
  };

  double B = 2.0 * (rho + l1_norm(rep.j) + 1.0);
  double xlo = 0.0, xhi = (V == 2) ? rho : 0.0;
  double tlo = K ? -B : 0.0, thi = K ? B : 0.0;
  double step = std::max({(xhi - xlo), (thi - tlo), 1.0}) / 100.0;

  double bx = 0.5 * (xlo + xhi), bt = 0.5 * (tlo + thi);
  double bf = value(bx, bt);
  while (true) {
    for (double x = xlo; x <= xhi + 1e-18; x += (V == 2) ? step : 2 * (xhi - xlo) + 1) {
      for (double t = tlo; t <= thi + 1e-18; t += K ? step : 2 * (thi - tlo) + 1) {
        double f = value(std::min(x, rho), t);
        if (f < bf) {
          bf = f;
          bx = std::min(x, rho);
          bt = t;
        }
      }
    }
    if (step <= final_step) break;
    xlo = std::max(0.0, bx - 2 * step);
    xhi = std::min(rho, bx + 2 * step);
    tlo = bt - 2 * step;
    thi = bt + 2 * step;
    step /= 10.0;
  }
  return bf;
}

}  // namespace

TEST_CASE("flux parametrization: dimensions, orthonormality, feasibility") {
  auto z1 = lt::make_zd(1);
  auto rep1 = build_parametrization(z1, {3.0});
  CHECK(rep1.rank == 1);
  CHECK(rep1.nullity == 0);
  REQUIRE(rep1.J_part.v.size() == 1);
  CHECK(rep1.J_part.v[0] == doctest::Approx(3.0).epsilon(1e-14));

  auto z2 = lt::make_zd(2);
  auto rep2 = build_parametrization(z2, {1.0, -2.0});
  CHECK(rep2.rank == 2);
  CHECK(rep2.nullity == 0);
  dvec eff2 = effective_flux(rep2.flux({}));
  CHECK(std::abs(eff2[0] - 1.0) <= 1e-12);
  CHECK(std::abs(eff2[1] + 2.0) <= 1e-12);

  auto ladder = lt::make_ladder();
  auto repl = build_parametrization(ladder, {1.0});
  CHECK(repl.nullity >= 1);
  CHECK(repl.rank + repl.nullity == ladder->edge_count());
  for (int a = 0; a < repl.nullity; ++a) {
    CHECK(std::abs(dot(repl.kernel[a], repl.kernel[a]) - 1.0) <= 1e-12);
    for (int b = a + 1; b < repl.nullity; ++b)
      CHECK(std::abs(dot(repl.kernel[a], repl.kernel[b])) <= 1e-12);
  }

  auto diag = make_diag();
  auto repd = build_parametrization(diag, {0.5, 0.25});
  CHECK(repd.nullity == 1);

  rng gen(7);
  for (auto& rep : {repl, repd}) {
    for (int trial = 0; trial < 10; ++trial) {
      dvec coeff(rep.nullity);
      for (double& c : coeff) c = gen.uniform(-3.0, 3.0);
      PeriodicFlux J = rep.flux(coeff);
      CHECK(linf_norm(divergence(J)) <= 1e-12 * (1 + linf_norm(coeff)));
      dvec eff = effective_flux(J);
      for (int i = 0; i < rep.g->d; ++i)
        CHECK(std::abs(eff[i] - rep.j[i]) <= 1e-12 * (1 + linf_norm(coeff)));
    }
  }

  CHECK_THROWS_AS(build_parametrization(z1, {1.0, 2.0}), domain_error);
}

TEST_CASE("cell values on graphs without optimization freedom") {
  auto z1 = lt::make_zd(1);
  auto F2 = wp(z1, 2.0);
  CellSolution s = solve_cell(z1, *F2, 2.0, {3.0});
  CHECK(s.value == doctest::Approx(4.5).epsilon(1e-14));
  CHECK(s.converged);
  CHECK(s.kkt_residual <= 1e-12);
  check_feasible(s, *z1, *F2, 2.0, {3.0});

  // closed form sum_i |j_i|^p / rho^{p-1} on nearest-neighbour lattices
  rng gen(11);
  for (double p : {1.0, 2.0, 4.0}) {
    for (int d : {1, 2}) {
      auto g = lt::make_zd(d);
      auto F = wp(g, p);
      for (int trial = 0; trial < 5; ++trial) {
        double rho = gen.uniform(0.1, 4.0);
        dvec j(d);
        for (double& x : j) x = gen.uniform(-3.0, 3.0);
        double want = 0.0;
        for (double x : j) want += std::pow(std::abs(x), p);
        want /= std::pow(rho, p - 1.0);
        CellSolution sol = solve_cell(g, *F, rho, j);
        CHECK(sol.value == doctest::Approx(want).epsilon(1e-12));
        check_feasible(sol, *g, *F, rho, j);
      }
    }
  }
}

TEST_CASE("zero effective flux minimizes at zero cost and zero flux") {
  auto ladder = lt::make_ladder();
  auto F = wp(ladder, 2.0);
  CellSolution s = solve_cell(ladder, *F, 1.5, {0.0});
  CHECK(s.value == 0.0);
  CHECK(s.converged);
  for (double x : s.J_opt.v) CHECK(x == 0.0);
  check_feasible(s, *ladder, *F, 1.5, {0.0});
}

TEST_CASE("descent matches refined grid search on two-fiber graphs") {
  auto ladder = lt::make_ladder();
  auto rep = build_parametrization(ladder, {1.0});

  auto F2 = wp(ladder, 2.0);
  CellSolution s = solve_cell(rep, *F2, 1.0);
  double oracle = brute_cell(rep, *F2, 1.0);
  CHECK(std::abs(s.value - oracle) <= 1e-6);
  CHECK(s.value == doctest::Approx(1.0).epsilon(1e-6));  // parallel rails add like conductances
  CHECK(s.kkt_residual <= 1e-3);
  check_feasible(s, *ladder, *F2, 1.0, {1.0});

  // geometric mean penalizes uneven splits, so the mass optimum is interior
  auto chain = lt::make_chain2();
  auto Fg = wp(chain, 2.0, Mean::Kind::geometric);
  auto repc = build_parametrization(chain, {0.7});
  CellSolution sc = solve_cell(repc, *Fg, 1.0);
  double oc = brute_cell(repc, *Fg, 1.0);
  CHECK(std::abs(sc.value - oc) <= 1e-6);
  CHECK(sc.value == doctest::Approx(4.0 * 0.7 * 0.7).epsilon(1e-9));
  CHECK(sc.m_opt.v[0] == doctest::Approx(0.5).epsilon(1e-4));
  check_feasible(sc, *chain, *Fg, 1.0, {0.7});

  // p = 1 exercises the nonsmooth lane end to end
  auto F1 = wp(ladder, 1.0);
  CellSolution s1 = solve_cell(rep, *F1, 1.0);
  double o1 = brute_cell(rep, *F1, 1.0);
  CHECK(std::abs(s1.value - o1) <= 1e-6);
  CHECK(s1.value == doctest::Approx(1.0).epsilon(1e-6));
  check_feasible(s1, *ladder, *F1, 1.0, {1.0});
}

TEST_CASE("empty or degenerate domains are reported, not solved") {
  auto z1 = lt::make_zd(1);
  auto ladder = lt::make_ladder();
  auto F = wp(z1, 2.0);
  auto Fl = wp(ladder, 2.0);

  CellSolution s = solve_cell(z1, *F, 0.0, {1.0});
  CHECK(s.value == inf);
  CHECK(!s.diagnostic.empty());

  CellSolution sl = solve_cell(ladder, *Fl, 0.0, {1.0});
  CHECK(sl.value == inf);
  CHECK(!sl.converged);
  CHECK(!sl.diagnostic.empty());

  CellSolution z = solve_cell(z1, *F, 0.0, {0.0});
  CHECK(z.value == 0.0);
  CHECK(z.converged);

  CHECK_THROWS_AS(solve_cell(z1, *F, -1.0, {0.0}), domain_error);
  CHECK_THROWS_AS(solve_cell(z1, *F, 1.0, {0.0}, 0.0), domain_error);
}

TEST_CASE("value tables: golden points, symmetry, thread determinism") {
  auto z2 = lt::make_zd(2);
  auto F = wp(z2, 2.0);

  auto rows = f_hom_table(z2, *F, {1.0}, {{1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}});
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rows[1].value == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rows[2].value == doctest::Approx(2.0).epsilon(1e-12));
  for (auto& r : rows) CHECK(r.converged);

  // 5x5 grid, even cost: j and -j land on the same value; threads do not
  // change any bit of the result
  std::vector<dvec> grid;
  for (int a = -2; a <= 2; ++a)
    for (int b = -2; b <= 2; ++b) grid.push_back({double(a), double(b)});
  auto t1 = f_hom_table(z2, *F, {1.0, 2.0}, grid, 1e-9, 1);
  auto t4 = f_hom_table(z2, *F, {1.0, 2.0}, grid, 1e-9, 4);
  REQUIRE(t1.size() == 50);
  for (size_t i = 0; i < t1.size(); ++i) {
    CHECK(t1[i].value == t4[i].value);
    CHECK(t1[i].rho == t4[i].rho);
  }
  for (size_t r = 0; r < 2; ++r)
    for (size_t i = 0; i < grid.size(); ++i) {
      size_t mir = grid.size() - 1 - i;  // grid enumeration is centrally symmetric
      CHECK(t1[r * 25 + i].value == doctest::Approx(t1[r * 25 + mir].value).epsilon(1e-12));
    }

  auto single = f_hom_table(z2, *F, {1.5}, {{1.0, -1.0}});
  CellSolution ref = solve_cell(z2, *F, 1.5, {1.0, -1.0});
  CHECK(single[0].value == doctest::Approx(ref.value).epsilon(1e-12));

  auto ladder = lt::make_ladder();
  auto Fl = wp(ladder, 2.0);
  double fwd = solve_cell(ladder, *Fl, 1.3, {0.9}).value;
  double bwd = solve_cell(ladder, *Fl, 1.3, {-0.9}).value;
  CHECK(std::abs(fwd - bwd) <= 2e-9);
}

TEST_CASE("recession rays of the cell value") {
  auto z1 = lt::make_zd(1);
  auto F2 = wp(z1, 2.0);

  // pure flux direction under quadratic cost: quotients escalate
  RecessionReport r = recession_f_hom(z1, *F2, 0.0, {1.0});
  CHECK(r.infinite);
  CHECK(r.first_infinite_t == doctest::Approx(1000.0));

  // pure mass direction: the zero-flux representative is free
  RecessionReport rm = recession_f_hom(z1, *F2, 1.0, {0.0});
  CHECK(!rm.infinite);
  CHECK(rm.estimate == doctest::Approx(0.0).epsilon(1e-12));

  // p = 1 is one-homogeneous: quotient locks to |direction|
  auto F1 = wp(z1, 1.0);
  RecessionReport r1 = recession_f_hom(z1, *F1, 0.0, {1.0});
  CHECK(!r1.infinite);
  CHECK(r1.estimate == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r1.gap <= 1e-12);
  REQUIRE(r1.ts.size() == 3);
  CHECK(r1.ts[0] == doctest::Approx(100.0));
  CHECK(r1.ts[2] == doctest::Approx(10000.0));
}

TEST_CASE("cell value is midpoint convex") {
  auto z1 = lt::make_zd(1);
  auto F = wp(z1, 2.0);

  double f0 = solve_cell(z1, *F, 1.0, {0.0}).value;
  double f2 = solve_cell(z1, *F, 1.0, {2.0}).value;
  double fm = solve_cell(z1, *F, 1.0, {1.0}).value;
  CHECK(f0 == doctest::Approx(0.0));
  CHECK(f2 == doctest::Approx(4.0));
  CHECK(fm == doctest::Approx(1.0));
  CHECK(fm <= 0.5 * (f0 + f2));

  std::vector<std::pair<RhoJ, RhoJ>> same = {{{1.3, {0.7}}, {1.3, {0.7}}}};
  CHECK(verify_convexity(z1, *F, same) <= 1e-12);

  rng gen(23);
  std::vector<std::pair<RhoJ, RhoJ>> pairs;
  for (int i = 0; i < 200; ++i) {
    RhoJ a{gen.uniform(0.3, 3.0), {gen.uniform(-2.0, 2.0)}};
    RhoJ b{gen.uniform(0.3, 3.0), {gen.uniform(-2.0, 2.0)}};
    pairs.push_back({a, b});
  }
  CHECK(verify_convexity(z1, *F, pairs) <= 5e-9);

  auto ladder = lt::make_ladder();
  auto Fl = wp(ladder, 2.0);
  pairs.resize(20);
  CHECK(verify_convexity(ladder, *Fl, pairs) <= 5e-9);
}

TEST_CASE("linear growth of the cell value in the flux") {
  auto z1 = lt::make_zd(1);
  auto F = wp(z1, 2.0);

  rng gen(31);
  std::vector<RhoJ> samples;
  for (int i = 0; i < 80; ++i)
    samples.push_back({gen.uniform(1e-3, 4.0), {gen.uniform(-4.0, 4.0)}});

  double c = 1.0, C = 1.0;
  GrowthCertificate cert = verify_growth_hom(z1, *F, samples, 1e-9, &c, &C);
  CHECK(cert.max_violation <= 1e-12);
  CHECK(!cert.fitted);
  CHECK(cert.n_samples == 80);

  std::vector<RhoJ> zeroj;
  for (int i = 0; i < 10; ++i) zeroj.push_back({gen.uniform(0.1, 2.0), {0.0}});
  double c2 = 5.0, C2 = 0.0;
  CHECK(verify_growth_hom(z1, *F, zeroj, 1e-9, &c2, &C2).max_violation <= 1e-12);

  auto ladder = lt::make_ladder();
  auto Fl = wp(ladder, 2.0);
  std::vector<RhoJ> ls;
  for (int i = 0; i < 60; ++i)
    ls.push_back({gen.uniform(0.2, 4.0), {gen.uniform(-4.0, 4.0)}});
  GrowthCertificate fit = verify_growth_hom(ladder, *Fl, ls, 1e-9);
  CHECK(fit.fitted);
  CHECK(fit.c > 0);
  CHECK(fit.max_violation <= 1e-8);
}

TEST_CASE("zoomed graphs: structure and replicated-data energy identity") {
  auto z1 = lt::make_zd(1);
  std::vector<std::pair<int, int>> map;
  auto zoom3 = zoom_graph(z1, 3, &map);
  CHECK(zoom3->fiber_count() == 3);
  CHECK(zoom3->edge_count() == 3);
  CHECK(zoom3->fiber[1].find("@") != std::string::npos);
  REQUIRE(map.size() == 3);
  for (int r = 0; r < 3; ++r) CHECK(map[r].first == r);

  // orientation flips appear once a stencil offset goes lexicographically
  // negative inside the tile
  auto diag = make_diag();
  std::vector<std::pair<int, int>> dmap;
  auto dz2 = zoom_graph(diag, 2, &dmap);
  CHECK(dz2->fiber_count() == 4);
  CHECK(dz2->edge_count() == 12);
  bool any_flip = false;
  for (auto& [idx, sgn] : dmap) any_flip |= (sgn < 0);
  CHECK(any_flip);

  // F_zoomed(replicated scaled data) == F(data), for arbitrary periodic data
  for (auto& base : {z1, diag, lt::make_ladder()}) {
    const int N = 2, d = base->d, V = base->fiber_count(), E = base->edge_count();
    std::vector<std::pair<int, int>> emap;
    auto zoomed = zoom_graph(base, N, &emap);
    auto F = wp(base, 2.0, Mean::Kind::geometric);
    ZoomedCost zc(zoomed, base, F, N, emap);

    double Nd = std::pow(double(N), d);
    rng gen(47);
    grid_indexer cells(d, N);
    for (int trial = 0; trial < 5; ++trial) {
      PeriodicField m;
      m.g = base;
      m.v.resize(V);
      for (double& x : m.v) x = gen.uniform(0.2, 2.0);
      PeriodicFlux J;
      J.g = base;
      J.v.resize(E);
      for (double& x : J.v) x = gen.uniform(-1.5, 1.5);

      PeriodicField mz;
      mz.g = zoomed;
      mz.v.resize(zoomed->fiber_count());
      PeriodicFlux Jz;
      Jz.g = zoomed;
      Jz.v.resize(zoomed->edge_count());
      for (long long c = 0; c < cells.total; ++c) {
        for (int v = 0; v < V; ++v) mz.v[c * V + v] = m.v[v] / Nd;
        for (int e = 0; e < E; ++e)
          Jz.v[c * E + e] = emap[c * E + e].second * J.v[e] * double(N) / Nd;
      }
      double lhs = zc.evaluate_periodic(mz, Jz);
      double rhs = F->evaluate_periodic(m, J);
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
  }
}

TEST_CASE("cell value is invariant under tiling the fundamental cell") {
  auto z1 = lt::make_zd(1);
  auto F = wp(z1, 2.0);
  RescaleReport r = verify_rescale_invariance(z1, F, 0.5, {{1.0, {1.0}}, {2.0, {0.0}}});
  REQUIRE(r.values.size() == 2);
  CHECK(r.values[0].first == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(r.values[0].second == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.values[1].first == 0.0);
  CHECK(r.values[1].second == 0.0);
  CHECK(r.max_discrepancy <= 1e-6);

  auto ladder = lt::make_ladder();
  auto Fl = wp(ladder, 2.0);
  rng gen(3);
  std::vector<RhoJ> pts;
  for (int i = 0; i < 3; ++i) pts.push_back({gen.uniform(0.5, 2.0), {gen.uniform(-1.5, 1.5)}});
  CHECK(verify_rescale_invariance(ladder, Fl, 0.5, pts).max_discrepancy <= 1e-5);

  // the flip-carrying diagonal stencil must agree too
  auto diag = make_diag();
  auto Fd = wp(diag, 2.0);
  std::vector<RhoJ> dpts = {{1.5, {0.8, -0.4}}, {1.0, {1.0, 1.0}}};
  CHECK(verify_rescale_invariance(diag, Fd, 0.5, dpts).max_discrepancy <= 1e-5);

  CHECK(verify_rescale_invariance(z1, F, 1.0, {{1.0, {1.0}}}).max_discrepancy <= 1e-9);
  CHECK_THROWS_AS(verify_rescale_invariance(z1, F, 0.3, {}), domain_error);
  CHECK_THROWS_AS(verify_rescale_invariance(z1, F, -0.5, {}), domain_error);
}
