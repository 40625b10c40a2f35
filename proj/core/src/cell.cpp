#include "lot/cell.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <deque>
#include <thread>

namespace lot {

namespace {

Eigen::VectorXd to_eigen(const dvec& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

PeriodicField make_field(std::shared_ptr<const PeriodicGraph> g, dvec v) {
  PeriodicField m;
  m.g = std::move(g);
  m.v = std::move(v);
  return m;
}

void sanitize(dvec& g) {
  for (double& x : g) {
    if (std::isnan(x)) x = 0.0;
    x = std::clamp(x, -1e15, 1e15);
  }
}

/// Same kernel, new flux direction. Keeps the SVD work of
/// build_parametrization shared across a sweep of j values.
RepParametrization with_direction(const RepParametrization& base, const dvec& j) {
  RepParametrization rep = base;
  rep.j = j;
  rep.J_part = representative_flux(rep.g, j);
  return rep;
}

}  // namespace

dvec project_simplex(const dvec& x, double s) {
  if (!(s >= 0)) throw domain_error("simplex projection needs a nonnegative total");
  const int n = static_cast<int>(x.size());
  if (n == 0) return {};
  if (s == 0.0) return dvec(n, 0.0);
  dvec u = x;
  std::sort(u.begin(), u.end(), std::greater<double>());
  double cum = 0.0, theta = (vsum(x) - s) / n;
  for (int i = 0; i < n; ++i) {
    cum += u[i];
    double t = (cum - s) / (i + 1);
    if (u[i] - t > 0) theta = t;
  }
  dvec out(n);
  for (int i = 0; i < n; ++i) out[i] = std::max(0.0, x[i] - theta);
  return out;
}

PeriodicFlux RepParametrization::flux(const dvec& coeff) const {
  if (static_cast<int>(coeff.size()) != nullity)
    throw domain_error("kernel coefficient count mismatch");
  PeriodicFlux J = J_part;
  for (int k = 0; k < nullity; ++k)
    for (size_t e = 0; e < J.v.size(); ++e) J.v[e] += coeff[k] * kernel[k][e];
  return J;
}

RepParametrization build_parametrization(std::shared_ptr<const PeriodicGraph> g, const dvec& j) {
  const PeriodicGraph& gr = *g;
  if (static_cast<int>(j.size()) != gr.d) throw domain_error("direction dimension mismatch");
  RepParametrization rep;
  rep.g = g;
  rep.j = j;
  rep.J_part = representative_flux(g, j);

  const int E = gr.edge_count();
  Eigen::MatrixXd A = constraint_matrix(gr);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double thresh = std::max(1e-12, (sv.size() ? sv(0) : 0.0) * 1e-10);
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > thresh) ++rank;
  rep.rank = rank;
  rep.nullity = E - rank;
  rep.kernel.reserve(rep.nullity);
  for (int k = 0; k < rep.nullity; ++k) {
    Eigen::VectorXd col = svd.matrixV().col(rank + k);
    Eigen::VectorXd res = A * col;
    if (res.lpNorm<Eigen::Infinity>() > 1e-12)
      throw domain_error("kernel basis fails the divergence/flux constraints");
    rep.kernel.emplace_back(col.data(), col.data() + E);
  }

  // The particular flux is a signed combination of integer path fluxes; its
  // constraint residual is pure roundoff.
  Eigen::VectorXd r = A * to_eigen(rep.J_part.v);
  for (int i = 0; i < gr.d; ++i) r(gr.fiber_count() + i) -= j[i];
  if (r.lpNorm<Eigen::Infinity>() > 1e-12 * std::max(1.0, linf_norm(j)))
    throw domain_error("particular flux fails the divergence/flux constraints");
  return rep;
}

namespace {

struct Chart {
  const RepParametrization* rep;
  const CostFunction* F;
  double rho;

  double value(const dvec& m, const dvec& c) const {
    return F->evaluate_periodic(make_field(rep->g, m), rep->flux(c));
  }

  double value_grad(const dvec& m, const dvec& c, dvec& gm, dvec& gc) const {
    dvec gJ;
    double f = F->periodic_value_grad(make_field(rep->g, m), rep->flux(c), &gm, &gJ);
    gc.assign(rep->nullity, 0.0);
    for (int k = 0; k < rep->nullity; ++k) gc[k] = dot(gJ, rep->kernel[k]);
    return f;
  }
};

/// Window-of-best-values stopping rule shared by both descent lanes.
struct StopRule {
  double tol;
  std::deque<double> hist;
  double best = inf;

  bool push(double f) {
    best = std::min(best, f);
    hist.push_back(best);
    if (hist.size() > 51) hist.pop_front();
    if (hist.size() < 51 || !std::isfinite(best)) return false;
    return hist.front() - best <= tol * std::max(1.0, std::abs(best));
  }
};

}  // namespace

CellSolution solve_cell(const RepParametrization& rep, const CostFunction& F, double rho,
                        double tol) {
  if (rep.g.get() != F.g.get())
    throw domain_error("parametrization and cost were built for different graphs");
  if (!(rho >= 0)) throw domain_error("cell problem needs rho >= 0");
  if (!(tol > 0)) throw domain_error("tolerance must be positive");

  const int V = rep.g->fiber_count();
  const int K = rep.nullity;
  const double scale = std::max(1.0, rho + l1_norm(rep.j));
  Chart chart{&rep, &F, rho};

  CellSolution out;

  dvec m(V, rho / V), c(K, 0.0);

  if (V == 1 && K == 0) {
    out.value = chart.value(m, c);
    out.m_opt = make_field(rep.g, m);
    out.J_opt = rep.flux(c);
    out.converged = std::isfinite(out.value) || out.value == inf;
    if (out.value == inf) out.diagnostic = "objective is infinite on the whole (pointlike) domain";
    return out;
  }

  // Starting point: cycle a few structured candidates, then random draws.
  // c_min is the coefficient of the minimum-norm flux in the affine slice.
  dvec c_min(K, 0.0);
  for (int k = 0; k < K; ++k) c_min[k] = -dot(rep.kernel[k], rep.J_part.v);
  double f0 = inf;
  {
    std::vector<std::pair<dvec, dvec>> starts;
    starts.push_back({m, c_min});
    starts.push_back({m, dvec(K, 0.0)});
    double mref_sum = vsum(F.m_ref.v);
    if (mref_sum > 0 && static_cast<int>(F.m_ref.v.size()) == V) {
      dvec mr(V);
      for (int v = 0; v < V; ++v) mr[v] = rho * F.m_ref.v[v] / mref_sum;
      starts.push_back({mr, c_min});
    }
    rng gen(0x5eedULL);
    for (int t = 0; t < 60; ++t) {
      dvec mr(V);
      double s = 0.0;
      for (int v = 0; v < V; ++v) {
        mr[v] = -std::log(gen.uniform(1e-12, 1.0));
        s += mr[v];
      }
      for (int v = 0; v < V; ++v) mr[v] *= rho / s;
      dvec cr = c_min;
      for (int k = 0; k < K; ++k) cr[k] += 0.5 * scale * gen.normal();
      starts.push_back({mr, cr});
    }
    for (auto& [ms, cs] : starts) {
      double f = chart.value(ms, cs);
      if (std::isfinite(f)) {
        m = ms;
        c = cs;
        f0 = f;
        break;
      }
    }
  }
  if (!std::isfinite(f0)) {
    out.value = inf;
    out.m_opt = make_field(rep.g, m);
    out.J_opt = rep.flux(c);
    out.diagnostic =
        "no finite feasible point found; the domain is likely empty (e.g. zero mass with "
        "nonzero effective flux)";
    return out;
  }

  const long long cap = 100000;
  StopRule stop{tol, {}, f0};
  double f = f0;
  dvec gm, gc;

  if (F.smooth()) {
    // Projected gradient with backtracking and adaptive step recovery.
    double t = 1.0;
    int fail_streak = 0;
    for (long long it = 1; it <= cap; ++it) {
      out.iterations = it;
      f = chart.value_grad(m, c, gm, gc);
      sanitize(gm);
      sanitize(gc);
      bool accepted = false;
      for (int h = 0; h < 40; ++h) {
        dvec mn = project_simplex([&] {
          dvec y = m;
          for (int v = 0; v < V; ++v) y[v] -= t * gm[v];
          return y;
        }(), rho);
        dvec cn = c;
        for (int k = 0; k < K; ++k) cn[k] -= t * gc[k];
        double d2 = 0.0;
        for (int v = 0; v < V; ++v) d2 += (mn[v] - m[v]) * (mn[v] - m[v]);
        for (int k = 0; k < K; ++k) d2 += (cn[k] - c[k]) * (cn[k] - c[k]);
        if (d2 == 0.0) {
          out.converged = true;
          goto smooth_done;
        }
        double fn = chart.value(mn, cn);
        if (std::isfinite(fn) && fn <= f - 1e-4 * d2 / t) {
          m = std::move(mn);
          c = std::move(cn);
          f = fn;
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (accepted) {
        fail_streak = 0;
        t = std::min(t * 1.25, 1e6);
      } else {
        ++out.restarts;
        t = 1.0;
        if (++fail_streak >= 2) {
          out.converged = true;  // no descent at any step size: stalled at the floor
          break;
        }
      }
      if (stop.push(f)) {
        out.converged = true;
        break;
      }
    }
  smooth_done:;
  } else {
    // Normalized subgradient steps with a diminishing a/k schedule; the
    // iterate may wander, the answer is the best visited point.
    const double a = 0.5 * scale;
    dvec m_best = m, c_best = c;
    double f_best = f0;
    for (long long it = 1; it <= cap; ++it) {
      out.iterations = it;
      f = chart.value_grad(m, c, gm, gc);
      sanitize(gm);
      sanitize(gc);
      if (std::isfinite(f) && f < f_best) {
        f_best = f;
        m_best = m;
        c_best = c;
      }
      double n2 = 0.0;
      for (double x : gm) n2 += x * x;
      for (double x : gc) n2 += x * x;
      n2 = std::sqrt(n2);
      if (n2 == 0.0) {
        out.converged = true;
        break;
      }
      double step = a / static_cast<double>(it) / n2;
      for (int v = 0; v < V; ++v) m[v] -= step * gm[v];
      m = project_simplex(m, rho);
      for (int k = 0; k < K; ++k) c[k] -= step * gc[k];
      if (stop.push(f_best)) {
        out.converged = true;
        break;
      }
    }
    m = std::move(m_best);
    c = std::move(c_best);
    f = f_best;
  }

  // Coordinate pattern search sharpens the last digits when the chart is
  // small; it is the only stage that moves through nonsmooth kinks reliably.
  if ((V - 1) + K <= 6) {
    double r = 0.25 * scale;
    long long evals = 0;
    while (r > 1e-12 * scale && evals < 50000) {
      bool improved = false;
      dvec bm = m, bc = c;
      double bf = f;
      for (int i = 0; i < V + K; ++i) {
        for (int s = -1; s <= 1; s += 2) {
          dvec mn = m, cn = c;
          if (i < V) {
            mn[i] += s * r;
            mn = project_simplex(mn, rho);
          } else {
            cn[i - V] += s * r;
          }
          double fn = chart.value(mn, cn);
          ++evals;
          if (std::isfinite(fn) && fn < bf) {
            bf = fn;
            bm = std::move(mn);
            bc = std::move(cn);
            improved = true;
          }
        }
      }
      if (improved) {
        m = std::move(bm);
        c = std::move(bc);
        f = bf;
      } else {
        r *= 0.55;
      }
    }
    out.iterations += evals;
  }

  out.value = f;
  out.m_opt = make_field(rep.g, m);
  out.J_opt = rep.flux(c);

  double fk = chart.value_grad(m, c, gm, gc);
  (void)fk;
  sanitize(gm);
  sanitize(gc);
  dvec pm(V);
  for (int v = 0; v < V; ++v) pm[v] = m[v] - gm[v];
  pm = project_simplex(pm, rho);
  double res = 0.0;
  for (int v = 0; v < V; ++v) res = std::max(res, std::abs(m[v] - pm[v]));
  for (int k = 0; k < K; ++k) res = std::max(res, std::abs(gc[k]));
  out.kkt_residual = res;
  return out;
}

CellSolution solve_cell(std::shared_ptr<const PeriodicGraph> g, const CostFunction& F, double rho,
                        const dvec& j, double tol) {
  return solve_cell(build_parametrization(std::move(g), j), F, rho, tol);
}

std::vector<CellTableRow> f_hom_table(std::shared_ptr<const PeriodicGraph> g,
                                      const CostFunction& F, const dvec& rho_list,
                                      const std::vector<dvec>& j_grid, double tol, int threads) {
  RepParametrization base = build_parametrization(g, dvec(g->d, 0.0));
  const long long jobs = static_cast<long long>(rho_list.size()) * j_grid.size();
  std::vector<CellTableRow> rows(jobs);

  auto run_one = [&](long long idx) {
    const double rho = rho_list[idx / j_grid.size()];
    const dvec& j = j_grid[idx % j_grid.size()];
    CellSolution s = solve_cell(with_direction(base, j), F, rho, tol);
    rows[idx] = {rho, j, s.value, s.kkt_residual, s.iterations, s.converged};
  };

  if (threads <= 1 || jobs <= 1) {
    for (long long i = 0; i < jobs; ++i) run_one(i);
  } else {
    std::atomic<long long> next{0};
    int n = static_cast<int>(std::min<long long>(threads, jobs));
    std::vector<std::thread> pool;
    pool.reserve(n);
    for (int t = 0; t < n; ++t)
      pool.emplace_back([&] {
        for (long long i = next.fetch_add(1); i < jobs; i = next.fetch_add(1)) run_one(i);
      });
    for (auto& th : pool) th.join();
  }
  return rows;
}

RecessionReport recession_f_hom(std::shared_ptr<const PeriodicGraph> g, const CostFunction& F,
                                double rho_dir, const dvec& j_dir, double t_max, int steps,
                                double tol) {
  if (steps < 2) throw domain_error("recession ladder needs at least two rungs");
  if (!(t_max > 0)) throw domain_error("t_max must be positive");
  const double rho0 = vsum(F.m_ref.v);
  const dvec j0 = effective_flux(F.J_ref);

  RepParametrization base = build_parametrization(g, dvec(g->d, 0.0));
  RecessionReport rep;
  for (int k = steps - 1; k >= 0; --k) rep.ts.push_back(t_max * std::pow(10.0, -k));

  double prev = inf;
  for (double t : rep.ts) {
    dvec j = j0;
    for (int i = 0; i < g->d; ++i) j[i] += t * j_dir[i];
    CellSolution s = solve_cell(with_direction(base, j), F, rho0 + t * rho_dir, tol);
    double q = s.value / t;
    rep.quotients.push_back(q);
    if (!std::isfinite(s.value) || s.value >= 1e12) {
      rep.infinite = true;
      rep.first_infinite_t = t;
      rep.estimate = inf;
      return rep;
    }
    if (std::isfinite(prev) && prev > 0 && q / prev >= 2.0) {
      rep.infinite = true;
      rep.first_infinite_t = t;
      rep.estimate = inf;
      return rep;
    }
    rep.gap = std::isfinite(prev) ? std::abs(q - prev) : inf;
    rep.estimate = q;
    prev = q;
  }
  return rep;
}

double verify_convexity(std::shared_ptr<const PeriodicGraph> g, const CostFunction& F,
                        const std::vector<std::pair<RhoJ, RhoJ>>& pairs, double tol) {
  RepParametrization base = build_parametrization(g, dvec(g->d, 0.0));
  double worst = 0.0;
  for (const auto& [A, B] : pairs) {
    double fa = solve_cell(with_direction(base, A.j), F, A.rho, tol).value;
    double fb = solve_cell(with_direction(base, B.j), F, B.rho, tol).value;
    if (!std::isfinite(fa) || !std::isfinite(fb)) continue;
    dvec jm(g->d);
    for (int i = 0; i < g->d; ++i) jm[i] = 0.5 * (A.j[i] + B.j[i]);
    double fm = solve_cell(with_direction(base, jm), F, 0.5 * (A.rho + B.rho), tol).value;
    worst = std::max(worst, fm - 0.5 * (fa + fb));
  }
  return worst;
}

GrowthCertificate verify_growth_hom(std::shared_ptr<const PeriodicGraph> g, const CostFunction& F,
                                    const std::vector<RhoJ>& samples, double tol,
                                    const double* cand_c, const double* cand_C) {
  RepParametrization base = build_parametrization(g, dvec(g->d, 0.0));
  const int n = static_cast<int>(samples.size());
  std::vector<double> vals(n), jn(n);
  for (int i = 0; i < n; ++i) {
    vals[i] = solve_cell(with_direction(base, samples[i].j), F, samples[i].rho, tol).value;
    jn[i] = l2_norm(samples[i].j);
  }

  GrowthCertificate cert;
  cert.n_samples = n;
  if (cand_c && cand_C) {
    cert.c = *cand_c;
    cert.C = *cand_C;
  } else {
    cert.fitted = true;
    int half = std::max(1, n / 2);
    double cmin = inf;
    for (int i = 0; i < half; ++i)
      if (jn[i] > 0 && std::isfinite(vals[i]))
        cmin = std::min(cmin, (vals[i] + samples[i].rho + 1.0) / jn[i]);
    cert.c = std::isfinite(cmin) ? std::max(1e-12, 0.9 * cmin) : 1e-12;
    double ratio = 0.0;
    for (int i = 0; i < half; ++i)
      if (std::isfinite(vals[i]))
        ratio = std::max(ratio, (cert.c * jn[i] - vals[i]) / (samples[i].rho + 1.0));
    // Same margin policy as the discrete-energy fit: 25% headroom swallows
    // sampling noise while escalating violations still blow past it.
    cert.C = 1.25 * ratio + 0.25;
  }
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(vals[i])) continue;
    cert.max_violation =
        std::max(cert.max_violation, cert.c * jn[i] - cert.C * (samples[i].rho + 1.0) - vals[i]);
  }
  return cert;
}

std::shared_ptr<const PeriodicGraph> zoom_graph(std::shared_ptr<const PeriodicGraph> g, int N,
                                                std::vector<std::pair<int, int>>* raw_to_canonical) {
  const PeriodicGraph& gr = *g;
  if (N < 1) throw domain_error("zoom factor must be a positive integer");
  grid_indexer cells(gr.d, N);
  const int V = gr.fiber_count(), E = gr.edge_count();

  std::vector<std::string> fiber(cells.total * V);
  for (long long cidx = 0; cidx < cells.total; ++cidx) {
    ivec y = cells.coords(cidx);
    std::string tag = "@";
    for (int i = 0; i < gr.d; ++i) tag += (i ? "," : "") + std::to_string(y[i]);
    for (int v = 0; v < V; ++v) fiber[cidx * V + v] = gr.fiber[v] + tag;
  }

  std::vector<stencil_edge> raw(cells.total * E);
  for (long long cidx = 0; cidx < cells.total; ++cidx) {
    ivec y = cells.coords(cidx);
    for (int e = 0; e < E; ++e) {
      const stencil_edge& se = gr.edges[e];
      ivec head = y, carry(gr.d, 0);
      for (int i = 0; i < gr.d; ++i) {
        int h = y[i] + se.dz[i];
        carry[i] = (h >= 0 ? h / N : -((-h + N - 1) / N));
        head[i] = h - carry[i] * N;
      }
      raw[cidx * E + e] = {static_cast<int>(cidx * V + se.a), carry,
                           static_cast<int>(cells.index(head) * V + se.b)};
    }
  }
  auto zoomed = std::make_shared<PeriodicGraph>(
      PeriodicGraph::make(gr.d, std::move(fiber), std::move(raw), raw_to_canonical));
  return zoomed;
}

ZoomedCost::ZoomedCost(std::shared_ptr<const PeriodicGraph> zoomed,
                       std::shared_ptr<const PeriodicGraph> fine_,
                       std::shared_ptr<const CostFunction> F_, int N_,
                       std::vector<std::pair<int, int>> edge_map_)
    : fine(std::move(fine_)), F(std::move(F_)), N(N_), edge_map(std::move(edge_map_)) {
  if (F->g.get() != fine.get()) throw domain_error("wrapped cost was built for a different graph");
  g = std::move(zoomed);
  const int d = fine->d, V = fine->fiber_count(), E = fine->edge_count();
  if (static_cast<long long>(edge_map.size()) != g->edge_count() ||
      g->fiber_count() != static_cast<long long>(V) * [&] {
        long long t = 1;
        for (int i = 0; i < d; ++i) t *= N;
        return t;
      }())
    throw domain_error("zoomed graph does not match the zoom factor");
  for (size_t r = 0; r < edge_map.size(); ++r)
    if (edge_map[r].first != static_cast<int>(r))
      throw domain_error("zoom edge map must preserve edge order");
  kind = F->kind;
  auto cdiv = [&](int x) { return (x + N - 1) / N; };
  R1 = cdiv(F->R1) + cdiv(fine->r0) + 1;

  const double Nd = std::pow(double(N), d);
  grid_indexer cells(d, N);
  m_ref.g = g;
  m_ref.v.assign(g->fiber_count(), 0.0);
  J_ref.g = g;
  J_ref.v.assign(g->edge_count(), 0.0);
  for (long long cidx = 0; cidx < cells.total; ++cidx) {
    for (int v = 0; v < V; ++v) m_ref.v[cidx * V + v] = F->m_ref.v[v] / Nd;
    for (int e = 0; e < E; ++e)
      J_ref.v[cidx * E + e] = edge_map[cidx * E + e].second * F->J_ref.v[e] * double(N) / Nd;
  }
}

double ZoomedCost::evaluate(const FieldWindow& w) const {
  if (w.g != g.get()) throw domain_error("window built for a different graph");
  if (w.w.R < R1) throw domain_error("window smaller than the cost radius");
  const int d = fine->d, V = fine->fiber_count(), E = fine->edge_count();
  const double Nd = std::pow(double(N), d);
  const double Nd1 = Nd / N;
  grid_indexer cells(d, N);
  window_indexer fw(d, F->R1);

  FieldWindow fwin;
  fwin.g = fine.get();
  fwin.w = fw;
  fwin.mass.assign(fw.total * V, 0.0);
  fwin.flux.assign(fw.total * E, 0.0);

  double total = 0.0;
  auto floordiv = [&](int x) { return x >= 0 ? x / N : -((-x + N - 1) / N); };
  for (long long cidx = 0; cidx < cells.total; ++cidx) {
    ivec y = cells.coords(cidx);
    for (long long ui = 0; ui < fw.total; ++ui) {
      ivec u = fw.coords(ui);
      ivec Z(d), yy(d);
      for (int i = 0; i < d; ++i) {
        int a = y[i] + u[i];
        Z[i] = floordiv(a);
        yy[i] = a - Z[i] * N;
      }
      long long yyidx = cells.index(yy);
      for (int v = 0; v < V; ++v)
        fwin.mass[ui * V + v] = w.m(Z, static_cast<int>(yyidx * V + v)) * Nd;
      for (int e = 0; e < E; ++e) {
        long long r = yyidx * E + e;
        int sgn = edge_map[r].second;
        ivec tail = Z;
        if (sgn < 0) {
          // the canonical zoomed edge is the flip; its tail cell sits at the
          // head of the fine edge
          for (int i = 0; i < d; ++i) tail[i] += floordiv(yy[i] + fine->edges[e].dz[i]);
        }
        fwin.flux[ui * E + e] = sgn * w.J(tail, static_cast<int>(r)) * Nd1;
      }
    }
    double f = F->evaluate(fwin);
    if (f == inf) return inf;
    total += f / Nd;
  }
  return total;
}

RescaleReport verify_rescale_invariance(std::shared_ptr<const PeriodicGraph> g,
                                        std::shared_ptr<const CostFunction> F, double eps,
                                        const std::vector<RhoJ>& points, double tol) {
  if (!(eps > 0 && eps <= 1)) throw domain_error("eps must lie in (0, 1]");
  const int N = static_cast<int>(std::lround(1.0 / eps));
  if (std::abs(1.0 / eps - N) > 1e-9) throw domain_error("1/eps must be an integer zoom factor");

  std::vector<std::pair<int, int>> map;
  auto zoomed = zoom_graph(g, N, &map);
  ZoomedCost zc(zoomed, g, F, N, std::move(map));

  RepParametrization coarse = build_parametrization(g, dvec(g->d, 0.0));
  RepParametrization finep = build_parametrization(zoomed, dvec(g->d, 0.0));

  RescaleReport rep;
  for (const RhoJ& pt : points) {
    double v1 = solve_cell(with_direction(coarse, pt.j), *F, pt.rho, tol).value;
    double v2 = solve_cell(with_direction(finep, pt.j), zc, pt.rho, tol).value;
    rep.values.push_back({v1, v2});
    double disc = (v1 == v2) ? 0.0 : std::abs(v1 - v2);
    rep.max_discrepancy = std::max(rep.max_discrepancy, disc);
  }
  return rep;
}

}  // namespace lot
