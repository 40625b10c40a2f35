#include "lot/divergence.hpp"

#include <algorithm>
#include <queue>

namespace lot {

namespace {

// Window radius that provably contains BFS paths between nearby vertices:
// any two vertices within a couple of cells of the origin are connected
// through at most |V|+2 cell hops of reach r0 each.
int search_radius(const PeriodicGraph& g) {
  return std::max(3 * g.r0, g.r0 * (g.fiber_count() + 2) + 2);
}

}  // namespace

dvec divergence(const PeriodicFlux& J) {
  const PeriodicGraph& g = *J.g;
  dvec out(g.fiber_count(), 0.0);
  for (int e = 0; e < g.edge_count(); ++e) {
    out[g.edges[e].a] += J.v[e];
    out[g.edges[e].b] -= J.v[e];
  }
  return out;
}

dvec divergence(const TorusFlux& J) {
  const RescaledGraph& rg = *J.rg;
  const PeriodicGraph& g = *rg.base;
  dvec out(rg.vertex_count(), 0.0);
  for (long long c = 0; c < rg.cells.total; ++c) {
    ivec z = rg.cells.coords(c);
    for (int e = 0; e < g.edge_count(); ++e) {
      double val = J.v[rg.eidx(c, e)];
      if (val == 0.0) continue;
      out[rg.vidx(c, g.edges[e].a)] += val;
      out[rg.vidx(rg.cells.index(iadd(z, g.edges[e].dz)), g.edges[e].b)] -= val;
    }
  }
  return out;
}

dvec effective_flux(const PeriodicFlux& J) {
  const PeriodicGraph& g = *J.g;
  dvec eff(g.d, 0.0);
  for (int e = 0; e < g.edge_count(); ++e)
    for (int i = 0; i < g.d; ++i) eff[i] += J.v[e] * g.edges[e].dz[i];
  return eff;
}

dvec geometric_effective_flux(const PeriodicFlux& J, const std::vector<dvec>& embedding) {
  const PeriodicGraph& g = *J.g;
  if (static_cast<int>(embedding.size()) != g.fiber_count())
    throw domain_error("embedding size must match fiber count");
  dvec eff(g.d, 0.0);
  for (int e = 0; e < g.edge_count(); ++e) {
    const stencil_edge& se = g.edges[e];
    for (int i = 0; i < g.d; ++i)
      eff[i] += J.v[e] * (se.dz[i] + embedding[se.b][i] - embedding[se.a][i]);
  }
  return eff;
}

FiniteFlux unit_flux_path(const Path& p) {
  if (!p.simple()) throw domain_error("unit_flux_path requires a simple path");
  FiniteFlux f;
  f.g = p.g;
  for (size_t i = 0; i < p.steps.size(); ++i) {
    const auto& inc = p.steps[i];
    const ivec& tail_cell = inc.fwd ? p.verts[i].z : p.verts[i + 1].z;
    f.vals[{tail_cell, inc.edge}] += inc.fwd ? 1.0 : -1.0;
  }
  return f;
}

double divergence_at(const FiniteFlux& J, const xvertex& x) {
  const PeriodicGraph& g = *J.g;
  double s = 0.0;
  for (const auto& inc : g.out[x.v]) {
    if (inc.fwd) {
      s += J.at(x.z, inc.edge);
    } else {
      s -= J.at(iadd(x.z, g.head_offset(inc)), inc.edge);
    }
  }
  return s;
}

PeriodicFlux periodic_unit_flux(const Path& p) {
  if (!p.simple()) throw domain_error("periodic_unit_flux requires a simple path");
  PeriodicFlux J;
  J.g = std::shared_ptr<const PeriodicGraph>(std::shared_ptr<const PeriodicGraph>(), p.g);
  J.v.assign(p.g->edge_count(), 0.0);
  for (const auto& inc : p.steps) J.v[inc.edge] += inc.fwd ? 1.0 : -1.0;
  return J;
}

Path find_path(std::shared_ptr<const PeriodicGraph> g, const xvertex& from, const xvertex& to,
               int radius) {
  const PeriodicGraph& gr = *g;
  window_indexer w(gr.d, radius);
  if (!w.contains(from.z) || !w.contains(to.z))
    throw domain_error("find_path endpoints must lie in the search window");
  const int V = gr.fiber_count();
  auto id = [&](const xvertex& x) { return w.index(x.z) * V + x.v; };

  std::vector<long long> parent(w.total * V, -1);
  std::vector<PeriodicGraph::incidence> via(w.total * V);
  std::vector<char> seen(w.total * V, 0);
  std::queue<xvertex> q;
  q.push(from);
  seen[id(from)] = 1;
  bool found = (from == to);
  while (!q.empty() && !found) {
    xvertex x = q.front();
    q.pop();
    for (const auto& inc : gr.out[x.v]) {
      xvertex y{iadd(x.z, gr.head_offset(inc)), gr.head_fiber(inc)};
      if (!w.contains(y.z)) continue;
      long long yid = id(y);
      if (seen[yid]) continue;
      seen[yid] = 1;
      parent[yid] = id(x);
      via[yid] = inc;
      if (y == to) {
        found = true;
        break;
      }
      q.push(y);
    }
  }
  if (!found) throw infeasible_error("find_path: target unreachable within window");

  Path p;
  p.g = g.get();
  std::vector<xvertex> rev{to};
  std::vector<PeriodicGraph::incidence> rsteps;
  long long cur = id(to);
  while (cur != id(from)) {
    rsteps.push_back(via[cur]);
    cur = parent[cur];
    ivec z = w.coords(cur / V);
    rev.push_back({z, static_cast<int>(cur % V)});
  }
  p.verts.assign(rev.rbegin(), rev.rend());
  p.steps.assign(rsteps.rbegin(), rsteps.rend());
  return p;
}

Eigen::MatrixXd constraint_matrix(const PeriodicGraph& g) {
  const int V = g.fiber_count(), E = g.edge_count();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(V + g.d, E);
  for (int e = 0; e < E; ++e) {
    A(g.edges[e].a, e) += 1.0;
    A(g.edges[e].b, e) -= 1.0;
    for (int i = 0; i < g.d; ++i) A(V + i, e) = g.edges[e].dz[i];
  }
  return A;
}

namespace {

Eigen::VectorXd to_eigen(const dvec& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<long>(v.size()));
}

dvec from_eigen(const Eigen::VectorXd& v) { return dvec(v.data(), v.data() + v.size()); }

}  // namespace

DivergenceSolver::DivergenceSolver(std::shared_ptr<const PeriodicGraph> graph) : g(std::move(graph)) {
  const PeriodicGraph& gr = *g;
  const int V = gr.fiber_count(), E = gr.edge_count();
  A_ = constraint_matrix(gr);
  const Eigen::MatrixXd& A = A_;
  cod_.compute(A_);

  const int radius = search_radius(gr);
  axis_flux.reserve(gr.d);
  for (int i = 0; i < gr.d; ++i) {
    ivec ei(gr.d, 0);
    ei[i] = 1;
    Path p = find_path(g, {ivec(gr.d, 0), 0}, {ei, 0}, radius);
    PeriodicFlux J = periodic_unit_flux(p);
    J.g = g;
    axis_flux.push_back(std::move(J));
  }

  // Transfer fluxes omega^{vw}: dive = 1_v - 1_w, Eff = 0, sup norm at most 1.
  // The minimum-norm solve usually certifies directly; otherwise alternate
  // projections between the sup-norm ball and the affine constraint set, and
  // as a last resort take the integer path flux (0,v) -> (0,w).
  transfer.assign(static_cast<size_t>(V) * V, dvec(E, 0.0));
  for (int v = 0; v < V; ++v) {
    for (int w = 0; w < V; ++w) {
      if (v == w) continue;
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(V + gr.d);
      rhs(v) = 1.0;
      rhs(w) = -1.0;
      Eigen::VectorXd omega = cod_.solve(rhs);
      if ((A * omega - rhs).lpNorm<Eigen::Infinity>() > 1e-10)
        throw infeasible_error("transfer flux system inconsistent");
      if (omega.lpNorm<Eigen::Infinity>() > 1.0 + 1e-13) {
        Eigen::VectorXd x = omega;
        bool ok = false;
        for (int it = 0; it < 5000; ++it) {
          x = x.cwiseMax(-1.0).cwiseMin(1.0);
          x -= cod_.solve((A * x - rhs).eval());
          if ((A * x - rhs).lpNorm<Eigen::Infinity>() <= 1e-13 &&
              x.lpNorm<Eigen::Infinity>() <= 1.0 + 1e-13) {
            ok = true;
            break;
          }
        }
        if (ok) {
          omega = x;
        } else {
          Path p = find_path(g, {ivec(gr.d, 0), v}, {ivec(gr.d, 0), w}, radius);
          PeriodicFlux J = periodic_unit_flux(p);
          omega = to_eigen(J.v);
          if ((A * omega - rhs).lpNorm<Eigen::Infinity>() > 1e-12 ||
              omega.lpNorm<Eigen::Infinity>() > 1.0 + 1e-13)
            throw infeasible_error("no unit-sup-norm transfer flux found for fiber pair");
        }
      }
      transfer[static_cast<size_t>(v) * V + w] = from_eigen(omega);
    }
  }
}

PeriodicFlux DivergenceSolver::representative_flux(const dvec& j) const {
  const PeriodicGraph& gr = *g;
  if (static_cast<int>(j.size()) != gr.d) throw domain_error("direction dimension mismatch");
  PeriodicFlux J;
  J.g = g;
  J.v.assign(gr.edge_count(), 0.0);
  for (int i = 0; i < gr.d; ++i)
    for (int e = 0; e < gr.edge_count(); ++e) J.v[e] += j[i] * axis_flux[i].v[e];
  return J;
}

PeriodicFlux representative_flux(std::shared_ptr<const PeriodicGraph> g, const dvec& j) {
  const PeriodicGraph& gr = *g;
  if (static_cast<int>(j.size()) != gr.d) throw domain_error("direction dimension mismatch");
  const int radius = search_radius(gr);
  PeriodicFlux J;
  J.g = g;
  J.v.assign(gr.edge_count(), 0.0);
  for (int i = 0; i < gr.d; ++i) {
    if (j[i] == 0.0) continue;
    ivec ei(gr.d, 0);
    ei[i] = 1;
    Path p = find_path(g, {ivec(gr.d, 0), 0}, {ei, 0}, radius);
    PeriodicFlux axis = periodic_unit_flux(p);
    for (int e = 0; e < gr.edge_count(); ++e) J.v[e] += j[i] * axis.v[e];
  }
  return J;
}

PeriodicFlux DivergenceSolver::solve_periodic(const dvec& rhs) const {
  const PeriodicGraph& gr = *g;
  const int V = gr.fiber_count(), E = gr.edge_count();
  if (static_cast<int>(rhs.size()) != V) throw domain_error("rhs size must match fiber count");
  double total = vsum(rhs), scale = std::max(1.0, l1_norm(rhs));
  if (std::abs(total) > 1e-12 * scale)
    throw infeasible_error("solve_divergence_periodic: rhs must sum to zero");

  // North-west-corner coupling of the positive part (rows) against the
  // negative part (columns); each matched unit rides one transfer flux.
  std::vector<std::pair<int, double>> pos, neg;
  for (int v = 0; v < V; ++v) {
    if (rhs[v] > 0) pos.push_back({v, rhs[v]});
    if (rhs[v] < 0) neg.push_back({v, -rhs[v]});
  }
  PeriodicFlux J;
  J.g = g;
  J.v.assign(E, 0.0);
  const double tiny = 1e-15 * scale;
  size_t i = 0, k = 0;
  while (i < pos.size() && k < neg.size()) {
    double mass = std::min(pos[i].second, neg[k].second);
    if (mass > 0) {
      const dvec& omega = transfer[static_cast<size_t>(pos[i].first) * V + neg[k].first];
      for (int e = 0; e < E; ++e) J.v[e] += mass * omega[e];
    }
    pos[i].second -= mass;
    neg[k].second -= mass;
    if (pos[i].second <= tiny) ++i;
    if (k < neg.size() && neg[k].second <= tiny) ++k;
  }

  // One least-squares correction folds rounding residue back below 1e-15.
  Eigen::VectorXd target = Eigen::VectorXd::Zero(V + gr.d);
  for (int v = 0; v < V; ++v) target(v) = rhs[v];
  Eigen::VectorXd x = to_eigen(J.v);
  Eigen::VectorXd resid = A_ * x - target;
  if (resid.lpNorm<Eigen::Infinity>() > 0) x -= cod_.solve(resid);
  J.v = from_eigen(x);
  return J;
}

TorusFlux solve_divergence_local(const TorusField& gfield) {
  const RescaledGraph& rg = *gfield.rg;
  const PeriodicGraph& g = *rg.base;
  const int V = g.fiber_count(), E = g.edge_count();
  double total = vsum(gfield.v), scale = std::max(1.0, l1_norm(gfield.v));
  if (std::abs(total) > 1e-12 * scale)
    throw infeasible_error("solve_divergence_local: rhs must sum to zero");

  std::vector<std::pair<long long, double>> pos, neg;
  for (long long idx = 0; idx < static_cast<long long>(gfield.v.size()); ++idx) {
    if (gfield.v[idx] > 0) pos.push_back({idx, gfield.v[idx]});
    if (gfield.v[idx] < 0) neg.push_back({idx, -gfield.v[idx]});
  }

  TorusFlux J = make_torus_flux(gfield.rg);

  // BFS shortest path between two torus vertices; deterministic tie-breaks
  // via incidence order. Adds "mass" along the path.
  auto route = [&](long long src, long long dst, double mass) {
    if (src == dst) return;
    long long nverts = rg.vertex_count();
    std::vector<long long> parent(nverts, -1);
    std::vector<PeriodicGraph::incidence> via(nverts);
    std::vector<char> seen(nverts, 0);
    std::queue<long long> q;
    q.push(src);
    seen[src] = 1;
    bool found = false;
    while (!q.empty() && !found) {
      long long x = q.front();
      q.pop();
      long long cell = x / V;
      ivec z = rg.cells.coords(cell);
      for (const auto& inc : g.out[static_cast<int>(x % V)]) {
        long long ncell = rg.cells.index(iadd(z, g.head_offset(inc)));
        long long y = rg.vidx(ncell, g.head_fiber(inc));
        if (seen[y]) continue;
        seen[y] = 1;
        parent[y] = x;
        via[y] = inc;
        if (y == dst) {
          found = true;
          break;
        }
        q.push(y);
      }
    }
    if (!found) throw infeasible_error("solve_divergence_local: torus not connected");
    for (long long cur = dst; cur != src;) {
      const auto& inc = via[cur];
      long long prev = parent[cur];
      long long tail_cell = inc.fwd ? prev / V : cur / V;
      J.v[rg.eidx(tail_cell, inc.edge)] += inc.fwd ? mass : -mass;
      cur = prev;
    }
  };

  const double tiny = 1e-15 * scale;
  size_t i = 0, k = 0;
  while (i < pos.size() && k < neg.size()) {
    double mass = std::min(pos[i].second, neg[k].second);
    if (mass > 0) route(pos[i].first, neg[k].first, mass);
    pos[i].second -= mass;
    neg[k].second -= mass;
    if (pos[i].second <= tiny) ++i;
    if (k < neg.size() && neg[k].second <= tiny) ++k;
  }
  (void)E;
  return J;
}

}  // namespace lot
