#include "lot/periodic_graph.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>

namespace lot {

namespace {

// Canonical orientation: offset lexicographically positive; in-cell edges
// (dz = 0) point from the smaller fiber to the larger one.
bool is_canonical(const stencil_edge& e) {
  if (!is_zero(e.dz)) return e.dz > ineg(e.dz);
  return e.a < e.b;
}

stencil_edge reversed(const stencil_edge& e) { return {e.b, ineg(e.dz), e.a}; }

}  // namespace

int PeriodicGraph::fiber_index(const std::string& label) const {
  for (int i = 0; i < fiber_count(); ++i)
    if (fiber[i] == label) return i;
  throw domain_error("unknown fiber label: " + label);
}

PeriodicGraph PeriodicGraph::make(int d, std::vector<std::string> fiber,
                                  std::vector<stencil_edge> raw,
                                  std::vector<std::pair<int, int>>* raw_to_canonical) {
  if (d < 1) throw domain_error("dimension must be positive");
  if (fiber.empty()) throw domain_error("fiber set must be nonempty");
  {
    std::set<std::string> labels(fiber.begin(), fiber.end());
    if (labels.size() != fiber.size()) throw domain_error("duplicate fiber labels");
  }

  PeriodicGraph g;
  g.d = d;
  g.fiber = std::move(fiber);
  if (raw_to_canonical) raw_to_canonical->clear();

  for (auto& e : raw) {
    if (static_cast<int>(e.dz.size()) != d) throw domain_error("edge offset has wrong dimension");
    if (e.a < 0 || e.a >= g.fiber_count() || e.b < 0 || e.b >= g.fiber_count())
      throw domain_error("edge references unknown fiber");
    if (e.a == e.b && is_zero(e.dz)) throw domain_error("self-loop edge (dz = 0, equal fibers)");
    stencil_edge c = e;
    int sgn = 1;
    if (!is_canonical(c)) {
      c = reversed(c);
      sgn = -1;
    }
    g.edges.push_back(c);
    if (raw_to_canonical)
      raw_to_canonical->push_back({static_cast<int>(g.edges.size()) - 1, sgn});
  }
  if (g.edges.empty()) throw domain_error("stencil must contain at least one edge");

  // Parallel edges: identical canonical entries. Allowed, flagged.
  {
    auto sorted = g.edges;
    std::sort(sorted.begin(), sorted.end(), [](const stencil_edge& x, const stencil_edge& y) {
      return std::tuple(x.a, x.dz, x.b) < std::tuple(y.a, y.dz, y.b);
    });
    for (size_t i = 1; i < sorted.size(); ++i)
      if (std::tuple(sorted[i].a, sorted[i].dz, sorted[i].b) ==
          std::tuple(sorted[i - 1].a, sorted[i - 1].dz, sorted[i - 1].b))
        g.has_parallel_edges = true;
  }

  g.r0 = 0;
  for (const auto& e : g.edges) g.r0 = std::max(g.r0, inf_norm(e.dz));

  g.out.assign(g.fiber_count(), {});
  for (int e = 0; e < g.edge_count(); ++e) {
    g.out[g.edges[e].a].push_back({e, true});
    g.out[g.edges[e].b].push_back({e, false});
  }
  g.max_degree = 0;
  for (const auto& inc : g.out) g.max_degree = std::max(g.max_degree, static_cast<int>(inc.size()));

  if (!g.connected_on_window(std::max(3 * g.r0, g.r0 * (g.fiber_count() + 2) + 2)))
    throw domain_error("periodic graph is not connected");

  return g;
}

bool PeriodicGraph::connected_on_window(int radius) const {
  window_indexer w(d, radius);
  const long long nv = w.total * fiber_count();
  std::vector<char> seen(nv, 0);
  std::queue<long long> q;
  auto id = [&](const ivec& z, int v) { return w.index(z) * fiber_count() + v; };

  ivec origin(d, 0);
  q.push(id(origin, 0));
  seen[id(origin, 0)] = 1;
  long long count = 1;
  while (!q.empty()) {
    long long cur = q.front();
    q.pop();
    int v = static_cast<int>(cur % fiber_count());
    ivec z = w.coords(cur / fiber_count());
    for (const auto& inc : out[v]) {
      ivec zh = iadd(z, head_offset(inc));
      if (!w.contains(zh)) continue;
      long long h = id(zh, head_fiber(inc));
      if (!seen[h]) {
        seen[h] = 1;
        ++count;
        q.push(h);
      }
    }
  }
  // Connectivity of the infinite graph: every vertex in the inner third of the
  // window must be reachable (boundary vertices may be cut off by the window).
  int inner = radius / 3;
  window_indexer wi(d, inner);
  for (long long i = 0; i < wi.total; ++i) {
    ivec z = wi.coords(i);
    for (int v = 0; v < fiber_count(); ++v)
      if (!seen[id(z, v)]) return false;
  }
  (void)count;
  return true;
}

bool Path::simple() const {
  for (size_t i = 0; i < verts.size(); ++i)
    for (size_t j = i + 1; j < verts.size(); ++j)
      if (verts[i] == verts[j]) return false;
  return true;
}

RescaledGraph RescaledGraph::make(std::shared_ptr<const PeriodicGraph> base, int n) {
  if (n < 1) throw domain_error("1/eps must be a positive integer");
  RescaledGraph rg;
  rg.n = n;
  rg.cells = grid_indexer(base->d, n);
  // Reject edges that wrap onto themselves (torus self-loops).
  for (const auto& e : base->edges) {
    bool wraps = (e.a == e.b);
    for (int c : e.dz) wraps = wraps && (c % n == 0);
    if (wraps) throw domain_error("edge wraps onto itself on the torus; need finer eps");
  }
  rg.wrap_marginal = (n <= 2 * base->r0);
  rg.base = std::move(base);
  return rg;
}

TorusField make_torus_field(std::shared_ptr<const RescaledGraph> rg) {
  TorusField f;
  f.v.assign(rg->vertex_count(), 0.0);
  f.rg = std::move(rg);
  return f;
}

TorusFlux make_torus_flux(std::shared_ptr<const RescaledGraph> rg) {
  TorusFlux f;
  f.v.assign(rg->edge_count(), 0.0);
  f.rg = std::move(rg);
  return f;
}

namespace {

template <typename T>
T shifted(const T& f, const ivec& z, int per_cell) {
  const auto& rg = *f.rg;
  T out = f;
  for (long long c = 0; c < rg.cells.total; ++c) {
    long long src = rg.cells.index(iadd(rg.cells.coords(c), z));
    for (int k = 0; k < per_cell; ++k) out.v[c * per_cell + k] = f.v[src * per_cell + k];
  }
  return out;
}

}  // namespace

TorusField shift_field(const TorusField& f, const ivec& z) {
  return shifted(f, z, f.rg->base->fiber_count());
}

TorusFlux shift_field(const TorusFlux& f, const ivec& z) {
  return shifted(f, z, f.rg->base->edge_count());
}

TorusField replicate(const PeriodicField& m, std::shared_ptr<const RescaledGraph> rg) {
  TorusField f = make_torus_field(rg);
  int nv = rg->base->fiber_count();
  for (long long c = 0; c < rg->cells.total; ++c)
    for (int v = 0; v < nv; ++v) f.v[c * nv + v] = m.v[v];
  return f;
}

TorusFlux replicate(const PeriodicFlux& J, std::shared_ptr<const RescaledGraph> rg) {
  TorusFlux f = make_torus_flux(rg);
  int ne = rg->base->edge_count();
  for (long long c = 0; c < rg->cells.total; ++c)
    for (int e = 0; e < ne; ++e) f.v[c * ne + e] = J.v[e];
  return f;
}

FieldWindow restrict_window(const TorusField& m, const TorusFlux& J, const ivec& z, int radius) {
  const auto& rg = *m.rg;
  if (radius > rg.n) throw domain_error("window radius exceeds torus period");
  FieldWindow fw;
  fw.g = rg.base.get();
  fw.w = window_indexer(rg.base->d, radius);
  int nv = rg.base->fiber_count(), ne = rg.base->edge_count();
  fw.mass.resize(fw.w.total * nv);
  fw.flux.resize(fw.w.total * ne);
  for (long long i = 0; i < fw.w.total; ++i) {
    long long cell = rg.cells.index(iadd(z, fw.w.coords(i)));
    for (int v = 0; v < nv; ++v) fw.mass[i * nv + v] = m.v[cell * nv + v];
    for (int e = 0; e < ne; ++e) fw.flux[i * ne + e] = J.v[cell * ne + e];
  }
  return fw;
}

FieldWindow periodic_window(const PeriodicField& m, const PeriodicFlux& J, int radius) {
  FieldWindow fw;
  fw.g = m.g.get();
  fw.w = window_indexer(m.g->d, radius);
  int nv = m.g->fiber_count(), ne = m.g->edge_count();
  fw.mass.resize(fw.w.total * nv);
  fw.flux.resize(fw.w.total * ne);
  for (long long i = 0; i < fw.w.total; ++i) {
    for (int v = 0; v < nv; ++v) fw.mass[i * nv + v] = m.v[v];
    for (int e = 0; e < ne; ++e) fw.flux[i * ne + e] = J.v[e];
  }
  return fw;
}

}  // namespace lot
