#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lot/common.hpp"

namespace lot {

/// One geometric edge of the fundamental stencil: (0,a) -- (dz,b), stored in a
/// canonical orientation. The infinite graph carries every integer translate.
struct stencil_edge {
  int a = 0;
  ivec dz;
  int b = 0;
};

/// A vertex of the infinite graph: lattice cell plus fiber index.
struct xvertex {
  ivec z;
  int v = 0;

  bool operator==(const xvertex& o) const { return v == o.v && z == o.z; }
};

/// Z^d-periodic graph described by its fundamental-cell stencil. Immutable
/// after construction; the infinite graph is only ever touched through
/// bounded windows.
struct PeriodicGraph {
  int d = 0;
  std::vector<std::string> fiber;      // labels, indexed by fiber id
  std::vector<stencil_edge> edges;     // canonical orientations
  int r0 = 0;                          // max |dz|_inf over the stencil
  int max_degree = 0;
  bool has_parallel_edges = false;     // multigraph flag, reported by validation

  // Outgoing incidences per fiber: the ordered pairs of E^Q. For edge
  // (a,dz,b), fiber a sees (e,fwd=true) with head (dz,b) and fiber b sees
  // (e,fwd=false) with head (-dz,a). Both exist even when a == b.
  struct incidence {
    int edge = 0;
    bool fwd = true;
  };
  std::vector<std::vector<incidence>> out;

  int fiber_count() const { return static_cast<int>(fiber.size()); }
  int edge_count() const { return static_cast<int>(edges.size()); }

  int tail_fiber(const incidence& i) const { return i.fwd ? edges[i.edge].a : edges[i.edge].b; }
  int head_fiber(const incidence& i) const { return i.fwd ? edges[i.edge].b : edges[i.edge].a; }
  ivec head_offset(const incidence& i) const {
    return i.fwd ? edges[i.edge].dz : ineg(edges[i.edge].dz);
  }

  int fiber_index(const std::string& label) const;

  /// BFS connectivity check of the infinite graph on a window of the given
  /// radius (vertices (z,v), |z|_inf <= radius).
  bool connected_on_window(int radius) const;

  /// Canonicalizes orientations, validates, and derives cached data.
  /// raw_to_canonical (optional out) maps each input entry to its canonical
  /// edge index and the sign of the orientation change (+1 kept, -1 flipped).
  static PeriodicGraph make(int d, std::vector<std::string> fiber,
                            std::vector<stencil_edge> raw,
                            std::vector<std::pair<int, int>>* raw_to_canonical = nullptr);
};

/// Simple path in the infinite graph. steps[i] is the incidence taken from
/// verts[i] to verts[i+1] (it identifies the stencil edge and orientation).
struct Path {
  const PeriodicGraph* g = nullptr;
  std::vector<xvertex> verts;
  std::vector<PeriodicGraph::incidence> steps;

  bool simple() const;
};

/// The graph wrapped onto the discrete torus (Z/nZ)^d x V, eps = 1/n.
struct RescaledGraph {
  std::shared_ptr<const PeriodicGraph> base;
  int n = 1;
  grid_indexer cells;
  bool wrap_marginal = false;  // n <= 2*r0: legal but flagged

  double eps() const { return 1.0 / n; }
  long long vertex_count() const { return cells.total * base->fiber_count(); }
  long long edge_count() const { return cells.total * base->edge_count(); }

  long long vidx(long long cell, int v) const { return cell * base->fiber_count() + v; }
  long long eidx(long long cell, int e) const { return cell * base->edge_count() + e; }

  static RescaledGraph make(std::shared_ptr<const PeriodicGraph> base, int n);
};

/// Fields over one fundamental cell (Z^d-periodic data).
struct PeriodicField {
  std::shared_ptr<const PeriodicGraph> g;
  dvec v;  // size |V|, nonnegative masses
};

struct PeriodicFlux {
  std::shared_ptr<const PeriodicGraph> g;
  dvec v;  // size |stencil|, value on the canonical orientation
};

/// Fields over the torus graph. Storage is cell-major: index = cell * |V| + v
/// for masses and cell * |E| + e for fluxes.
struct TorusField {
  std::shared_ptr<const RescaledGraph> rg;
  dvec v;
};

struct TorusFlux {
  std::shared_ptr<const RescaledGraph> rg;
  dvec v;
};

TorusField make_torus_field(std::shared_ptr<const RescaledGraph> rg);
TorusFlux make_torus_flux(std::shared_ptr<const RescaledGraph> rg);

/// sigma_eps^z: torus shift, psi(x) -> psi(S^z x). Bijective reindexing.
TorusField shift_field(const TorusField& f, const ivec& z);
TorusFlux shift_field(const TorusFlux& f, const ivec& z);

/// Periodic replication of one-cell data onto the torus.
TorusField replicate(const PeriodicField& m, std::shared_ptr<const RescaledGraph> rg);
TorusFlux replicate(const PeriodicFlux& J, std::shared_ptr<const RescaledGraph> rg);

/// tau_eps^z pullback restricted to a centered window of the given radius:
/// masses on cells |y|_inf <= radius, fluxes on edges with tail there.
/// Values wrap periodically. radius must not exceed n.
struct FieldWindow {
  const PeriodicGraph* g = nullptr;
  window_indexer w;
  dvec mass;  // w.total * |V|
  dvec flux;  // w.total * |E|

  double m(const ivec& y, int v) const { return mass[w.index(y) * g->fiber_count() + v]; }
  double J(const ivec& y, int e) const { return flux[w.index(y) * g->edge_count() + e]; }
};

FieldWindow restrict_window(const TorusField& m, const TorusFlux& J, const ivec& z, int radius);

/// Periodic data seen as a (constant-per-cell) window.
FieldWindow periodic_window(const PeriodicField& m, const PeriodicFlux& J, int radius);

}  // namespace lot
