#pragma once

#include <Eigen/Dense>
#include <map>
#include <memory>

#include "lot/periodic_graph.hpp"

namespace lot {

/// Signed sum of outgoing fluxes per fiber of the fundamental cell. For the
/// canonical edge (a,dz,b) the value contributes +J at fiber a and -J at b;
/// translated copies of a rail edge (a == b) cancel exactly.
dvec divergence(const PeriodicFlux& J);

/// Divergence at every torus vertex, indexed like TorusField storage.
dvec divergence(const TorusFlux& J);

/// Eff(J) = 1/2 sum_{E^Q} J(x,y)(y_z - x_z), reduced over the stencil to
/// sum_e J_e dz_e (each geometric edge contributes its two oriented pairs).
dvec effective_flux(const PeriodicFlux& J);

/// Embedded half-sum with vertex positions dz + emb[fiber]; coincides with
/// effective_flux for divergence-free J, for every embedding.
dvec geometric_effective_flux(const PeriodicFlux& J, const std::vector<dvec>& embedding);

/// Finitely supported flux on the infinite graph, keyed by (tail cell, edge).
struct FiniteFlux {
  const PeriodicGraph* g = nullptr;
  std::map<std::pair<ivec, int>, double> vals;

  double at(const ivec& cell, int e) const {
    auto it = vals.find({cell, e});
    return it == vals.end() ? 0.0 : it->second;
  }
};

/// +1 on forward path edges, -1 on reversed ones. Requires a simple path.
FiniteFlux unit_flux_path(const Path& p);

/// Divergence of a finite flux at one vertex of the infinite graph.
double divergence_at(const FiniteFlux& J, const xvertex& x);

/// tilde J_P: the sum of all integer translates of the path flux, projected
/// onto the stencil classes (net signed traversals per class).
PeriodicFlux periodic_unit_flux(const Path& p);

/// BFS path between two vertices of the infinite graph, searched on a
/// centered window. Deterministic (incidence order breaks ties).
Path find_path(std::shared_ptr<const PeriodicGraph> g, const xvertex& from, const xvertex& to,
               int radius);

/// Matrix of the linear map J -> (dive J on X^Q, Eff J); rows |V| + d over the
/// |E|-dimensional edge space. Shared by the divergence solvers and the cell
/// problem parametrization.
Eigen::MatrixXd constraint_matrix(const PeriodicGraph& g);

/// Precomputed path/transfer data for one graph. Immutable and shareable.
struct DivergenceSolver {
  std::shared_ptr<const PeriodicGraph> g;

  // axis_flux[i]: periodic, divergence-free, Eff = e_i (net path traversals).
  std::vector<PeriodicFlux> axis_flux;

  // transfer[v * |V| + w]: omega with dive = 1_v - 1_w, Eff = 0 and
  // ||omega||_inf <= 1 (min-norm solve, sup-norm reduction fallback).
  std::vector<dvec> transfer;

  explicit DivergenceSolver(std::shared_ptr<const PeriodicGraph> graph);

  /// J periodic, divergence-free, Eff(J) = j. Linear in j.
  PeriodicFlux representative_flux(const dvec& j) const;

  /// dive J = rhs (per fiber), Eff(J) = 0, ||J||_inf <= ||rhs||_1 / 2.
  /// Requires sum(rhs) = 0 within 1e-12 * ||rhs||_1.
  PeriodicFlux solve_periodic(const dvec& rhs) const;

 private:
  Eigen::MatrixXd A_;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod_;
};

/// Standalone equivalent of DivergenceSolver::representative_flux: builds the
/// d axis path fluxes and combines them. Cheap, no transfer construction.
PeriodicFlux representative_flux(std::shared_ptr<const PeriodicGraph> g, const dvec& j);

/// dive J = g on the torus, ||J||_inf <= ||g||_1 / 2, support on shortest
/// paths between the positive and negative parts of g (north-west-corner
/// greedy coupling over the lexicographic vertex order).
TorusFlux solve_divergence_local(const TorusField& g);

}  // namespace lot
