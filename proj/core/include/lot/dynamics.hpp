#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "lot/cost.hpp"
#include "lot/periodic_graph.hpp"

namespace lot {

/// Time-discrete candidate solution of the continuity equation on the torus
/// graph: masses at the K+1 nodes of a uniform grid on [t0,t1], one constant
/// flux per interval [t_k, t_{k+1}).
struct DiscretePath {
  std::shared_ptr<const RescaledGraph> rg;
  double t0 = 0.0;
  double t1 = 1.0;
  std::vector<TorusField> m;  // K+1 entries
  std::vector<TorusFlux> J;   // K entries

  int steps() const { return static_cast<int>(J.size()); }
  double dt() const { return (t1 - t0) / steps(); }
};

/// Structural validation (sizes, shared graph, t0 < t1). Throws domain_error
/// on the first violation.
void check_path(const DiscretePath& p);

/// Path sitting still at m with K zero fluxes.
DiscretePath constant_path(std::shared_ptr<const RescaledGraph> rg, const TorusField& m, int K,
                           double t0 = 0.0, double t1 = 1.0);

/// Integrates a flux history into a path: m_{k+1} = m_k - dt * dive J_k.
/// Masses are whatever the integration gives, including negative values;
/// admissibility is the caller's concern.
DiscretePath integrate_path(const TorusField& m0, const std::vector<TorusFlux>& J,
                            double t0 = 0.0, double t1 = 1.0);

struct CEReport {
  double max_residual = 0.0;  // max_k max_x |(m_{k+1}(x) - m_k(x))/dt + dive J_k(x)|
  double mass_drift = 0.0;    // max_k |m_k(X) - m_0(X)|
};

/// Forward-difference continuity-equation residual and total-mass drift.
CEReport ce_residual(const DiscretePath& p);

/// Time-discrete action: sum_k dt * F_eps((m_k + m_{k+1})/2, J_k). The
/// interval mass is the node average (second-order midpoint rule). +inf
/// passes through; negative masses are rejected by the cost itself.
double action(const DiscretePath& p, const CostFunction& F);

struct ActionSolution {
  DiscretePath path;
  double value = inf;
  double residual = 0.0;        // first-order stationarity proxy, see dynamics.cpp
  long long iterations = 0;
  long long domain_rejections = 0;  // trial steps discarded for leaving m >= 0
  bool converged = false;
  std::string diagnostic;
};

/// Least action between two mass distributions with K time steps.
///
/// The decision variable is the stack of K interval fluxes alone: interior
/// masses are eliminated through m_k = m_0 - dt * sum_{l<k} dive J_l, and the
/// endpoint condition m_K = m1 becomes one linear constraint on the stack
/// whose normal equations factor through the (small, dense) vertex Laplacian.
/// Gradient steps are projected back onto that affine set; steps that drive
/// an interior mass negative are rejected by the line search and counted.
///
/// Throws infeasible_error when the endpoint totals differ by more than
/// 1e-12 * max(1, m0(X)), domain_error on malformed input. Non-converged
/// solves are returned flagged, not thrown.
ActionSolution minimal_action(std::shared_ptr<const RescaledGraph> rg, const CostFunction& F,
                              const TorusField& m0, const TorusField& m1, int K,
                              double tol = 1e-7, const DiscretePath* init = nullptr);

struct ContinuumActionReport {
  double value = 0.0;
  bool infinite = false;
  std::string location;  // "t=..., x=(...)" of the first infinite node
};

/// Midpoint-rule quadrature of f_hom(rho, j) over [0,1]^d x [t0,t1] on an
/// n^d space grid and K time slices. rho and flux are sampled at cell/time
/// midpoints; an infinite integrand value short-circuits with its location.
ContinuumActionReport continuum_action_reference(
    int d, int n, int K, double t0, double t1,
    const std::function<double(const dvec& x, double t)>& rho,
    const std::function<dvec(const dvec& x, double t)>& flux,
    const std::function<double(double, const dvec&)>& f_hom);

}  // namespace lot
