#pragma once

#include <utility>

#include "lot/dynamics.hpp"

namespace lot {

/// R_delta: convex combination with an eps-scaled periodic reference,
///   m -> (1-delta) m + delta eps^d m_ref,  J -> (1-delta) J + delta eps^{d-1} J_ref,
/// the scaling under which the reference pair keeps its one-cell energy. For
/// a divergence-free reference this preserves solutions of the continuity
/// equation and total mass (when the reference total is 1). delta must lie
/// strictly in (0,1).
std::pair<TorusField, TorusFlux> tilt_pair(const TorusField& m, const TorusFlux& J, double delta,
                                           const PeriodicField& m_ref, const PeriodicFlux& J_ref);

/// Same, taking the reference pair registered in the cost.
std::pair<TorusField, TorusFlux> tilt_pair(const TorusField& m, const TorusFlux& J, double delta,
                                           const CostFunction& F);

/// Tilts every mass slice and every interval flux of a path.
DiscretePath tilt_path(const DiscretePath& p, double delta, const CostFunction& F);

/// Discrete torus heat kernel: cube integrals of the periodized Gaussian of
/// variance 2*lambda (erf differences, separable), images summed out to
/// |image| <= 6 sqrt(lambda) + 1 where the truncated relative mass is below
/// 1e-14 at any usable lambda, then renormalized so the weights sum to 1.
/// All n^d weights are strictly positive.
struct SpaceKernel {
  int d = 0;
  int n = 1;
  grid_indexer cells;
  dvec w;  // per cell offset
  double min_weight = 0.0;
};

SpaceKernel space_kernel(int d, int n, double lambda);

/// S_lambda: convolution of the cell index with space_kernel's weights, the
/// same weights for masses and fluxes. A convex combination of torus shifts,
/// so shift-invariant convex energies never increase, and it commutes with
/// shifts exactly (the per-output summation order does not depend on the
/// output cell). lambda <= 0 is a domain error.
TorusField smooth_space(const TorusField& m, double lambda);
TorusFlux smooth_space(const TorusFlux& J, double lambda);
DiscretePath smooth_space(const DiscretePath& p, double lambda);

/// T_tau: moving average over [t - tau, t + tau] of the piecewise-affine
/// interpolation, restricted to the shrunk interval [t0 + tau, t1 - tau].
/// With tau = r * dt this is the trapezoid-weighted window
///   (1/2r) * [1/2, 1, ..., 1, 1/2]
/// applied to node masses and interval fluxes alike, which preserves the
/// forward-difference continuity equation term by term. tau must be a
/// multiple of dt and leave at least one interval, else domain error.
DiscretePath smooth_time(const DiscretePath& p, double tau);

}  // namespace lot
