#pragma once

#include "lot/embedding.hpp"

namespace lot {

/// Kantorovich-Rubinstein distance between scalar cube measures on one grid:
/// the exact optimum of
///   sup { sum psi (mu1 - mu2) : |psi(z)| <= 1,
///         |psi(z) - psi(z')| <= dist(z,z') for |z - z'|_1 = 1 }
/// with dist the torus l2 distance between cube centers (eps for every
/// neighbor pair). Solved as the dual min-cost flow on the grid network
/// augmented with unit-cost creation/destruction arcs, which encode the cap;
/// successive shortest paths terminate at the exact combinatorial optimum.
/// Mismatched grids are a domain error. Totals may differ (the cap pays for
/// the imbalance).
double kr_distance(const TorusMeasure& mu1, const TorusMeasure& mu2);

/// Balanced transshipment distance on the same grid metric, without the cap
/// arcs: the grid W1. Requires equal totals (domain error otherwise). When
/// no potential needs to exceed the cap, kr_distance coincides with it.
double grid_w1(const TorusMeasure& mu1, const TorusMeasure& mu2);

}  // namespace lot
