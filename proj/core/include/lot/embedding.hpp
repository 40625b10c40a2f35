#pragma once

#include <vector>

#include "lot/dynamics.hpp"

namespace lot {

/// Piecewise-constant-per-cube measure on the torus, cube side eps = 1/n.
/// Scalar measures (comps == 1) store the cube masses of an embedded density;
/// vector measures (comps == d) store the cube-averaged momentum density.
struct TorusMeasure {
  int d = 0;
  int n = 1;
  int comps = 1;
  bool density = false;  // w holds cube-averaged densities, not cube masses
  grid_indexer cells;
  dvec w;  // cells.total * comps, cube-major

  double eps() const { return 1.0 / n; }
  double total() const;  // cube-mass measures only: sum of the masses
  /// Total variation of the piecewise-constant measure: sum |mass| for
  /// cube-mass data, eps^d * sum of per-cube |density|_2 for densities. For
  /// embedded fluxes this is a lower bound of |iota_eps J| (averaging inside
  /// a cube can only cancel).
  double tv() const;
};

/// Zero scalar measure on an n^d cube grid.
TorusMeasure grid_measure(int d, int n);

/// iota_eps m: mass m(x) spread uniformly over the cube of its cell. The cube
/// mass is the sum over the cell's fibers; total mass is preserved exactly.
TorusMeasure embed_density(const TorusField& m);

/// iota_eps J, cube-averaged: each edge drags a unit cube from its tail cell
/// to its head cell and deposits eps * J * dz times the exact time fraction
/// of overlap on every cube it sweeps. The overlap fraction is a product of
/// per-axis triangle functions, piecewise polynomial in the slide parameter,
/// integrated exactly between its breakpoints.
TorusMeasure embed_flux(const TorusFlux& J);

/// Sum over edges of the exact total variation of each edge's embedded
/// contribution, eps * |J| * |dz|_2. An upper bound for |iota_eps J|(T^d)
/// (triangle inequality), and the quantity the lemma-style cap
/// (eps R0 sqrt(d) / 2) * sum_{ordered pairs} |J| dominates edge by edge.
double embedded_flux_tv(const TorusFlux& J);

/// Finite trigonometric sum phi(x) = sum_i A_i cos(2 pi k_i . x + theta_i)
/// with integer frequencies, so cube integrals of phi and of its partial
/// derivatives are exact (products of one-dimensional exponential integrals).
struct TestFunction {
  struct Mode {
    ivec k;
    double amp = 1.0;
    double phase = 0.0;
  };
  int d = 0;
  std::vector<Mode> modes;

  double value(const dvec& x) const;
  dvec gradient(const dvec& x) const;
  /// Integral of phi over the box lo + [0, side]^d (any real base point;
  /// periodicity is automatic for integer frequencies).
  double box_integral(const dvec& lo, double side) const;
  /// Integral of d_i phi over the same box.
  double box_integral_grad(const dvec& lo, double side, int i) const;

  /// Up to max_modes modes with |k|_inf <= max_freq, amplitudes in [-1,1].
  static TestFunction random(int d, int max_modes, int max_freq, rng& r);
};

/// Integral of phi against a scalar cube measure (uniform density per cube).
double integrate(const TorusMeasure& mu, const TestFunction& phi);

/// Integral of grad phi against iota_eps J, computed from the moving-cube
/// definition edge by edge with composite Gauss-Legendre in the slide
/// parameter. Deliberately not the telescoping identity, so the result can
/// serve as an independent probe of the embedded continuity equation.
double flux_pairing(const TorusFlux& J, const TestFunction& phi);

/// Max over intervals and test functions of the weak continuity-equation
/// residual of the embedded path:
///   |( <phi, iota m_{k+1}> - <phi, iota m_k> ) / dt - <grad phi, iota J_k>|
/// (mass drifts along the momentum, so the pairing carries a plus sign on
/// the other side of the identity).
double weak_ce_residual(const DiscretePath& p, const std::vector<TestFunction>& phis);

}  // namespace lot
