#pragma once

#include "lot/io.hpp"

namespace lot {

// ---------------------------------------------------------------------------
// Continuum reference for the eps sweep (d = 1)

/// rho(x) = 1 + amplitude cos(2 pi (x - center)) on the unit circle; unit
/// total mass, strictly positive for |amplitude| < 1.
struct Bump {
  double center = 0.0;
  double amplitude = 0.0;

  double density(double x) const;
  /// Lifted distribution function: mass of [0, x], cdf(x + 1) = cdf(x) + 1.
  double cdf(double x) const;
  /// Lifted inverse of cdf, by bisection (the density is bounded away from
  /// zero, so the inverse is smooth).
  double quantile(double q) const;
};

/// Constant-speed displacement interpolation between two bumps on the circle.
/// The matching is the monotone quantile map at the optimal cut: mass q of b0
/// pairs with mass q + cut of b1, with the cut minimizing the quadratic cost
/// (convex, found by golden-section search). value is that cost, the squared
/// quadratic transport distance; the interpolation solves the continuity
/// equation with flux = density * velocity and its action equals value.
struct QuantileGeodesic {
  Bump b0, b1;
  double cut = 0.0;
  double value = 0.0;

  static QuantileGeodesic make(Bump b0, Bump b1);

  double position(double q, double t) const;  // X_t(q), lifted
  double density(double x, double t) const;
  double flux(double x, double t) const;
};

// ---------------------------------------------------------------------------
// eps sweep: discrete minimal actions against the continuum benchmark

struct ConvergeOptions {
  dvec eps_list;  // reciprocals of integers, strictly decreasing
  int K = 12;
  double tol = 1e-7;
  std::string reference_fhom = "closed_form";  // or "solve" (memoized solver)
  int quad_nx = 48, quad_nt = 24;
  int threads = 1;
  bool timing = false;  // wall-clock per row; off keeps output reproducible
};

struct ConvergeRow {
  double eps = 0.0;
  int n = 0;
  double value = 0.0;      // MA_eps
  double reference = 0.0;  // continuum action
  double gap = 0.0;        // |value - reference| / |reference|
  bool converged = false;
  long long iterations = 0;
  double runtime_s = 0.0;
};

struct ConvergeReport {
  std::vector<ConvergeRow> rows;
  double reference = 0.0;  // quadrature of f_hom along the geodesic
  double w2sq = 0.0;       // quantile-matching cost of the boundary pair
  bool trend_known = false;
  bool nonincreasing = false;
  bool strictly_decreasing = false;
  bool all_converged = false;
};

/// Solves the boundary-value least-action problem at every eps in the list
/// and compares with the continuum action of the quantile geodesic between
/// the two bump measures. The f_hom under the quadrature is either the
/// nearest-neighbor closed form (validated against the graph and cost) or a
/// memoized cell-problem solve. Throws usage_error on unusable parameter
/// combinations; solver non-convergence is flagged in the rows, not thrown.
ConvergeReport run_converge(std::shared_ptr<const PeriodicGraph> g,
                            std::shared_ptr<const CostFunction> F, const MeasureSpec& m0,
                            const MeasureSpec& m1, const ConvergeOptions& opt);

// ---------------------------------------------------------------------------
// Mesh diagnostics

struct MeshOptions {
  std::string version = "weighted_linear";  // or "minimum"
  double lambda = 0.5;                      // weighted-linear weight
  std::string selector;                     // "", "tie", "balancing"
  std::vector<RhoJPoint> points;            // empty: 5 random points from seed
  std::uint64_t seed = 2026;
  double tol = 1e-9;  // solver tolerance for the cell comparisons
};

struct MeshCheckRow {
  std::string check;
  std::string detail;
  std::optional<double> value;
  std::optional<double> reference;
  std::string status;  // PASS, FAIL, FEASIBLE, INFEASIBLE, SKIPPED, FLAGGED
};

/// Identity-sum deviation, per-vertex isometry deviations (weighted-linear),
/// the exact-rational weight feasibility verdict with certificate, isotropy
/// spreads at the sample points, and cell-problem values against the
/// continuum density |j|^2 / m(rho), all on the linear mobility.
std::vector<MeshCheckRow> run_mesh_checks(FVPartition part, const MeshOptions& opt);

// ---------------------------------------------------------------------------
// File validation

struct ValidateRow {
  std::string file;
  std::string kind;  // graph, cost, mesh, or "?" when unrecognized
  std::string check;
  std::string detail;
  std::string status;  // PASS, WARN, FAIL
};

/// Runs the loader validations on each file (kind sniffed from the JSON) and
/// summarizes: graph structure, R0, degree, connectivity; mesh geometry and
/// identity sum; cost reference point and a fitted growth certificate. Cost
/// files validate against the last graph file listed before them, or the
/// graph_hint path when none is. Failures become FAIL rows, not exceptions.
std::vector<ValidateRow> run_validate(const std::vector<std::string>& files,
                                      const std::string& graph_hint, std::uint64_t seed);

}  // namespace lot
