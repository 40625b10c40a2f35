#pragma once

#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "lot/cost.hpp"
#include "lot/periodic_graph.hpp"

namespace lot {

/// One control volume of a periodic finite-volume partition: an open convex
/// polytope given by its vertex list, plus the site that represents it.
/// Sites of adjacent cells must subtend the shared facet orthogonally; that
/// is validated during construction, never assumed.
struct FVCell {
  std::string label;
  dvec site;                  // in [0,1)^d
  std::vector<dvec> vertices;
};

/// Unordered adjacency between cell a and the dz-translate of cell b:
/// site distance, facet area, and the unit normal pointing from a's site
/// toward b's (so it is orthogonal to the facet by the validated property).
struct FVFacet {
  int a = 0;
  ivec dz;
  int b = 0;
  double dist = 0.0;
  double area = 0.0;
  dvec normal;
};

struct FVPartition {
  int d = 0;
  std::vector<FVCell> cells;
  dvec volume;                      // per cell
  std::vector<FVFacet> facets;
  std::vector<std::string> warnings;  // dropped degenerate facets
};

/// Derives volumes and facets from the vertex lists, then validates: cell
/// volumes sum to 1, site differences are orthogonal to the shared facets
/// (1e-9), every facet area is positive. Facets thinner than 1e-12 are
/// dropped with a warning instead of failing. Facet recovery is geometric
/// and covers d = 1 (intervals), d = 2 (convex polygons, vertex order
/// free), and d = 3 (axis-aligned boxes); other shapes must come through
/// the precomputed overload.
FVPartition make_partition(int d, std::vector<FVCell> cells);

/// Tiling and positivity validation only: volumes and facet areas are
/// supplied instead of recovered (distances and normals are still recomputed
/// from the sites), and the orthogonality of the unseen facets is the mesh
/// author's responsibility. Entry point for analytically known geometry and
/// for d > 3.
FVPartition make_partition(int d, std::vector<FVCell> cells, dvec volume,
                           std::vector<FVFacet> facets);

/// The cube partition: one cell per lattice point, 2d axis facets with
/// dist = area = 1.
FVPartition square_mesh(int d);

/// Four congruent triangles per unit square, cut by both diagonals:
/// north {(0,1),(1,1),(1/2,1/2)}, south {(0,0),(1,0),(1/2,1/2)},
/// west {(0,0),(0,1),(1/2,1/2)}, east {(1,0),(1,1),(1/2,1/2)}, each of
/// volume 1/4. The sites sit on the symmetry axes at distance 1/4 from the
/// square boundary: N = (1/2,3/4), S = (1/2,1/4), W = (1/4,1/2),
/// E = (3/4,1/2). That placement makes every site difference orthogonal to
/// the shared facet and produces exact products dist*area = 1/2 across the
/// square edges (e.g. N to the S above, normal e2) and dist*area = 1/4
/// across the in-cell diagonals (e.g. N to E, normal (1,-1)/sqrt(2)).
FVPartition triangle_mesh();

/// The partition's graph plus the geometric annotations its energies need,
/// aligned with the canonical stencil-edge order (normals follow the
/// orientation flips made during canonicalization).
struct FVGraph {
  FVPartition part;
  std::shared_ptr<const PeriodicGraph> g;
  dvec volume;               // per fiber
  dvec dist, area;           // per stencil edge
  std::vector<dvec> normal;  // per stencil edge, unit tail -> head
};

FVGraph build_graph(FVPartition part);

/// Ordered pairs (x, y) are indexed 2 e + 0 for the canonical orientation
/// of stencil edge e and 2 e + 1 for the reverse.
inline int pair_index(int edge, bool fwd) { return 2 * edge + (fwd ? 0 : 1); }

/// M = 1/2 sum over ordered pairs of dist * area * n n^T, which every
/// partition of this kind satisfies with M = Id. deviation is the max-abs
/// entry of M - Id.
struct FVIdentityReport {
  std::vector<dvec> matrix;
  double deviation = 0.0;
};

FVIdentityReport fv_identity(const FVPartition& part);

/// The representative pair realizing a constant continuum state (rho, j) on
/// the partition graph: masses |K_x| rho and fluxes area * (j . n). The
/// divergence and effective-flux checks are evaluated before returning.
struct CandidateRep {
  PeriodicField m;
  PeriodicFlux J;
  double div_inf = 0.0;
  double eff_err = 0.0;
};

CandidateRep candidate_rep(const FVGraph& fg, double rho, const dvec& j);

/// Concave nondecreasing mobility on [0, inf). The derivative is consulted
/// only where a two-point version is declared smooth, and at diagonal
/// arguments by the structure checks below.
struct Mobility {
  std::string label;
  std::function<double(double)> value;
  std::function<double(double)> derivative;

  static Mobility linear();  // rho itself
};

/// Per-facet two-point version of the mobility. The required symmetry
/// m_xy(a, b) = m_yx(b, a) holds by construction: the weighted-linear
/// version m(lambda a + (1 - lambda) b) stores one lambda per stencil edge
/// and uses 1 - lambda on the reverse pair; the minimum version
/// m(min(a, b)) is symmetric outright. Both agree with m on the diagonal.
struct MobilitySpec {
  enum class Version { weighted_linear, minimum };

  Mobility m;
  Version version = Version::weighted_linear;
  dvec lambda;  // per stencil edge, in [0, 1]; unused by minimum

  /// m_xy(a, b) where x is the tail of the ordered pair (edge, fwd).
  double edge_value(int edge, bool fwd, double a, double b) const;
};

MobilitySpec weighted_linear_mobility(const FVGraph& fg, Mobility m, double lambda = 0.5);
MobilitySpec weighted_linear_mobility(const FVGraph& fg, Mobility m, dvec lambda);
MobilitySpec minimum_mobility(Mobility m);

/// F(m, J) = 1/2 sum over both oriented pairs of each stencil edge of
/// (dist / area) J^2 / m_xy(m(x)/|K_x|, m(y)/|K_y|), the finite-volume
/// discretization of |j|^2 / m(rho). Vanishing mobility gives +inf for
/// nonzero flux and 0 otherwise. Reference interior point: m = |K|, J = 0.
struct MobilityCost : CostFunction {
  FVGraph fg;
  MobilitySpec spec;

  MobilityCost(FVGraph fg_, MobilitySpec spec_);

  std::string name() const override;
  bool smooth() const override;
  double evaluate(const FieldWindow& w) const override;
  double periodic_value_grad(const PeriodicField& m, const PeriodicFlux& J, dvec* gm,
                             dvec* gJ) const override;
};

/// Left-hand sides A_x = sum over ordered pairs with tail x of
/// p1 * dist * area * n n^T, where p1 = partial_1 m_xy(rho, rho) / m'(rho)
/// is supplied per ordered pair (see pair_index). The homogenized energy of
/// a smooth version reproduces |j|^2 / m(rho) exactly when every A_x equals
/// |K_x| Id; deviation measures the distance from that in max-abs entries.
/// Values derived from an actual version satisfy the diagonal chain rule
/// p1(x,y) + p1(y,x) = 1; chain_rule_gap reports how far the inputs are
/// from it (raw numeric probes are allowed, so this never throws).
struct IsometryReport {
  std::vector<std::vector<dvec>> matrices;  // per fiber
  dvec deviation;                           // per fiber
  double max_deviation = 0.0;
  double chain_rule_gap = 0.0;
};

IsometryReport isometry_check(const FVGraph& fg, const dvec& p1);

/// Exact feasibility of the isometry equations over weighted-linear
/// weights: unknowns lambda per ordered pair, constraints
/// lambda(x,y) + lambda(y,x) = 1 and A_x = |K_x| Id. The geometry is
/// snapped to rationals first (every dist * area * n_i n_j and |K_x| must
/// sit within 1e-9 of a fraction with denominator <= 1e6; for the built-in
/// meshes they are exact dyadics), so the verdict carries no roundoff. When
/// the system is solvable, free parameters are centered at 1/2 and the
/// returned weights satisfy isometry_check to machine precision; otherwise
/// certificate spells out a linear combination of the constraints with zero
/// left-hand side and nonzero right-hand side.
struct LambdaFeasibility {
  bool feasible = false;
  dvec lambda;              // per ordered pair when feasible
  bool in_unit_interval = false;
  std::string certificate;  // nonempty exactly when infeasible
};

LambdaFeasibility isometry_feasibility(const FVGraph& fg);

/// Supergradient selection for the nonsmooth structure check: for the
/// ordered pair (edge, fwd) at diagonal argument rho, return
/// (p1, p2) in the supergradient of m_xy at (rho, rho). Components must be
/// nonnegative and sum to m'(rho); weighted-linear versions admit only
/// (lambda, 1 - lambda) m'(rho).
using SupergradientSelector =
    std::function<std::pair<double, double>(int edge, bool fwd, double rho, const dvec& j)>;

/// p_m(x) = (1 / |K_x|) sum over neighbors y of
/// (p1(x,y) + p2(y,x)) * dist * area * (n . j)^2. If the selector makes
/// this independent of x, the homogenized energy at (rho, j) matches
/// |j|^2 / m(rho) even for nonsmooth versions. spread = max - min over
/// fibers. An empty selector defaults to the canonical one for the spec's
/// version (weighted-linear weights, or the balanced tie for minimum).
struct IsotropyReport {
  dvec a;  // per fiber
  double spread = 0.0;
};

IsotropyReport isotropy_check(const FVGraph& fg, const MobilitySpec& spec, double rho,
                              const dvec& j, const SupergradientSelector& sel = {});

/// The selection that equalizes p_m across the four triangle fibers for the
/// minimum version: balanced (1/2, 1/2) m' on the axis facets, and on the
/// diagonal facets the tail's own axis component of j, normalized:
/// (j1^2, j2^2) m' / |j|^2 when the tail is a north/south triangle and the
/// transpose when it is east/west (balanced again at j = 0).
SupergradientSelector triangle_balancing_selector(const FVGraph& fg, Mobility m);

}  // namespace lot
