#pragma once

#include "lot/cost.hpp"
#include "lot/divergence.hpp"

namespace lot {

/// Affine chart of Rep(rho, j): masses range over the scaled simplex
/// {m >= 0, sum m = rho}; admissible fluxes are J_part + span(kernel) with
/// an orthonormal kernel basis of {dive J = 0, Eff J = 0}.
struct RepParametrization {
  std::shared_ptr<const PeriodicGraph> g;
  dvec j;
  PeriodicFlux J_part;            // dive = 0, Eff = j
  std::vector<dvec> kernel;       // orthonormal, each dive = 0 and Eff = 0
  int rank = 0;
  int nullity = 0;

  PeriodicFlux flux(const dvec& coeff) const;
};

RepParametrization build_parametrization(std::shared_ptr<const PeriodicGraph> g, const dvec& j);

struct CellSolution {
  double value = 0.0;
  PeriodicField m_opt;
  PeriodicFlux J_opt;
  double kkt_residual = 0.0;
  long long iterations = 0;
  int restarts = 0;
  bool converged = false;
  std::string diagnostic;
};

/// f_hom(rho, j) = inf{F(m, J) : (m, J) in Rep(rho, j)} as a projected
/// (proximal-)subgradient descent over the simplex-kernel chart, followed by
/// a pattern-search polish in low reduced dimension. Infeasible domains
/// (e.g. rho = 0 with nonzero flux under W_p) return value +inf with a
/// diagnostic instead of failing.
CellSolution solve_cell(std::shared_ptr<const PeriodicGraph> g, const CostFunction& F, double rho,
                        const dvec& j, double tol = 1e-9);

/// Same solve against a prebuilt chart (kernel reuse across j values).
CellSolution solve_cell(const RepParametrization& rep, const CostFunction& F, double rho,
                        double tol = 1e-9);

struct CellTableRow {
  double rho = 0.0;
  dvec j;
  double value = 0.0;
  double kkt_residual = 0.0;
  long long iterations = 0;
  bool converged = false;
};

/// One solve per (rho, j) pair; rows in input order regardless of thread
/// count (deterministic assembly).
std::vector<CellTableRow> f_hom_table(std::shared_ptr<const PeriodicGraph> g,
                                      const CostFunction& F, const dvec& rho_list,
                                      const std::vector<dvec>& j_grid, double tol = 1e-9,
                                      int threads = 1);

/// Quotients f_hom(rho0 + t rho_dir, j0 + t j_dir) / t over a geometric
/// ladder; the base point is the reference mass/flux of F. Superlinear
/// growth (ratio doubling per rung, or overflow) is flagged infinite.
RecessionReport recession_f_hom(std::shared_ptr<const PeriodicGraph> g, const CostFunction& F,
                                double rho_dir, const dvec& j_dir, double t_max = 1e4,
                                int steps = 3, double tol = 1e-9);

struct RhoJ {
  double rho = 0.0;
  dvec j;
};

/// Max midpoint-convexity violation of f_hom over sample pairs.
double verify_convexity(std::shared_ptr<const PeriodicGraph> g, const CostFunction& F,
                        const std::vector<std::pair<RhoJ, RhoJ>>& pairs, double tol = 1e-9);

/// f_hom(rho, j) >= c |j| - C (rho + 1) over samples; candidate or fitted
/// constants as in check_growth.
GrowthCertificate verify_growth_hom(std::shared_ptr<const PeriodicGraph> g, const CostFunction& F,
                                    const std::vector<RhoJ>& samples, double tol = 1e-9,
                                    const double* cand_c = nullptr, const double* cand_C = nullptr);

/// The graph with (1/eps)^d fundamental cells tiled into one. raw_to_canonical
/// (optional out) maps raw zoomed edge index cell * |E| + e to the canonical
/// edge index and orientation sign.
std::shared_ptr<const PeriodicGraph> zoom_graph(std::shared_ptr<const PeriodicGraph> g, int N,
                                                std::vector<std::pair<int, int>>* raw_to_canonical = nullptr);

/// Energy of the zoomed graph that reproduces the eps-rescaled sum of F over
/// the tiled cells; solving the cell problem with it must reproduce f_hom.
struct ZoomedCost : CostFunction {
  std::shared_ptr<const PeriodicGraph> fine;
  std::shared_ptr<const CostFunction> F;
  int N = 1;
  std::vector<std::pair<int, int>> edge_map;  // raw zoomed edge -> (canonical, sign)

  ZoomedCost(std::shared_ptr<const PeriodicGraph> zoomed, std::shared_ptr<const PeriodicGraph> fine,
             std::shared_ptr<const CostFunction> F, int N, std::vector<std::pair<int, int>> edge_map);

  std::string name() const override { return "zoomed(" + F->name() + ")"; }
  bool smooth() const override { return F->smooth(); }
  double evaluate(const FieldWindow& w) const override;
};

struct RescaleReport {
  double max_discrepancy = 0.0;
  std::vector<std::pair<double, double>> values;  // (f_hom, zoomed f_hom) per test point
};

/// Solve the cell problem on the original graph and on the zoomed graph with
/// the wrapped cost at the same (rho, j); report max |difference|.
RescaleReport verify_rescale_invariance(std::shared_ptr<const PeriodicGraph> g,
                                        std::shared_ptr<const CostFunction> F, double eps,
                                        const std::vector<RhoJ>& points, double tol = 1e-9);

/// Euclidean projection onto {x >= 0, sum x = s} (sort-based).
dvec project_simplex(const dvec& x, double s);

}  // namespace lot
