#pragma once

#include <functional>
#include <memory>
#include <string>

#include "lot/divergence.hpp"
#include "lot/periodic_graph.hpp"

namespace lot {

/// Concave positively 1-homogeneous mean normalized by value 1 at (1,1),
/// extended continuously to the boundary of the first quadrant.
struct Mean {
  enum class Kind { arithmetic, geometric, harmonic, logarithmic, minimum };
  Kind kind = Kind::arithmetic;

  double operator()(double s, double t) const;

  /// Supergradient selection. Smooth means return the derivative; the minimum
  /// mean at a tie s == t returns (tie_weight, 1 - tie_weight). The tie choice
  /// is exposed because downstream mobility checks need specific selections.
  void partials(double s, double t, double& ds, double& dt, double tie_weight = 0.5) const;

  std::string name() const;
  static Mean parse(const std::string& name);
};

/// Local convex energy of one fundamental cell, read through windows of
/// radius R1 (masses on cells |y|_inf <= R1, fluxes on edges with tail
/// there; the energy itself only charges the center-cell edge values).
/// Immutable and shareable; evaluation is reentrant.
struct CostFunction {
  enum class Kind { vertex_based, edge_based, general };

  std::shared_ptr<const PeriodicGraph> g;
  int R1 = 0;
  Kind kind = Kind::general;
  PeriodicField m_ref;  // declared interior reference point, J_ref divergence free
  PeriodicFlux J_ref;

  virtual ~CostFunction() = default;
  virtual std::string name() const = 0;

  /// Differentiable on the interior of its domain? Drives the choice between
  /// plain projected gradients and diminishing-step subgradients.
  virtual bool smooth() const { return false; }

  /// F on one window. +inf allowed, -inf never. Throws domain_error on a
  /// window smaller than R1 or on negative mass.
  virtual double evaluate(const FieldWindow& w) const = 0;

  /// F at periodic one-cell data (the window is filled periodically).
  double evaluate_periodic(const PeriodicField& m, const PeriodicFlux& J) const;

  /// Value plus partial derivatives with respect to the one-cell data; the
  /// periodic filling is accounted for (a fiber mass appears in every window
  /// slot it feeds). Default: central finite differences with adaptive step.
  virtual double periodic_value_grad(const PeriodicField& m, const PeriodicFlux& J, dvec* gm,
                                     dvec* gJ) const;

  /// F_eps(m, J) = sum_z eps^d F(tau_eps^z m / eps^d, tau_eps^z J / eps^{d-1}).
  virtual double rescaled_energy(const TorusField& m, const TorusFlux& J) const;

  /// Value plus partials of rescaled_energy with respect to the torus data.
  /// Default: central finite differences (usable at desk scale only).
  virtual double rescaled_value_grad(const TorusField& m, const TorusFlux& J, dvec* gm,
                                     dvec* gJ) const;
};

/// F(m,J) = 1/2 sum_{E^Q} |J(x,y)|^p / Lambda(q_xy m(x), q_yx m(y))^{p-1}.
/// Each stencil edge contributes its two oriented pairs; p = 1 has unit
/// denominator; Lambda = 0 gives +inf for nonzero flux and 0 otherwise.
struct WpMeanCost : CostFunction {
  double p = 2.0;
  Mean mean;
  dvec q_fwd;  // q_xy per stencil edge (tail side), positive
  dvec q_bwd;  // q_yx per stencil edge (head side), positive

  WpMeanCost(std::shared_ptr<const PeriodicGraph> graph, double p, Mean mean, dvec q_fwd = {},
             dvec q_bwd = {});

  std::string name() const override;
  bool smooth() const override { return p > 1.0 && mean.kind != Mean::Kind::minimum; }
  double evaluate(const FieldWindow& w) const override;
  double periodic_value_grad(const PeriodicField& m, const PeriodicFlux& J, dvec* gm,
                             dvec* gJ) const override;
  double rescaled_energy(const TorusField& m, const TorusFlux& J) const override;
  double rescaled_value_grad(const TorusField& m, const TorusFlux& J, dvec* gm,
                             dvec* gJ) const override;
};

/// Table-driven convex-by-construction general cost over the enumerated
/// window slots (masses first, then center-cell fluxes):
/// F(x) = 1/2 |L x|^2 + b . x + c.
struct QuadraticWindowCost : CostFunction {
  std::vector<dvec> L;  // rows of the factor
  dvec b;
  double c = 0.0;

  QuadraticWindowCost(std::shared_ptr<const PeriodicGraph> graph, int R1, std::vector<dvec> L,
                      dvec b, double c);

  std::string name() const override { return "quadratic"; }
  bool smooth() const override { return true; }
  double evaluate(const FieldWindow& w) const override;
  long long slot_count() const;
};

struct RecessionReport {
  dvec ts;         // geometric ladder of ray parameters
  dvec quotients;  // F(base + t dir) / t
  double estimate = 0.0;
  double gap = 0.0;  // |last - previous| as an error proxy
  bool infinite = false;
  double first_infinite_t = 0.0;
};

/// Estimate of the recession function F^inf(direction) along a ray from a
/// finite base point. Convexity makes the centered quotient nondecreasing.
RecessionReport recession_direction(const CostFunction& F, const PeriodicField& m0,
                                    const PeriodicFlux& J0, const PeriodicField& m,
                                    const PeriodicFlux& J, double t_max = 1e4, int steps = 3);

struct GrowthCertificate {
  double c = 0.0;
  double C = 0.0;
  int n_samples = 0;
  double max_violation = 0.0;  // empirical max of c sum|J| - C(1 + sum m) - F
  bool fitted = false;
};

using CostSampler = std::function<std::pair<PeriodicField, PeriodicFlux>(rng&)>;

/// Check F(m,J) >= c sum_{E^Q} |J| - C (1 + sum m) on samples. With
/// candidate constants, just measures the violation. Fitted mode derives
/// (c, C) from the first half of the samples and validates on all of them,
/// so an inequality that only holds on bounded sets is caught.
GrowthCertificate check_growth(const CostFunction& F, const CostSampler& sampler, int n_samples,
                               rng& gen, const double* cand_c = nullptr,
                               const double* cand_C = nullptr);

struct SuperlinearReport {
  int n_samples = 0;
  double max_violation = 0.0;
  double worst_J0 = 0.0;
};

/// Check F(m,J) >= (m0+1) theta(J0/(m0+1)) - C (m0+1) with m0 the window
/// mass and J0 the total unsigned flux of E^Q.
SuperlinearReport check_superlinear(const CostFunction& F,
                                    const std::function<double(double)>& theta, double C,
                                    const CostSampler& sampler, int n_samples, rng& gen);

}  // namespace lot
