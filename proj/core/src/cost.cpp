#include "lot/cost.hpp"

#include <algorithm>
#include <cmath>

namespace lot {

double Mean::operator()(double s, double t) const {
  switch (kind) {
    case Kind::arithmetic:
      return 0.5 * (s + t);
    case Kind::geometric:
      return (s <= 0.0 || t <= 0.0) ? 0.0 : std::sqrt(s * t);
    case Kind::harmonic:
      return (s + t <= 0.0) ? 0.0 : 2.0 * s * t / (s + t);
    case Kind::logarithmic: {
      if (s <= 0.0 || t <= 0.0) return 0.0;
      if (std::abs(s - t) <= 1e-8 * std::max(s, t)) return 0.5 * (s + t);
      return (s - t) / (std::log(s) - std::log(t));
    }
    case Kind::minimum:
      return std::min(s, t);
  }
  return 0.0;
}

void Mean::partials(double s, double t, double& ds, double& dt, double tie_weight) const {
  switch (kind) {
    case Kind::arithmetic:
      ds = dt = 0.5;
      return;
    case Kind::geometric:
      if (s <= 0.0 || t <= 0.0) {
        ds = dt = 0.0;
        return;
      }
      ds = 0.5 * std::sqrt(t / s);
      dt = 0.5 * std::sqrt(s / t);
      return;
    case Kind::harmonic: {
      if (s + t <= 0.0) {
        ds = dt = 0.0;
        return;
      }
      double den = (s + t) * (s + t);
      ds = 2.0 * t * t / den;
      dt = 2.0 * s * s / den;
      return;
    }
    case Kind::logarithmic: {
      if (s <= 0.0 || t <= 0.0) {
        ds = dt = 0.0;
        return;
      }
      if (std::abs(s - t) <= 1e-6 * std::max(s, t)) {
        double h = (s - t) / (s + t);
        ds = 0.5 - h / 3.0;
        dt = 0.5 + h / 3.0;
        return;
      }
      double L = std::log(s) - std::log(t);
      double lam = (s - t) / L;
      ds = (1.0 - lam / s) / L;
      dt = (lam / t - 1.0) / L;
      return;
    }
    case Kind::minimum:
      if (s < t) {
        ds = 1.0;
        dt = 0.0;
      } else if (t < s) {
        ds = 0.0;
        dt = 1.0;
      } else {
        ds = tie_weight;
        dt = 1.0 - tie_weight;
      }
      return;
  }
}

std::string Mean::name() const {
  switch (kind) {
    case Kind::arithmetic:
      return "arithmetic";
    case Kind::geometric:
      return "geometric";
    case Kind::harmonic:
      return "harmonic";
    case Kind::logarithmic:
      return "logarithmic";
    case Kind::minimum:
      return "minimum";
  }
  return "";
}

Mean Mean::parse(const std::string& name) {
  Mean m;
  if (name == "arithmetic")
    m.kind = Kind::arithmetic;
  else if (name == "geometric")
    m.kind = Kind::geometric;
  else if (name == "harmonic")
    m.kind = Kind::harmonic;
  else if (name == "logarithmic")
    m.kind = Kind::logarithmic;
  else if (name == "minimum")
    m.kind = Kind::minimum;
  else
    throw domain_error("unknown mean: " + name);
  return m;
}

double CostFunction::evaluate_periodic(const PeriodicField& m, const PeriodicFlux& J) const {
  return evaluate(periodic_window(m, J, R1));
}

double CostFunction::periodic_value_grad(const PeriodicField& m, const PeriodicFlux& J, dvec* gm,
                                         dvec* gJ) const {
  const int V = g->fiber_count(), E = g->edge_count();
  if (gm) gm->assign(V, 0.0);
  if (gJ) gJ->assign(E, 0.0);
  double base = evaluate_periodic(m, J);
  if (!std::isfinite(base)) return base;
  PeriodicField mm = m;
  PeriodicFlux JJ = J;
  if (gm) {
    for (int v = 0; v < V; ++v) {
      double h = 1e-6 * (1.0 + std::abs(m.v[v]));
      double lo = std::max(0.0, m.v[v] - h);
      mm.v[v] = m.v[v] + h;
      double fp = evaluate_periodic(mm, J);
      mm.v[v] = lo;
      double fl = evaluate_periodic(mm, J);
      mm.v[v] = m.v[v];
      (*gm)[v] = (fp - fl) / (m.v[v] + h - lo);
    }
  }
  if (gJ) {
    for (int e = 0; e < E; ++e) {
      double h = 1e-6 * (1.0 + std::abs(J.v[e]));
      JJ.v[e] = J.v[e] + h;
      double fp = evaluate_periodic(m, JJ);
      JJ.v[e] = J.v[e] - h;
      double fl = evaluate_periodic(m, JJ);
      JJ.v[e] = J.v[e];
      (*gJ)[e] = (fp - fl) / (2.0 * h);
    }
  }
  return base;
}

double CostFunction::rescaled_energy(const TorusField& m, const TorusFlux& J) const {
  if (m.rg != J.rg) throw domain_error("rescaled_energy: mismatched graphs");
  const RescaledGraph& rg = *m.rg;
  double eps = rg.eps();
  double md = std::pow(eps, -rg.base->d);
  double jd = std::pow(eps, -(rg.base->d - 1));
  double cell_w = std::pow(eps, rg.base->d);
  double total = 0.0;
  for (long long c = 0; c < rg.cells.total; ++c) {
    FieldWindow fw = restrict_window(m, J, rg.cells.coords(c), R1);
    for (double& x : fw.mass) x *= md;
    for (double& x : fw.flux) x *= jd;
    double val = evaluate(fw);
    if (val == inf) return inf;
    total += cell_w * val;
  }
  return total;
}

double CostFunction::rescaled_value_grad(const TorusField& m, const TorusFlux& J, dvec* gm,
                                         dvec* gJ) const {
  if (gm) gm->assign(m.v.size(), 0.0);
  if (gJ) gJ->assign(J.v.size(), 0.0);
  double base = rescaled_energy(m, J);
  if (!std::isfinite(base)) return base;
  TorusField mm = m;
  TorusFlux JJ = J;
  if (gm) {
    for (size_t i = 0; i < m.v.size(); ++i) {
      double h = 1e-6 * (1.0 + std::abs(m.v[i]));
      double lo = std::max(0.0, m.v[i] - h);
      mm.v[i] = m.v[i] + h;
      double fp = rescaled_energy(mm, J);
      mm.v[i] = lo;
      double fl = rescaled_energy(mm, J);
      mm.v[i] = m.v[i];
      (*gm)[i] = (fp - fl) / (m.v[i] + h - lo);
    }
  }
  if (gJ) {
    for (size_t i = 0; i < J.v.size(); ++i) {
      double h = 1e-6 * (1.0 + std::abs(J.v[i]));
      JJ.v[i] = J.v[i] + h;
      double fp = rescaled_energy(m, JJ);
      JJ.v[i] = J.v[i] - h;
      double fl = rescaled_energy(m, JJ);
      JJ.v[i] = J.v[i];
      (*gJ)[i] = (fp - fl) / (2.0 * h);
    }
  }
  return base;
}

namespace {

// One ordered pair of E^Q: |J|^p / Lambda^{p-1}, with unit denominator at
// p = 1 and the zero-mobility convention otherwise.
double pair_value(double p, double Jv, double lam) {
  if (p == 1.0) return std::abs(Jv);
  if (lam <= 0.0) return Jv == 0.0 ? 0.0 : inf;
  return std::pow(std::abs(Jv), p) / std::pow(lam, p - 1.0);
}

double sgn(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

}  // namespace

WpMeanCost::WpMeanCost(std::shared_ptr<const PeriodicGraph> graph, double p_, Mean mean_,
                       dvec q_fwd_, dvec q_bwd_)
    : p(p_), mean(mean_), q_fwd(std::move(q_fwd_)), q_bwd(std::move(q_bwd_)) {
  g = std::move(graph);
  if (p < 1.0) throw domain_error("WpMeanCost requires p >= 1");
  const int E = g->edge_count();
  if (q_fwd.empty()) q_fwd.assign(E, 1.0);
  if (q_bwd.empty()) q_bwd.assign(E, 1.0);
  if (static_cast<int>(q_fwd.size()) != E || static_cast<int>(q_bwd.size()) != E)
    throw domain_error("WpMeanCost weight count must match stencil size");
  for (int e = 0; e < E; ++e)
    if (q_fwd[e] <= 0.0 || q_bwd[e] <= 0.0) throw domain_error("WpMeanCost weights must be positive");
  R1 = g->r0;
  kind = Kind::edge_based;
  m_ref.g = g;
  m_ref.v.assign(g->fiber_count(), 1.0);
  J_ref.g = g;
  J_ref.v.assign(E, 0.0);
}

std::string WpMeanCost::name() const { return "wp_mean"; }

double WpMeanCost::evaluate(const FieldWindow& w) const {
  if (w.g != g.get()) throw domain_error("window built for a different graph");
  if (w.w.R < R1) throw domain_error("window too small for cost locality");
  for (double x : w.mass)
    if (x < 0.0) throw domain_error("negative mass");
  double total = 0.0;
  for (int e = 0; e < g->edge_count(); ++e) {
    const stencil_edge& se = g->edges[e];
    double Jv = w.J(ivec(g->d, 0), e);
    double s = q_fwd[e] * w.m(ivec(g->d, 0), se.a);
    double t = q_bwd[e] * w.m(se.dz, se.b);
    double v1 = pair_value(p, Jv, mean(s, t));
    double v2 = pair_value(p, Jv, mean(t, s));
    if (v1 == inf || v2 == inf) return inf;
    total += 0.5 * (v1 + v2);
  }
  return total;
}

double WpMeanCost::periodic_value_grad(const PeriodicField& m, const PeriodicFlux& J, dvec* gm,
                                       dvec* gJ) const {
  const int V = g->fiber_count(), E = g->edge_count();
  if (gm) gm->assign(V, 0.0);
  if (gJ) gJ->assign(E, 0.0);
  for (double x : m.v)
    if (x < 0.0) throw domain_error("negative mass");
  double total = 0.0;
  for (int e = 0; e < E; ++e) {
    const stencil_edge& se = g->edges[e];
    double Jv = J.v[e];
    double s = q_fwd[e] * m.v[se.a];
    double t = q_bwd[e] * m.v[se.b];
    for (int half = 0; half < 2; ++half) {
      double a1 = half == 0 ? s : t, a2 = half == 0 ? t : s;
      double lam = mean(a1, a2);
      double val = pair_value(p, Jv, lam);
      if (val == inf) return inf;
      total += 0.5 * val;
      if (p > 1.0 && lam > 0.0) {
        if (gJ) (*gJ)[e] += 0.5 * p * sgn(Jv) * std::pow(std::abs(Jv), p - 1.0) / std::pow(lam, p - 1.0);
        if (gm && Jv != 0.0) {
          double dlam = -(p - 1.0) * std::pow(std::abs(Jv), p) / std::pow(lam, p);
          double d1, d2;
          mean.partials(a1, a2, d1, d2);
          if (half == 0) {
            (*gm)[se.a] += 0.5 * dlam * d1 * q_fwd[e];
            (*gm)[se.b] += 0.5 * dlam * d2 * q_bwd[e];
          } else {
            (*gm)[se.b] += 0.5 * dlam * d1 * q_bwd[e];
            (*gm)[se.a] += 0.5 * dlam * d2 * q_fwd[e];
          }
        }
      } else if (p == 1.0) {
        if (gJ) (*gJ)[e] += 0.5 * sgn(Jv);
      }
    }
  }
  return total;
}

double WpMeanCost::rescaled_energy(const TorusField& m, const TorusFlux& J) const {
  return rescaled_value_grad(m, J, nullptr, nullptr);
}

double WpMeanCost::rescaled_value_grad(const TorusField& m, const TorusFlux& J, dvec* gm,
                                       dvec* gJ) const {
  if (m.rg != J.rg) throw domain_error("rescaled_energy: mismatched graphs");
  const RescaledGraph& rg = *m.rg;
  const PeriodicGraph& gr = *rg.base;
  if (&gr != g.get()) throw domain_error("field built for a different graph");
  if (gm) gm->assign(m.v.size(), 0.0);
  if (gJ) gJ->assign(J.v.size(), 0.0);
  for (double x : m.v)
    if (x < 0.0) throw domain_error("negative mass");
  const double eps = rg.eps();
  const double md = std::pow(eps, -gr.d);           // mass rescale 1/eps^d
  const double jd = std::pow(eps, -(gr.d - 1));     // flux rescale 1/eps^{d-1}
  const double cw = std::pow(eps, gr.d);            // cell weight eps^d
  double total = 0.0;
  for (long long c = 0; c < rg.cells.total; ++c) {
    ivec z = rg.cells.coords(c);
    for (int e = 0; e < gr.edge_count(); ++e) {
      const stencil_edge& se = gr.edges[e];
      long long ia = rg.vidx(c, se.a);
      long long ib = rg.vidx(rg.cells.index(iadd(z, se.dz)), se.b);
      double Jv = J.v[rg.eidx(c, e)] * jd;
      double s = q_fwd[e] * m.v[ia] * md;
      double t = q_bwd[e] * m.v[ib] * md;
      for (int half = 0; half < 2; ++half) {
        double a1 = half == 0 ? s : t, a2 = half == 0 ? t : s;
        double lam = mean(a1, a2);
        double val = pair_value(p, Jv, lam);
        if (val == inf) return inf;
        total += 0.5 * cw * val;
        if (p > 1.0 && lam > 0.0) {
          if (gJ)
            (*gJ)[rg.eidx(c, e)] +=
                0.5 * cw * jd * p * sgn(Jv) * std::pow(std::abs(Jv), p - 1.0) / std::pow(lam, p - 1.0);
          if (gm && Jv != 0.0) {
            double dlam = -(p - 1.0) * std::pow(std::abs(Jv), p) / std::pow(lam, p);
            double d1, d2;
            mean.partials(a1, a2, d1, d2);
            double ca = cw * md * 0.5 * dlam;
            if (half == 0) {
              (*gm)[ia] += ca * d1 * q_fwd[e];
              (*gm)[ib] += ca * d2 * q_bwd[e];
            } else {
              (*gm)[ib] += ca * d1 * q_bwd[e];
              (*gm)[ia] += ca * d2 * q_fwd[e];
            }
          }
        } else if (p == 1.0) {
          if (gJ) (*gJ)[rg.eidx(c, e)] += 0.5 * cw * jd * sgn(Jv);
        }
      }
    }
  }
  return total;
}

QuadraticWindowCost::QuadraticWindowCost(std::shared_ptr<const PeriodicGraph> graph, int R1_,
                                         std::vector<dvec> L_, dvec b_, double c_)
    : L(std::move(L_)), b(std::move(b_)), c(c_) {
  g = std::move(graph);
  R1 = R1_;
  kind = Kind::general;
  long long slots = slot_count();
  if (static_cast<long long>(b.size()) != slots)
    throw domain_error("quadratic cost: linear term size mismatch");
  for (const dvec& row : L)
    if (static_cast<long long>(row.size()) != slots)
      throw domain_error("quadratic cost: factor row size mismatch");
  m_ref.g = g;
  m_ref.v.assign(g->fiber_count(), 1.0);
  J_ref.g = g;
  J_ref.v.assign(g->edge_count(), 0.0);
}

long long QuadraticWindowCost::slot_count() const {
  window_indexer w(g->d, R1);
  return w.total * g->fiber_count() + g->edge_count();
}

double QuadraticWindowCost::evaluate(const FieldWindow& w) const {
  if (w.g != g.get()) throw domain_error("window built for a different graph");
  if (w.w.R < R1) throw domain_error("window too small for cost locality");
  for (double x : w.mass)
    if (x < 0.0) throw domain_error("negative mass");
  window_indexer wi(g->d, R1);
  dvec x(slot_count());
  long long k = 0;
  for (long long i = 0; i < wi.total; ++i) {
    ivec y = wi.coords(i);
    for (int v = 0; v < g->fiber_count(); ++v) x[k++] = w.m(y, v);
  }
  for (int e = 0; e < g->edge_count(); ++e) x[k++] = w.J(ivec(g->d, 0), e);
  double val = c + dot(b, x);
  for (const dvec& row : L) {
    double r = dot(row, x);
    val += 0.5 * r * r;
  }
  return val;
}

RecessionReport recession_direction(const CostFunction& F, const PeriodicField& m0,
                                    const PeriodicFlux& J0, const PeriodicField& m,
                                    const PeriodicFlux& J, double t_max, int steps) {
  if (steps < 1) throw domain_error("recession_direction needs at least one step");
  double f0 = F.evaluate_periodic(m0, J0);
  if (!std::isfinite(f0)) throw domain_error("recession base point must be finite");
  RecessionReport rep;
  PeriodicField mt = m0;
  PeriodicFlux Jt = J0;
  for (int k = steps - 1; k >= 0; --k) {
    double t = t_max * std::pow(10.0, -k);
    for (size_t i = 0; i < mt.v.size(); ++i) mt.v[i] = m0.v[i] + t * m.v[i];
    for (size_t i = 0; i < Jt.v.size(); ++i) Jt.v[i] = J0.v[i] + t * J.v[i];
    double q = F.evaluate_periodic(mt, Jt) / t;
    rep.ts.push_back(t);
    rep.quotients.push_back(q);
    if (q == inf && !rep.infinite) {
      rep.infinite = true;
      rep.first_infinite_t = t;
    }
  }
  rep.estimate = rep.quotients.back();
  size_t n = rep.quotients.size();
  rep.gap = n >= 2 && std::isfinite(rep.quotients[n - 1]) && std::isfinite(rep.quotients[n - 2])
                ? std::abs(rep.quotients[n - 1] - rep.quotients[n - 2])
                : 0.0;
  return rep;
}

GrowthCertificate check_growth(const CostFunction& F, const CostSampler& sampler, int n_samples,
                               rng& gen, const double* cand_c, const double* cand_C) {
  struct Row {
    double sumJ, summ, val;
  };
  std::vector<Row> rows;
  rows.reserve(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    auto [m, J] = sampler(gen);
    double sumJ = 2.0 * l1_norm(J.v);  // both orientations of every stencil edge
    double summ = vsum(m.v);
    rows.push_back({sumJ, summ, F.evaluate_periodic(m, J)});
  }
  GrowthCertificate cert;
  cert.n_samples = n_samples;
  if (cand_c && cand_C) {
    cert.c = *cand_c;
    cert.C = *cand_C;
  } else {
    // Fit on the first half, validate on everything: inequalities that only
    // hold on bounded sets surface as positive violations below. C carries a
    // 25% margin so same-distribution sampling noise cannot flip the sign;
    // genuinely unbounded violations dwarf it.
    cert.fitted = true;
    size_t half = std::max<size_t>(1, rows.size() / 2);
    double c = inf;
    for (size_t i = 0; i < half; ++i)
      if (rows[i].sumJ > 1e-12 && std::isfinite(rows[i].val))
        c = std::min(c, (rows[i].val + 1.0 + rows[i].summ) / rows[i].sumJ);
    cert.c = std::isfinite(c) ? std::max(0.9 * c, 1e-12) : 1.0;
    double C = 0.0;
    for (size_t i = 0; i < half; ++i)
      if (std::isfinite(rows[i].val))
        C = std::max(C, (cert.c * rows[i].sumJ - rows[i].val) / (1.0 + rows[i].summ));
    cert.C = 1.25 * C + 0.25;
  }
  double worst = -inf;
  for (const Row& r : rows) {
    if (!std::isfinite(r.val)) continue;  // +inf satisfies any lower bound
    worst = std::max(worst, cert.c * r.sumJ - cert.C * (1.0 + r.summ) - r.val);
  }
  cert.max_violation = worst;
  return cert;
}

SuperlinearReport check_superlinear(const CostFunction& F,
                                    const std::function<double(double)>& theta, double C,
                                    const CostSampler& sampler, int n_samples, rng& gen) {
  SuperlinearReport rep;
  rep.n_samples = n_samples;
  rep.max_violation = -inf;
  const int R = std::max(F.g->r0, F.R1);
  double cells = std::pow(2.0 * R + 1.0, F.g->d);
  for (int i = 0; i < n_samples; ++i) {
    auto [m, J] = sampler(gen);
    double m0 = cells * vsum(m.v);  // window mass |x|_inf <= R of periodic data
    double J0 = 2.0 * l1_norm(J.v);
    double val = F.evaluate_periodic(m, J);
    if (!std::isfinite(val)) continue;
    double viol = (m0 + 1.0) * theta(J0 / (m0 + 1.0)) - C * (m0 + 1.0) - val;
    if (viol > rep.max_violation) {
      rep.max_violation = viol;
      rep.worst_J0 = J0;
    }
  }
  return rep;
}

}  // namespace lot
