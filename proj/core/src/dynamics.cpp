#include "lot/dynamics.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include "lot/divergence.hpp"

namespace lot {

namespace {

void sanitize(dvec& g) {
  for (double& x : g) {
    if (std::isnan(x)) x = 0.0;
    x = std::clamp(x, -1e15, 1e15);
  }
}

/// Adjoint of the torus divergence: (D^T w)(c,e) = w(tail) - w(head).
dvec div_transpose(const RescaledGraph& rg, const dvec& w) {
  const PeriodicGraph& g = *rg.base;
  dvec out(static_cast<size_t>(rg.edge_count()), 0.0);
  for (long long c = 0; c < rg.cells.total; ++c) {
    ivec z = rg.cells.coords(c);
    for (int e = 0; e < g.edge_count(); ++e) {
      const stencil_edge& se = g.edges[e];
      long long head = rg.cells.index(iadd(z, se.dz));
      out[rg.eidx(c, e)] = w[rg.vidx(c, se.a)] - w[rg.vidx(head, se.b)];
    }
  }
  return out;
}

struct StopRule {
  double tol;
  std::deque<double> hist;
  double best = inf;

  bool push(double f) {
    best = std::min(best, f);
    hist.push_back(best);
    if (hist.size() > 51) hist.pop_front();
    if (hist.size() < 51 || !std::isfinite(best)) return false;
    return hist.front() - best <= tol * std::max(1.0, std::abs(best));
  }
};

/// The reduced objective of minimal_action: masses are integrated from the
/// flux stack, so only nonnegativity remains as an inequality. Trial points
/// with a mass below -negtol evaluate to +inf (the line search backs off);
/// float dust in [-negtol, 0) is snapped to zero.
struct ReducedAction {
  std::shared_ptr<const RescaledGraph> rg;
  const CostFunction* F;
  const dvec* m0;
  double dt;
  int K;
  long long VN, EN;
  double negtol;
  mutable long long rejections = 0;

  bool masses(const dvec& stack, std::vector<dvec>& m) const {
    m.assign(K + 1, dvec());
    m[0] = *m0;
    TorusFlux Jk{rg, dvec(EN)};
    for (int k = 0; k < K; ++k) {
      std::copy(stack.begin() + k * EN, stack.begin() + (k + 1) * EN, Jk.v.begin());
      dvec div = divergence(Jk);
      m[k + 1] = m[k];
      for (long long i = 0; i < VN; ++i) {
        double x = m[k + 1][i] - dt * div[i];
        if (x < 0.0) {
          if (x < -negtol) {
            ++rejections;
            return false;
          }
          x = 0.0;
        }
        m[k + 1][i] = x;
      }
    }
    return true;
  }

  double value(const dvec& stack) const {
    std::vector<dvec> m;
    if (!masses(stack, m)) return inf;
    TorusField mbar{rg, dvec(VN)};
    TorusFlux Jk{rg, dvec(EN)};
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
      for (long long i = 0; i < VN; ++i) mbar.v[i] = 0.5 * (m[k][i] + m[k + 1][i]);
      std::copy(stack.begin() + k * EN, stack.begin() + (k + 1) * EN, Jk.v.begin());
      double f;
      try {
        f = F->rescaled_energy(mbar, Jk);
      } catch (const domain_error&) {
        return inf;
      }
      if (!std::isfinite(f)) return inf;
      total += dt * f;
    }
    return total;
  }

  double value_grad(const dvec& stack, dvec& grad) const {
    std::vector<dvec> m;
    if (!masses(stack, m)) return inf;
    grad.assign(stack.size(), 0.0);
    TorusField mbar{rg, dvec(VN)};
    TorusFlux Jk{rg, dvec(EN)};
    std::vector<dvec> gms(K), gjs(K);
    double total = 0.0;
    for (int k = 0; k < K; ++k) {
      for (long long i = 0; i < VN; ++i) mbar.v[i] = 0.5 * (m[k][i] + m[k + 1][i]);
      std::copy(stack.begin() + k * EN, stack.begin() + (k + 1) * EN, Jk.v.begin());
      double f;
      try {
        f = F->rescaled_value_grad(mbar, Jk, &gms[k], &gjs[k]);
      } catch (const domain_error&) {
        return inf;
      }
      if (!std::isfinite(f)) return inf;
      total += dt * f;
    }
    // d m_k / d J_l = -dt D^T for l < k, so the stack gradient needs the
    // suffix sums of the mass gradients (the step's own interval counts half).
    dvec suffix(VN, 0.0);
    for (int k = K - 1; k >= 0; --k) {
      dvec w(VN);
      for (long long i = 0; i < VN; ++i) w[i] = suffix[i] + 0.5 * gms[k][i];
      dvec corr = div_transpose(*rg, w);
      for (long long i = 0; i < EN; ++i)
        grad[k * EN + i] = dt * (gjs[k][i] - dt * corr[i]);
      for (long long i = 0; i < VN; ++i) suffix[i] += gms[k][i];
    }
    sanitize(grad);
    return total;
  }
};

}  // namespace

void check_path(const DiscretePath& p) {
  if (!p.rg) throw domain_error("path has no graph");
  if (!(p.t1 > p.t0)) throw domain_error("path needs t0 < t1");
  if (p.J.empty() || p.m.size() != p.J.size() + 1)
    throw domain_error("path needs K fluxes and K+1 mass slices");
  for (const TorusField& m : p.m)
    if (m.rg.get() != p.rg.get() || static_cast<long long>(m.v.size()) != p.rg->vertex_count())
      throw domain_error("path mass slice has the wrong graph or size");
  for (const TorusFlux& J : p.J)
    if (J.rg.get() != p.rg.get() || static_cast<long long>(J.v.size()) != p.rg->edge_count())
      throw domain_error("path flux slice has the wrong graph or size");
}

DiscretePath constant_path(std::shared_ptr<const RescaledGraph> rg, const TorusField& m, int K,
                           double t0, double t1) {
  if (K < 1) throw domain_error("a path needs at least one interval");
  if (m.rg.get() != rg.get()) throw domain_error("mass lives on a different graph instance");
  DiscretePath p;
  p.rg = rg;
  p.t0 = t0;
  p.t1 = t1;
  p.m.assign(K + 1, m);
  p.J.assign(K, make_torus_flux(rg));
  check_path(p);
  return p;
}

DiscretePath integrate_path(const TorusField& m0, const std::vector<TorusFlux>& J, double t0,
                            double t1) {
  if (J.empty()) throw domain_error("a path needs at least one interval");
  DiscretePath p;
  p.rg = m0.rg;
  p.t0 = t0;
  p.t1 = t1;
  p.J = J;
  p.m.reserve(J.size() + 1);
  p.m.push_back(m0);
  double dt = (t1 - t0) / static_cast<double>(J.size());
  for (const TorusFlux& Jk : J) {
    dvec div = divergence(Jk);
    TorusField next = p.m.back();
    for (size_t i = 0; i < next.v.size(); ++i) next.v[i] -= dt * div[i];
    p.m.push_back(std::move(next));
  }
  check_path(p);
  return p;
}

CEReport ce_residual(const DiscretePath& p) {
  check_path(p);
  CEReport rep;
  double dt = p.dt();
  double total0 = vsum(p.m[0].v);
  for (int k = 0; k < p.steps(); ++k) {
    dvec div = divergence(p.J[k]);
    for (size_t i = 0; i < div.size(); ++i) {
      double r = (p.m[k + 1].v[i] - p.m[k].v[i]) / dt + div[i];
      rep.max_residual = std::max(rep.max_residual, std::abs(r));
    }
    rep.mass_drift = std::max(rep.mass_drift, std::abs(vsum(p.m[k + 1].v) - total0));
  }
  return rep;
}

double action(const DiscretePath& p, const CostFunction& F) {
  check_path(p);
  if (p.rg->base.get() != F.g.get())
    throw domain_error("cost and path were built for different graphs");
  double dt = p.dt();
  TorusField mbar{p.rg, dvec(p.rg->vertex_count())};
  double total = 0.0;
  for (int k = 0; k < p.steps(); ++k) {
    for (size_t i = 0; i < mbar.v.size(); ++i)
      mbar.v[i] = 0.5 * (p.m[k].v[i] + p.m[k + 1].v[i]);
    double f = F.rescaled_energy(mbar, p.J[k]);
    if (f == inf) return inf;
    total += dt * f;
  }
  return total;
}

ActionSolution minimal_action(std::shared_ptr<const RescaledGraph> rg, const CostFunction& F,
                              const TorusField& m0, const TorusField& m1, int K, double tol,
                              const DiscretePath* init) {
  if (!rg) throw domain_error("minimal_action needs a graph");
  if (rg->base.get() != F.g.get())
    throw domain_error("cost and torus graph must share the same base graph instance");
  if (m0.rg.get() != rg.get() || m1.rg.get() != rg.get())
    throw domain_error("boundary masses live on a different graph instance");
  if (K < 1) throw domain_error("minimal_action needs K >= 1");
  if (!(tol > 0)) throw domain_error("tolerance must be positive");
  const long long VN = rg->vertex_count();
  const long long EN = rg->edge_count();
  if (static_cast<long long>(m0.v.size()) != VN || static_cast<long long>(m1.v.size()) != VN)
    throw domain_error("boundary masses have the wrong size");
  for (double x : m0.v)
    if (!(x >= 0)) throw domain_error("boundary masses must be nonnegative");
  for (double x : m1.v)
    if (!(x >= 0)) throw domain_error("boundary masses must be nonnegative");
  double total0 = vsum(m0.v);
  if (std::abs(total0 - vsum(m1.v)) > 1e-12 * std::max(1.0, total0))
    throw infeasible_error("endpoint masses carry different totals; no path connects them");

  const double t0 = 0.0, t1 = 1.0;
  const double dt = (t1 - t0) / K;

  ReducedAction obj{rg,
                    &F,
                    &m0.v,
                    dt,
                    K,
                    VN,
                    EN,
                    1e-12 * std::max(1.0, linf_norm(m0.v)),
                    0};

  // Endpoint constraint sum_k D J_k = (m0 - m1)/dt. Its normal matrix is
  // K * (D D^T); the vertex Laplacian is made definite by the rank-one
  // all-ones correction, which is invisible through D^T.
  Eigen::MatrixXd L = Eigen::MatrixXd::Constant(VN, VN, 1.0 / static_cast<double>(VN));
  {
    const PeriodicGraph& g = *rg->base;
    for (long long c = 0; c < rg->cells.total; ++c) {
      ivec z = rg->cells.coords(c);
      for (int e = 0; e < g.edge_count(); ++e) {
        long long t = rg->vidx(c, g.edges[e].a);
        long long h = rg->vidx(rg->cells.index(iadd(z, g.edges[e].dz)), g.edges[e].b);
        L(t, t) += 1.0;
        L(h, h) += 1.0;
        L(t, h) -= 1.0;
        L(h, t) -= 1.0;
      }
    }
  }
  Eigen::LDLT<Eigen::MatrixXd> ldlt(L);

  dvec target(VN);
  for (long long i = 0; i < VN; ++i) target[i] = (m0.v[i] - m1.v[i]) / dt;

  auto project = [&](dvec& stack) {
    dvec r(VN, 0.0);
    TorusFlux Jk{rg, dvec(EN)};
    for (int k = 0; k < K; ++k) {
      std::copy(stack.begin() + k * EN, stack.begin() + (k + 1) * EN, Jk.v.begin());
      dvec div = divergence(Jk);
      for (long long i = 0; i < VN; ++i) r[i] += div[i];
    }
    for (long long i = 0; i < VN; ++i) r[i] -= target[i];
    Eigen::VectorXd rv = Eigen::Map<const Eigen::VectorXd>(r.data(), VN);
    Eigen::VectorXd y = ldlt.solve(rv) / static_cast<double>(K);
    dvec yw(y.data(), y.data() + VN);
    dvec corr = div_transpose(*rg, yw);
    for (int k = 0; k < K; ++k)
      for (long long i = 0; i < EN; ++i) stack[k * EN + i] -= corr[i];
  };

  // Feasible starting stacks. Each is endpoint-exact by construction; the
  // via-uniform route exists to dodge +inf walls when direct interpolation
  // runs flux through zero-capacity pairs.
  std::vector<dvec> starts;
  if (init) {
    check_path(*init);
    if (init->rg.get() != rg.get() || init->steps() != K)
      throw domain_error("warm start has the wrong graph or step count");
    dvec s(K * EN);
    for (int k = 0; k < K; ++k)
      std::copy(init->J[k].v.begin(), init->J[k].v.end(), s.begin() + k * EN);
    project(s);
    starts.push_back(std::move(s));
  }
  {
    TorusField gf{rg, dvec(VN)};
    for (long long i = 0; i < VN; ++i) gf.v[i] = (m0.v[i] - m1.v[i]) / (t1 - t0);
    TorusFlux Jc = solve_divergence_local(gf);
    dvec s(K * EN);
    for (int k = 0; k < K; ++k) std::copy(Jc.v.begin(), Jc.v.end(), s.begin() + k * EN);
    starts.push_back(std::move(s));
  }
  if (K >= 2) {
    double u = total0 / static_cast<double>(VN);
    auto node = [&](int k) {
      dvec m(VN);
      double s = static_cast<double>(k) / K;
      for (long long i = 0; i < VN; ++i) {
        double lo = m0.v[i], hi = m1.v[i];
        m[i] = s <= 0.5 ? lo + 2.0 * s * (u - lo) : u + (2.0 * s - 1.0) * (hi - u);
      }
      return m;
    };
    dvec s(K * EN);
    for (int k = 0; k < K; ++k) {
      dvec a = node(k), b = node(k + 1);
      TorusField gf{rg, dvec(VN)};
      for (long long i = 0; i < VN; ++i) gf.v[i] = (a[i] - b[i]) / dt;
      TorusFlux Jk = solve_divergence_local(gf);
      std::copy(Jk.v.begin(), Jk.v.end(), s.begin() + k * EN);
    }
    starts.push_back(std::move(s));
  }
  {
    dvec s(K * EN, 0.0);
    project(s);
    starts.push_back(std::move(s));
  }

  dvec stack;
  double f0 = inf;
  for (dvec& s : starts) {
    double v = obj.value(s);
    if (v < f0) {
      f0 = v;
      stack = s;
    }
  }

  ActionSolution out;
  if (!std::isfinite(f0)) {
    out.value = inf;
    out.path = constant_path(rg, m0, K, t0, t1);
    out.diagnostic = "no starting path with finite action was found";
    out.domain_rejections = obj.rejections;
    return out;
  }

  const long long cap = 30000;
  StopRule stop{tol, {}, f0};
  double f = f0;
  dvec grad;
  dvec best = stack;
  double f_best = f0;

  if (F.smooth()) {
    double t = 1.0;
    int fail_streak = 0;
    for (long long it = 1; it <= cap; ++it) {
      out.iterations = it;
      f = obj.value_grad(stack, grad);
      bool accepted = false;
      for (int h = 0; h < 40; ++h) {
        dvec cand = stack;
        for (size_t i = 0; i < cand.size(); ++i) cand[i] -= t * grad[i];
        project(cand);
        double d2 = 0.0;
        for (size_t i = 0; i < cand.size(); ++i) {
          double dd = cand[i] - stack[i];
          d2 += dd * dd;
        }
        if (d2 == 0.0) {
          out.converged = true;
          goto smooth_done;
        }
        double fn = obj.value(cand);
        if (std::isfinite(fn) && fn <= f - 1e-4 * d2 / t) {
          stack = std::move(cand);
          f = fn;
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (accepted) {
        fail_streak = 0;
        t = std::min(t * 1.25, 1e6);
        if (f < f_best) {
          f_best = f;
          best = stack;
        }
      } else {
        t = 1.0;
        if (++fail_streak >= 2) {
          out.converged = true;  // no descent at any step size: at the floor
          break;
        }
      }
      if (stop.push(f)) {
        out.converged = true;
        break;
      }
    }
  smooth_done:;
  } else {
    // Diminishing normalized subgradient steps; the iterate may wander, the
    // answer is the best point visited.
    double scale = std::max(1.0, linf_norm(m0.v) + l1_norm(target) * dt);
    const double a = 0.5 * scale;
    for (long long it = 1; it <= cap; ++it) {
      out.iterations = it;
      f = obj.value_grad(stack, grad);
      if (std::isfinite(f) && f < f_best) {
        f_best = f;
        best = stack;
      }
      double n2 = 0.0;
      for (double x : grad) n2 += x * x;
      n2 = std::sqrt(n2);
      if (n2 == 0.0) {
        out.converged = true;
        break;
      }
      double step = a / static_cast<double>(it) / n2;
      for (size_t i = 0; i < stack.size(); ++i) stack[i] -= step * grad[i];
      project(stack);
      if (!std::isfinite(obj.value(stack))) stack = best;  // re-anchor inside the domain
      if (stop.push(f_best)) {
        out.converged = true;
        break;
      }
    }
    stack = best;
    f = f_best;
  }

  if (f_best < f) {
    stack = best;
    f = f_best;
  }

  // Final stationarity proxy: distance to the projected unit gradient step.
  {
    double fv = obj.value_grad(stack, grad);
    if (std::isfinite(fv)) {
      dvec cand = stack;
      for (size_t i = 0; i < cand.size(); ++i) cand[i] -= grad[i];
      project(cand);
      double r = 0.0;
      for (size_t i = 0; i < cand.size(); ++i) r = std::max(r, std::abs(cand[i] - stack[i]));
      out.residual = r;
    }
  }

  std::vector<TorusFlux> J(K, TorusFlux{rg, dvec(EN)});
  for (int k = 0; k < K; ++k)
    std::copy(stack.begin() + k * EN, stack.begin() + (k + 1) * EN, J[k].v.begin());
  std::vector<dvec> masses;
  obj.masses(stack, masses);
  out.path.rg = rg;
  out.path.t0 = t0;
  out.path.t1 = t1;
  out.path.J = std::move(J);
  out.path.m.reserve(K + 1);
  for (int k = 0; k <= K; ++k) out.path.m.push_back(TorusField{rg, masses[k]});
  out.path.m[K] = m1;  // endpoint is pinned; integration reproduces it to float dust
  out.value = f;
  out.domain_rejections = obj.rejections;
  if (!out.converged) out.diagnostic = "iteration cap reached before the stopping rule";
  return out;
}

ContinuumActionReport continuum_action_reference(
    int d, int n, int K, double t0, double t1,
    const std::function<double(const dvec& x, double t)>& rho,
    const std::function<dvec(const dvec& x, double t)>& flux,
    const std::function<double(double, const dvec&)>& f_hom) {
  if (d < 1 || n < 1 || K < 1) throw domain_error("quadrature grid needs d, n, K >= 1");
  if (!(t1 > t0)) throw domain_error("quadrature needs t0 < t1");
  grid_indexer cells(d, n);
  const double h = 1.0 / n;
  const double dtq = (t1 - t0) / K;
  double cellvol = 1.0;
  for (int i = 0; i < d; ++i) cellvol *= h;
  ContinuumActionReport rep;
  double total = 0.0;
  for (int k = 0; k < K; ++k) {
    double t = t0 + (k + 0.5) * dtq;
    for (long long c = 0; c < cells.total; ++c) {
      ivec z = cells.coords(c);
      dvec x(d);
      for (int i = 0; i < d; ++i) x[i] = (z[i] + 0.5) * h;
      double val = f_hom(rho(x, t), flux(x, t));
      if (!std::isfinite(val)) {
        rep.infinite = true;
        rep.value = inf;
        std::ostringstream os;
        os << "t=" << t << ", x=(";
        for (int i = 0; i < d; ++i) os << (i ? "," : "") << x[i];
        os << ")";
        rep.location = os.str();
        return rep;
      }
      total += val;
    }
  }
  rep.value = total * cellvol * dtq;
  return rep;
}

}  // namespace lot
