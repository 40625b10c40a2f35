#include "lot/regularize.hpp"

#include <cmath>

namespace lot {

namespace {

void check_delta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw domain_error("tilt needs delta in (0,1)");
}

}  // namespace

std::pair<TorusField, TorusFlux> tilt_pair(const TorusField& m, const TorusFlux& J, double delta,
                                           const PeriodicField& m_ref, const PeriodicFlux& J_ref) {
  check_delta(delta);
  const RescaledGraph& rg = *m.rg;
  if (m.rg.get() != J.rg.get()) throw domain_error("mass and flux live on different graphs");
  if (m_ref.g.get() != rg.base.get() || J_ref.g.get() != rg.base.get())
    throw domain_error("reference pair was built for a different base graph");
  const int d = rg.base->d;
  double epsd = 1.0;
  for (int i = 0; i < d; ++i) epsd *= rg.eps();
  const double mass_scale = delta * epsd;
  const double flux_scale = delta * epsd / rg.eps();  // eps^{d-1}
  TorusField mt = m;
  TorusFlux Jt = J;
  const int V = rg.base->fiber_count();
  const int E = rg.base->edge_count();
  for (long long c = 0; c < rg.cells.total; ++c) {
    for (int v = 0; v < V; ++v) {
      double& x = mt.v[rg.vidx(c, v)];
      x = (1.0 - delta) * x + mass_scale * m_ref.v[v];
    }
    for (int e = 0; e < E; ++e) {
      double& x = Jt.v[rg.eidx(c, e)];
      x = (1.0 - delta) * x + flux_scale * J_ref.v[e];
    }
  }
  return {std::move(mt), std::move(Jt)};
}

std::pair<TorusField, TorusFlux> tilt_pair(const TorusField& m, const TorusFlux& J, double delta,
                                           const CostFunction& F) {
  return tilt_pair(m, J, delta, F.m_ref, F.J_ref);
}

DiscretePath tilt_path(const DiscretePath& p, double delta, const CostFunction& F) {
  check_path(p);
  DiscretePath out = p;
  for (size_t k = 0; k < p.J.size(); ++k) {
    auto pair = tilt_pair(p.m[k], p.J[k], delta, F);
    out.m[k] = std::move(pair.first);
    out.J[k] = std::move(pair.second);
  }
  auto last = tilt_pair(p.m.back(), p.J.back(), delta, F);
  out.m.back() = std::move(last.first);
  return out;
}

SpaceKernel space_kernel(int d, int n, double lambda) {
  if (!(lambda > 0.0)) throw domain_error("heat smoothing needs lambda > 0");
  if (d < 1 || n < 1) throw domain_error("heat kernel needs d, n >= 1");
  const double eps = 1.0 / n;
  const double sigma = std::sqrt(2.0 * lambda);
  const int images = std::max(2, static_cast<int>(std::ceil(6.0 * std::sqrt(lambda) + 1.0)));
  // One-dimensional weights: mass of cube k as seen from the center of cube
  // 0, summed over torus images.
  auto cdf = [&](double t) { return 0.5 * (1.0 + std::erf(t / (sigma * 1.4142135623730951))); };
  dvec axis(n, 0.0);
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    for (int r = -images; r <= images; ++r) {
      double a = k * eps + r - 0.5 * eps;
      s += cdf(a + eps) - cdf(a);
    }
    axis[k] = s;
  }
  double axis_sum = vsum(axis);
  for (double& x : axis) x /= axis_sum;

  SpaceKernel ker;
  ker.d = d;
  ker.n = n;
  ker.cells = grid_indexer(d, n);
  ker.w.assign(ker.cells.total, 0.0);
  ker.min_weight = inf;
  for (long long c = 0; c < ker.cells.total; ++c) {
    ivec z = ker.cells.coords(c);
    double wv = 1.0;
    for (int i = 0; i < d; ++i) wv *= axis[z[i]];
    ker.w[c] = wv;
    ker.min_weight = std::min(ker.min_weight, wv);
  }
  return ker;
}

namespace {

/// Convolution over the cell index, identical weights for every slot of the
/// cell (fiber masses or stencil fluxes). The inner loop order is a function
/// of the kernel only, so the operation commutes with shifts bitwise.
dvec convolve_cells(const RescaledGraph& rg, const SpaceKernel& ker, const dvec& in, int slots) {
  dvec out(in.size(), 0.0);
  std::vector<long long> src(ker.cells.total);
  for (long long c = 0; c < rg.cells.total; ++c) {
    ivec z = rg.cells.coords(c);
    for (long long k = 0; k < ker.cells.total; ++k) {
      ivec off = ker.cells.coords(k);
      ivec zz(rg.base->d);
      for (int i = 0; i < rg.base->d; ++i) zz[i] = z[i] - off[i];
      src[k] = rg.cells.index(zz);
    }
    for (int s = 0; s < slots; ++s) {
      double acc = 0.0;
      for (long long k = 0; k < ker.cells.total; ++k)
        acc += ker.w[k] * in[src[k] * slots + s];
      out[c * slots + s] = acc;
    }
  }
  return out;
}

}  // namespace

TorusField smooth_space(const TorusField& m, double lambda) {
  const RescaledGraph& rg = *m.rg;
  SpaceKernel ker = space_kernel(rg.base->d, rg.n, lambda);
  TorusField out = m;
  out.v = convolve_cells(rg, ker, m.v, rg.base->fiber_count());
  return out;
}

TorusFlux smooth_space(const TorusFlux& J, double lambda) {
  const RescaledGraph& rg = *J.rg;
  SpaceKernel ker = space_kernel(rg.base->d, rg.n, lambda);
  TorusFlux out = J;
  out.v = convolve_cells(rg, ker, J.v, rg.base->edge_count());
  return out;
}

DiscretePath smooth_space(const DiscretePath& p, double lambda) {
  check_path(p);
  const RescaledGraph& rg = *p.rg;
  SpaceKernel ker = space_kernel(rg.base->d, rg.n, lambda);
  DiscretePath out = p;
  for (TorusField& m : out.m) m.v = convolve_cells(rg, ker, m.v, rg.base->fiber_count());
  for (TorusFlux& J : out.J) J.v = convolve_cells(rg, ker, J.v, rg.base->edge_count());
  return out;
}

DiscretePath smooth_time(const DiscretePath& p, double tau) {
  check_path(p);
  const double dt = p.dt();
  const double len = p.t1 - p.t0;
  if (!(tau > 0.0 && tau < 0.5 * len)) throw domain_error("smooth_time needs 0 < tau < |I|/2");
  const double ratio = tau / dt;
  const int r = static_cast<int>(std::llround(ratio));
  if (r < 1 || std::abs(ratio - r) > 1e-9)
    throw domain_error("tau must be a positive multiple of the time step");
  const int K = p.steps();
  const int Kn = K - 2 * r;
  if (Kn < 1) throw domain_error("tau leaves no interval after shrinking");

  dvec coeff(2 * r + 1, 1.0 / (2.0 * r));
  coeff.front() *= 0.5;
  coeff.back() *= 0.5;

  DiscretePath out;
  out.rg = p.rg;
  out.t0 = p.t0 + tau;
  out.t1 = p.t1 - tau;
  out.m.assign(Kn + 1, make_torus_field(p.rg));
  out.J.assign(Kn, make_torus_flux(p.rg));
  for (int i = 0; i <= Kn; ++i)
    for (int w = 0; w <= 2 * r; ++w)
      for (size_t x = 0; x < out.m[i].v.size(); ++x)
        out.m[i].v[x] += coeff[w] * p.m[i + w].v[x];
  for (int i = 0; i < Kn; ++i)
    for (int w = 0; w <= 2 * r; ++w)
      for (size_t x = 0; x < out.J[i].v.size(); ++x)
        out.J[i].v[x] += coeff[w] * p.J[i + w].v[x];
  return out;
}

}  // namespace lot
