#include "lot/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "lot/divergence.hpp"

namespace lot {

namespace {

constexpr double two_pi = 6.283185307179586476925287;

// 8-point Gauss-Legendre on [-1,1]: exact for polynomials up to degree 15,
// which covers the overlap products (degree <= d) with room to spare.
constexpr double gl_x[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                            -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                            0.7966664774136267,  0.9602898564975363};
constexpr double gl_w[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                            0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                            0.2223810344533745, 0.1012285362903763};

double tri(double t) { return std::max(0.0, 1.0 - std::abs(t)); }

/// Exact value of int_0^1 prod_i tri(o_i - s dz_i) ds: the integrand is
/// polynomial between the slide parameters where any factor crosses a kink.
double slide_overlap(const ivec& o, const ivec& dz) {
  const int d = static_cast<int>(o.size());
  std::vector<double> bp = {0.0, 1.0};
  for (int i = 0; i < d; ++i) {
    if (dz[i] == 0) continue;
    for (int c = -1; c <= 1; ++c) {
      double s = (o[i] - c) / static_cast<double>(dz[i]);
      if (s > 0.0 && s < 1.0) bp.push_back(s);
    }
  }
  std::sort(bp.begin(), bp.end());
  double total = 0.0;
  for (size_t seg = 0; seg + 1 < bp.size(); ++seg) {
    double a = bp[seg], b = bp[seg + 1];
    if (b - a < 1e-15) continue;
    double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int q = 0; q < 8; ++q) {
      double s = mid + half * gl_x[q];
      double prod = 1.0;
      for (int i = 0; i < d; ++i) prod *= tri(o[i] - s * dz[i]);
      total += gl_w[q] * half * prod;
    }
  }
  return total;
}

}  // namespace

double TorusMeasure::total() const {
  if (comps != 1 || density) throw domain_error("total() is for cube-mass measures");
  return vsum(w);
}

double TorusMeasure::tv() const {
  if (!density) return l1_norm(w);
  double cube_vol = 1.0;
  for (int i = 0; i < d; ++i) cube_vol *= eps();
  double s = 0.0;
  for (long long c = 0; c < cells.total; ++c) {
    double n2 = 0.0;
    for (int i = 0; i < comps; ++i) n2 += w[c * comps + i] * w[c * comps + i];
    s += std::sqrt(n2);
  }
  return cube_vol * s;
}

TorusMeasure grid_measure(int d, int n) {
  if (d < 1 || n < 1) throw domain_error("grid measure needs d, n >= 1");
  TorusMeasure mu;
  mu.d = d;
  mu.n = n;
  mu.comps = 1;
  mu.cells = grid_indexer(d, n);
  mu.w.assign(mu.cells.total, 0.0);
  return mu;
}

TorusMeasure embed_density(const TorusField& m) {
  const RescaledGraph& rg = *m.rg;
  TorusMeasure mu = grid_measure(rg.base->d, rg.n);
  const int V = rg.base->fiber_count();
  for (long long c = 0; c < rg.cells.total; ++c) {
    double s = 0.0;
    for (int v = 0; v < V; ++v) s += m.v[rg.vidx(c, v)];
    mu.w[c] = s;
  }
  return mu;
}

TorusMeasure embed_flux(const TorusFlux& J) {
  const RescaledGraph& rg = *J.rg;
  const PeriodicGraph& g = *rg.base;
  if (rg.n <= 2 * g.r0) throw domain_error("flux embedding needs eps * R0 < 1/2");
  const int d = g.d;
  TorusMeasure mu;
  mu.d = d;
  mu.n = rg.n;
  mu.comps = d;
  mu.density = true;
  mu.cells = grid_indexer(d, rg.n);
  mu.w.assign(mu.cells.total * d, 0.0);
  const double eps = rg.eps();
  double cube_vol = 1.0;
  for (int i = 0; i < d; ++i) cube_vol *= eps;
  const double density_scale = eps / cube_vol;  // eps^{1-d}
  for (long long c = 0; c < rg.cells.total; ++c) {
    ivec z = rg.cells.coords(c);
    for (int e = 0; e < g.edge_count(); ++e) {
      double Jv = J.v[rg.eidx(c, e)];
      if (Jv == 0.0) continue;
      const ivec& dz = g.edges[e].dz;
      // The dragged cube only touches offsets between tail and head frames.
      ivec lo(d), hi(d), o(d);
      for (int i = 0; i < d; ++i) {
        lo[i] = std::min(0, dz[i]);
        hi[i] = std::max(0, dz[i]);
        o[i] = lo[i];
      }
      while (true) {
        double frac = slide_overlap(o, dz);
        if (frac > 0.0) {
          long long cube = mu.cells.index(iadd(z, o));
          for (int i = 0; i < d; ++i) mu.w[cube * d + i] += density_scale * Jv * frac * dz[i];
        }
        int axis = d - 1;
        while (axis >= 0 && ++o[axis] > hi[axis]) {
          o[axis] = lo[axis];
          --axis;
        }
        if (axis < 0) break;
      }
    }
  }
  return mu;
}

double embedded_flux_tv(const TorusFlux& J) {
  const RescaledGraph& rg = *J.rg;
  const PeriodicGraph& g = *rg.base;
  double total = 0.0;
  for (long long c = 0; c < rg.cells.total; ++c)
    for (int e = 0; e < g.edge_count(); ++e) {
      double len = 0.0;
      for (int x : g.edges[e].dz) len += static_cast<double>(x) * x;
      total += rg.eps() * std::abs(J.v[rg.eidx(c, e)]) * std::sqrt(len);
    }
  return total;
}

double TestFunction::value(const dvec& x) const {
  double s = 0.0;
  for (const Mode& m : modes) {
    double phase = m.phase;
    for (int i = 0; i < d; ++i) phase += two_pi * m.k[i] * x[i];
    s += m.amp * std::cos(phase);
  }
  return s;
}

dvec TestFunction::gradient(const dvec& x) const {
  dvec g(d, 0.0);
  for (const Mode& m : modes) {
    double phase = m.phase;
    for (int i = 0; i < d; ++i) phase += two_pi * m.k[i] * x[i];
    double s = std::sin(phase);
    for (int i = 0; i < d; ++i) g[i] -= m.amp * two_pi * m.k[i] * s;
  }
  return g;
}

namespace {

std::complex<double> mode_box_product(const TestFunction::Mode& m, const dvec& lo, double side) {
  std::complex<double> term =
      m.amp * std::exp(std::complex<double>(0.0, m.phase));
  for (size_t j = 0; j < m.k.size(); ++j) {
    if (m.k[j] == 0) {
      term *= side;
    } else {
      double a = two_pi * m.k[j];
      std::complex<double> hi = std::exp(std::complex<double>(0.0, a * (lo[j] + side)));
      std::complex<double> lo_e = std::exp(std::complex<double>(0.0, a * lo[j]));
      term *= (hi - lo_e) / std::complex<double>(0.0, a);
    }
  }
  return term;
}

}  // namespace

double TestFunction::box_integral(const dvec& lo, double side) const {
  std::complex<double> acc = 0.0;
  for (const Mode& m : modes) acc += mode_box_product(m, lo, side);
  return acc.real();
}

double TestFunction::box_integral_grad(const dvec& lo, double side, int i) const {
  std::complex<double> acc = 0.0;
  for (const Mode& m : modes)
    acc += std::complex<double>(0.0, two_pi * m.k[i]) * mode_box_product(m, lo, side);
  return acc.real();
}

TestFunction TestFunction::random(int d, int max_modes, int max_freq, rng& r) {
  TestFunction f;
  f.d = d;
  int nm = r.uniform_int(1, std::max(1, max_modes));
  for (int m = 0; m < nm; ++m) {
    Mode mo;
    mo.k.assign(d, 0);
    do {
      for (int i = 0; i < d; ++i) mo.k[i] = r.uniform_int(-max_freq, max_freq);
    } while (is_zero(mo.k));
    mo.amp = r.uniform(-1.0, 1.0);
    mo.phase = r.uniform(0.0, two_pi);
    f.modes.push_back(std::move(mo));
  }
  return f;
}

double integrate(const TorusMeasure& mu, const TestFunction& phi) {
  if (mu.comps != 1) throw domain_error("integrate() pairs scalar measures");
  if (phi.d != mu.d) throw domain_error("test function dimension mismatch");
  const double eps = mu.eps();
  double cube_vol = 1.0;
  for (int i = 0; i < mu.d; ++i) cube_vol *= eps;
  double s = 0.0;
  for (long long c = 0; c < mu.cells.total; ++c) {
    if (mu.w[c] == 0.0) continue;
    ivec z = mu.cells.coords(c);
    dvec lo(mu.d);
    for (int i = 0; i < mu.d; ++i) lo[i] = eps * z[i];
    s += mu.w[c] * phi.box_integral(lo, eps) / cube_vol;
  }
  return s;
}

double flux_pairing(const TorusFlux& J, const TestFunction& phi) {
  const RescaledGraph& rg = *J.rg;
  const PeriodicGraph& g = *rg.base;
  if (phi.d != g.d) throw domain_error("test function dimension mismatch");
  const double eps = rg.eps();
  double cube_vol = 1.0;
  for (int i = 0; i < g.d; ++i) cube_vol *= eps;
  const double scale = eps / cube_vol;  // eps^{1-d}
  const int panels = 64;
  double total = 0.0;
  dvec lo(g.d);
  for (long long c = 0; c < rg.cells.total; ++c) {
    ivec z = rg.cells.coords(c);
    for (int e = 0; e < g.edge_count(); ++e) {
      double Jv = J.v[rg.eidx(c, e)];
      if (Jv == 0.0) continue;
      const ivec& dz = g.edges[e].dz;
      double line = 0.0;
      for (int p = 0; p < panels; ++p) {
        double a = static_cast<double>(p) / panels, b = static_cast<double>(p + 1) / panels;
        double mid = 0.5 * (a + b), half = 0.5 * (b - a);
        for (int q = 0; q < 8; ++q) {
          double s = mid + half * gl_x[q];
          for (int i = 0; i < g.d; ++i) lo[i] = eps * (z[i] + s * dz[i]);
          double gsum = 0.0;
          for (int i = 0; i < g.d; ++i)
            if (dz[i] != 0) gsum += phi.box_integral_grad(lo, eps, i) * dz[i];
          line += gl_w[q] * half * gsum;
        }
      }
      total += scale * Jv * line;
    }
  }
  return total;
}

double weak_ce_residual(const DiscretePath& p, const std::vector<TestFunction>& phis) {
  check_path(p);
  const double dt = p.dt();
  double worst = 0.0;
  for (const TestFunction& phi : phis) {
    std::vector<double> node_integrals(p.m.size());
    for (size_t k = 0; k < p.m.size(); ++k)
      node_integrals[k] = integrate(embed_density(p.m[k]), phi);
    for (int k = 0; k < p.steps(); ++k) {
      double r = (node_integrals[k + 1] - node_integrals[k]) / dt - flux_pairing(p.J[k], phi);
      worst = std::max(worst, std::abs(r));
    }
  }
  return worst;
}

}  // namespace lot
