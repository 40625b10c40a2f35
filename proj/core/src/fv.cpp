#include "lot/fv.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <sstream>

#include "lot/divergence.hpp"

namespace lot {

namespace {

constexpr double kDegenerate = 1e-12;
constexpr double kOrtho = 1e-9;

dvec vsub(const dvec& a, const dvec& b) {
  dvec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
  return r;
}

dvec shifted(const dvec& v, const ivec& dz) {
  dvec r(v.size());
  for (size_t i = 0; i < v.size(); ++i) r[i] = v[i] + dz[i];
  return r;
}

bool lex_positive(const ivec& z) {
  for (int c : z)
    if (c != 0) return c > 0;
  return false;
}

std::string cell_name(const FVPartition& p, int i) {
  return p.cells[i].label.empty() ? "cell " + std::to_string(i) : p.cells[i].label;
}

// ---- facet recovery, d = 1 -------------------------------------------------

void interval_of(const FVCell& c, double& lo, double& hi) {
  lo = inf;
  hi = -inf;
  for (const dvec& v : c.vertices) {
    lo = std::min(lo, v[0]);
    hi = std::max(hi, v[0]);
  }
  if (!(hi > lo)) throw domain_error("degenerate interval cell");
}

// ---- facet recovery, d = 2 -------------------------------------------------

// Convex polygon area and boundary need a consistent vertex order; the input
// order is free, so sort by angle about the centroid.
std::vector<dvec> ordered_polygon(const FVCell& c) {
  if (c.vertices.size() < 3) throw domain_error("polygon cell needs at least 3 vertices");
  dvec ctr(2, 0.0);
  for (const dvec& v : c.vertices) {
    ctr[0] += v[0];
    ctr[1] += v[1];
  }
  ctr[0] /= c.vertices.size();
  ctr[1] /= c.vertices.size();
  std::vector<dvec> vs = c.vertices;
  std::sort(vs.begin(), vs.end(), [&](const dvec& a, const dvec& b) {
    return std::atan2(a[1] - ctr[1], a[0] - ctr[0]) < std::atan2(b[1] - ctr[1], b[0] - ctr[0]);
  });
  return vs;
}

double polygon_area(const std::vector<dvec>& vs) {
  double twice = 0.0;
  for (size_t i = 0; i < vs.size(); ++i) {
    const dvec& a = vs[i];
    const dvec& b = vs[(i + 1) % vs.size()];
    twice += a[0] * b[1] - a[1] * b[0];
  }
  return std::abs(twice) / 2.0;
}

// Total overlap length of the two polygon boundaries, along with a unit
// direction of the shared line (meaningful only when the length is positive).
// Corner contacts between collinear edges leave 1e-16 of roundoff in the
// overlap; anything below 1e-14 is treated as no contact, and the direction
// follows the dominant piece.
double boundary_overlap(const std::vector<dvec>& pa, const std::vector<dvec>& pb, const ivec& dz,
                        dvec& direction) {
  double total = 0.0, best = 0.0;
  direction.assign(2, 0.0);
  for (size_t i = 0; i < pa.size(); ++i) {
    dvec a0 = pa[i], a1 = pa[(i + 1) % pa.size()];
    dvec u = vsub(a1, a0);
    double len = l2_norm(u);
    if (len <= kDegenerate) continue;
    u[0] /= len;
    u[1] /= len;
    for (size_t j = 0; j < pb.size(); ++j) {
      dvec b0 = shifted(pb[j], dz), b1 = shifted(pb[(j + 1) % pb.size()], dz);
      // Collinearity: both endpoints of the second segment on the first line.
      double c0 = (b0[0] - a0[0]) * u[1] - (b0[1] - a0[1]) * u[0];
      double c1 = (b1[0] - a0[0]) * u[1] - (b1[1] - a0[1]) * u[0];
      if (std::abs(c0) > kDegenerate || std::abs(c1) > kDegenerate) continue;
      double s0 = 0.0, s1 = len;
      double t0 = (b0[0] - a0[0]) * u[0] + (b0[1] - a0[1]) * u[1];
      double t1 = (b1[0] - a0[0]) * u[0] + (b1[1] - a0[1]) * u[1];
      if (t0 > t1) std::swap(t0, t1);
      double ov = std::min(s1, t1) - std::max(s0, t0);
      if (ov > 1e-14) {
        total += ov;
        if (ov > best) {
          best = ov;
          direction = u;
        }
      }
    }
  }
  return total;
}

// ---- facet recovery, d = 3 -------------------------------------------------

struct Box {
  dvec lo, hi;
};

Box box_of(const FVCell& c) {
  if (c.vertices.size() != 8)
    throw domain_error("facet recovery at d = 3 covers axis-aligned boxes only (8 vertices)");
  Box b{dvec(3, inf), dvec(3, -inf)};
  for (const dvec& v : c.vertices)
    for (int i = 0; i < 3; ++i) {
      b.lo[i] = std::min(b.lo[i], v[i]);
      b.hi[i] = std::max(b.hi[i], v[i]);
    }
  for (const dvec& v : c.vertices)
    for (int i = 0; i < 3; ++i)
      if (std::abs(v[i] - b.lo[i]) > kDegenerate && std::abs(v[i] - b.hi[i]) > kDegenerate)
        throw domain_error("facet recovery at d = 3 covers axis-aligned boxes only");
  for (int i = 0; i < 3; ++i)
    if (!(b.hi[i] - b.lo[i] > kDegenerate)) throw domain_error("degenerate box cell");
  return b;
}

double box_contact(const Box& a, const Box& b, const ivec& dz, dvec& direction_normal) {
  for (int k = 0; k < 3; ++k) {
    double blo = b.lo[k] + dz[k], bhi = b.hi[k] + dz[k];
    if (std::abs(a.hi[k] - blo) > kDegenerate && std::abs(bhi - a.lo[k]) > kDegenerate) continue;
    double area = 1.0;
    for (int l = 0; l < 3; ++l) {
      if (l == k) continue;
      double ov = std::min(a.hi[l], b.hi[l] + dz[l]) - std::max(a.lo[l], b.lo[l] + dz[l]);
      if (ov <= 0.0) {
        area = 0.0;
        break;
      }
      area *= ov;
    }
    if (area > 0.0) {
      direction_normal.assign(3, 0.0);
      direction_normal[k] = 1.0;
      return area;
    }
  }
  return 0.0;
}

// ---- shared validation -----------------------------------------------------

void finish_partition(FVPartition& p) {
  double tot = 0.0;
  for (double v : p.volume) {
    if (!(v > 0.0)) throw domain_error("cell volumes must be positive");
    tot += v;
  }
  if (std::abs(tot - 1.0) > 1e-12)
    throw domain_error("cells do not tile the unit cell (volumes sum to " + std::to_string(tot) +
                       ")");
  for (FVFacet& f : p.facets) {
    dvec diff = shifted(p.cells[f.b].site, f.dz);
    diff = vsub(diff, p.cells[f.a].site);
    f.dist = l2_norm(diff);
    if (f.dist <= kDegenerate) throw domain_error("adjacent sites coincide");
    f.normal.resize(p.d);
    for (int i = 0; i < p.d; ++i) f.normal[i] = diff[i] / f.dist;
    if (!(f.area > 0.0)) throw domain_error("facet areas must be positive");
  }
}

}  // namespace

FVPartition make_partition(int d, std::vector<FVCell> cells) {
  if (d < 1 || d > 3)
    throw domain_error("geometric facet recovery covers d in {1,2,3}; use the precomputed overload");
  if (cells.empty()) throw domain_error("partition needs at least one cell");
  for (const FVCell& c : cells) {
    if (static_cast<int>(c.site.size()) != d) throw domain_error("site has wrong dimension");
    for (const dvec& v : c.vertices)
      if (static_cast<int>(v.size()) != d) throw domain_error("vertex has wrong dimension");
  }

  FVPartition p;
  p.d = d;
  p.cells = std::move(cells);
  const int nc = static_cast<int>(p.cells.size());

  // Per-cell derived shapes and bounding boxes.
  std::vector<std::vector<dvec>> polys(nc);
  std::vector<Box> boxes(nc);
  std::vector<dvec> lo(nc, dvec(d, inf)), hi(nc, dvec(d, -inf));
  p.volume.assign(nc, 0.0);
  for (int i = 0; i < nc; ++i) {
    const FVCell& c = p.cells[i];
    if (d == 1) {
      double a, b;
      interval_of(c, a, b);
      p.volume[i] = b - a;
      lo[i][0] = a;
      hi[i][0] = b;
    } else if (d == 2) {
      polys[i] = ordered_polygon(c);
      p.volume[i] = polygon_area(polys[i]);
      for (const dvec& v : polys[i])
        for (int k = 0; k < 2; ++k) {
          lo[i][k] = std::min(lo[i][k], v[k]);
          hi[i][k] = std::max(hi[i][k], v[k]);
        }
    } else {
      boxes[i] = box_of(c);
      p.volume[i] = (boxes[i].hi[0] - boxes[i].lo[0]) * (boxes[i].hi[1] - boxes[i].lo[1]) *
                    (boxes[i].hi[2] - boxes[i].lo[2]);
      lo[i] = boxes[i].lo;
      hi[i] = boxes[i].hi;
    }
  }

  // Candidate adjacencies: lattice offsets whose translate can touch.
  for (int i = 0; i < nc; ++i) {
    for (int j = 0; j < nc; ++j) {
      ivec zlo(d), zhi(d);
      for (int k = 0; k < d; ++k) {
        zlo[k] = static_cast<int>(std::ceil(lo[i][k] - hi[j][k] - 1e-9));
        zhi[k] = static_cast<int>(std::floor(hi[i][k] - lo[j][k] + 1e-9));
      }
      ivec dz = zlo;
      while (true) {
        bool take = lex_positive(dz) || (is_zero(dz) && i < j);
        if (take) {
          double area = 0.0;
          dvec facet_dir;
          if (d == 1) {
            double bl = lo[j][0] + dz[0], bh = hi[j][0] + dz[0];
            if (std::abs(hi[i][0] - bl) <= kDegenerate || std::abs(bh - lo[i][0]) <= kDegenerate)
              area = 1.0;
          } else if (d == 2) {
            area = boundary_overlap(polys[i], polys[j], dz, facet_dir);
          } else {
            area = box_contact(boxes[i], boxes[j], dz, facet_dir);
          }
          // Corner contacts evaluate to exact zero (or roundoff dust below
          // 1e-15) and are skipped silently; a genuinely thin sliver gets a
          // warning instead of an edge.
          if (area > kDegenerate) {
            FVFacet f;
            f.a = i;
            f.dz = dz;
            f.b = j;
            f.area = area;
            p.facets.push_back(f);
            // Orthogonality of the site difference against the facet.
            dvec diff = vsub(shifted(p.cells[j].site, dz), p.cells[i].site);
            double dn = l2_norm(diff);
            if (dn <= kDegenerate) throw domain_error("adjacent sites coincide");
            if (d == 2) {
              double c = std::abs(dot(facet_dir, diff)) / dn;
              if (c > kOrtho)
                throw domain_error("sites of " + cell_name(p, i) + " and " + cell_name(p, j) +
                                   " do not subtend their shared facet orthogonally");
            } else if (d == 3) {
              for (int k = 0; k < 3; ++k)
                if (facet_dir[k] == 0.0 && std::abs(diff[k]) / dn > kOrtho)
                  throw domain_error("sites of " + cell_name(p, i) + " and " + cell_name(p, j) +
                                     " do not subtend their shared facet orthogonally");
            }
          } else if (area > 1e-15) {
            std::ostringstream os;
            os << "degenerate facet between " << cell_name(p, i) << " and " << cell_name(p, j)
               << " (offset";
            for (int k = 0; k < d; ++k) os << " " << dz[k];
            os << ") excluded, area " << area;
            p.warnings.push_back(os.str());
          }
        }
        // Odometer over [zlo, zhi].
        int k = 0;
        while (k < d) {
          if (++dz[k] <= zhi[k]) break;
          dz[k] = zlo[k];
          ++k;
        }
        if (k == d) break;
      }
    }
  }

  finish_partition(p);
  return p;
}

FVPartition make_partition(int d, std::vector<FVCell> cells, dvec volume,
                           std::vector<FVFacet> facets) {
  if (d < 1) throw domain_error("dimension must be positive");
  if (cells.empty()) throw domain_error("partition needs at least one cell");
  if (volume.size() != cells.size()) throw domain_error("one volume per cell required");
  FVPartition p;
  p.d = d;
  p.cells = std::move(cells);
  p.volume = std::move(volume);
  for (const FVCell& c : p.cells)
    if (static_cast<int>(c.site.size()) != d) throw domain_error("site has wrong dimension");
  const int nc = static_cast<int>(p.cells.size());
  for (FVFacet& f : facets) {
    if (f.a < 0 || f.a >= nc || f.b < 0 || f.b >= nc)
      throw domain_error("facet references unknown cell");
    if (static_cast<int>(f.dz.size()) != d) throw domain_error("facet offset has wrong dimension");
    if (f.area > kDegenerate) {
      p.facets.push_back(f);
    } else {
      p.warnings.push_back("degenerate facet between " + cell_name(p, f.a) + " and " +
                           cell_name(p, f.b) + " excluded");
    }
  }
  finish_partition(p);
  return p;
}

FVPartition square_mesh(int d) {
  if (d < 1) throw domain_error("dimension must be positive");
  FVCell c;
  c.label = "c";
  c.site.assign(d, 0.5);
  for (int mask = 0; mask < (1 << d); ++mask) {
    dvec v(d);
    for (int i = 0; i < d; ++i) v[i] = (mask >> i) & 1;
    c.vertices.push_back(v);
  }
  if (d <= 3) return make_partition(d, {c});
  std::vector<FVFacet> facets;
  for (int i = 0; i < d; ++i) {
    FVFacet f;
    f.a = f.b = 0;
    f.dz.assign(d, 0);
    f.dz[i] = 1;
    f.area = 1.0;
    facets.push_back(f);
  }
  return make_partition(d, {c}, {1.0}, facets);
}

FVPartition triangle_mesh() {
  const dvec ctr{0.5, 0.5};
  FVCell n{"N", {0.5, 0.75}, {{0.0, 1.0}, {1.0, 1.0}, ctr}};
  FVCell s{"S", {0.5, 0.25}, {{0.0, 0.0}, {1.0, 0.0}, ctr}};
  FVCell w{"W", {0.25, 0.5}, {{0.0, 0.0}, {0.0, 1.0}, ctr}};
  FVCell e{"E", {0.75, 0.5}, {{1.0, 0.0}, {1.0, 1.0}, ctr}};
  return make_partition(2, {n, s, w, e});
}

FVGraph build_graph(FVPartition part) {
  FVGraph fg;
  std::vector<std::string> labels(part.cells.size());
  for (size_t i = 0; i < part.cells.size(); ++i) {
    labels[i] = part.cells[i].label.empty() ? "c" + std::to_string(i) : part.cells[i].label;
  }
  std::vector<stencil_edge> raw;
  for (const FVFacet& f : part.facets) raw.push_back({f.a, f.dz, f.b});
  std::vector<std::pair<int, int>> map;
  auto g = std::make_shared<PeriodicGraph>(
      PeriodicGraph::make(part.d, std::move(labels), std::move(raw), &map));

  fg.g = g;
  fg.volume = part.volume;
  fg.dist.assign(g->edge_count(), 0.0);
  fg.area.assign(g->edge_count(), 0.0);
  fg.normal.assign(g->edge_count(), dvec(part.d, 0.0));
  for (size_t k = 0; k < part.facets.size(); ++k) {
    const FVFacet& f = part.facets[k];
    int e = map[k].first, sgn = map[k].second;
    fg.dist[e] = f.dist;
    fg.area[e] = f.area;
    for (int i = 0; i < part.d; ++i) fg.normal[e][i] = sgn * f.normal[i];
  }
  fg.part = std::move(part);
  return fg;
}

FVIdentityReport fv_identity(const FVPartition& part) {
  const int d = part.d;
  FVIdentityReport rep;
  rep.matrix.assign(d, dvec(d, 0.0));
  // Both ordered pairs of a facet contribute the same rank-one term, so the
  // half cancels against summing facets once.
  for (const FVFacet& f : part.facets)
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) rep.matrix[i][j] += f.dist * f.area * f.normal[i] * f.normal[j];
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      rep.deviation = std::max(rep.deviation, std::abs(rep.matrix[i][j] - (i == j ? 1.0 : 0.0)));
  return rep;
}

CandidateRep candidate_rep(const FVGraph& fg, double rho, const dvec& j) {
  if (static_cast<int>(j.size()) != fg.g->d) throw domain_error("flux has wrong dimension");
  if (rho < 0.0) throw domain_error("negative density");
  CandidateRep rep;
  rep.m.g = fg.g;
  rep.J.g = fg.g;
  rep.m.v.resize(fg.volume.size());
  for (size_t i = 0; i < fg.volume.size(); ++i) rep.m.v[i] = fg.volume[i] * rho;
  rep.J.v.resize(fg.g->edge_count());
  for (int e = 0; e < fg.g->edge_count(); ++e) rep.J.v[e] = fg.area[e] * dot(j, fg.normal[e]);
  rep.div_inf = linf_norm(divergence(rep.J));
  dvec eff = effective_flux(rep.J);
  for (int i = 0; i < fg.g->d; ++i) rep.eff_err = std::max(rep.eff_err, std::abs(eff[i] - j[i]));
  return rep;
}

// ---- mobilities ------------------------------------------------------------

Mobility Mobility::linear() {
  Mobility m;
  m.label = "linear";
  m.value = [](double r) { return r; };
  m.derivative = [](double) { return 1.0; };
  return m;
}

double MobilitySpec::edge_value(int edge, bool fwd, double a, double b) const {
  if (version == Version::minimum) return m.value(std::min(a, b));
  double lam = lambda[edge];
  if (!fwd) lam = 1.0 - lam;
  return m.value(lam * a + (1.0 - lam) * b);
}

MobilitySpec weighted_linear_mobility(const FVGraph& fg, Mobility m, double lambda) {
  return weighted_linear_mobility(fg, std::move(m), dvec(fg.g->edge_count(), lambda));
}

MobilitySpec weighted_linear_mobility(const FVGraph& fg, Mobility m, dvec lambda) {
  if (static_cast<int>(lambda.size()) != fg.g->edge_count())
    throw domain_error("one weight per stencil edge required");
  for (double l : lambda)
    if (!(l >= 0.0 && l <= 1.0)) throw domain_error("weights must lie in [0,1]");
  MobilitySpec s;
  s.m = std::move(m);
  s.version = MobilitySpec::Version::weighted_linear;
  s.lambda = std::move(lambda);
  return s;
}

MobilitySpec minimum_mobility(Mobility m) {
  MobilitySpec s;
  s.m = std::move(m);
  s.version = MobilitySpec::Version::minimum;
  return s;
}

// ---- the finite-volume energy ----------------------------------------------

MobilityCost::MobilityCost(FVGraph fg_, MobilitySpec spec_)
    : fg(std::move(fg_)), spec(std::move(spec_)) {
  g = fg.g;
  R1 = g->r0;
  kind = Kind::edge_based;
  if (spec.version == MobilitySpec::Version::weighted_linear &&
      static_cast<int>(spec.lambda.size()) != g->edge_count())
    throw domain_error("one weight per stencil edge required");
  m_ref.g = g;
  m_ref.v = fg.volume;  // normalized density 1 on every cell
  J_ref.g = g;
  J_ref.v.assign(g->edge_count(), 0.0);
}

std::string MobilityCost::name() const {
  std::string v = spec.version == MobilitySpec::Version::minimum ? "minimum" : "weighted-linear";
  return "fv(" + spec.m.label + ", " + v + ")";
}

bool MobilityCost::smooth() const {
  return spec.version == MobilitySpec::Version::weighted_linear &&
         static_cast<bool>(spec.m.derivative);
}

double MobilityCost::evaluate(const FieldWindow& w) const {
  if (w.g != g.get()) throw domain_error("window built for a different graph");
  if (w.w.R < R1) throw domain_error("window too small for cost locality");
  for (double x : w.mass)
    if (x < 0.0) throw domain_error("negative mass");
  double total = 0.0;
  const ivec zero(g->d, 0);
  for (int e = 0; e < g->edge_count(); ++e) {
    const stencil_edge& se = g->edges[e];
    double Jv = w.J(zero, e);
    double an = w.m(zero, se.a) / fg.volume[se.a];
    double bn = w.m(se.dz, se.b) / fg.volume[se.b];
    double coef = fg.dist[e] / fg.area[e];
    for (int half = 0; half < 2; ++half) {
      double den = half == 0 ? spec.edge_value(e, true, an, bn) : spec.edge_value(e, false, bn, an);
      if (den <= 0.0) {
        if (Jv != 0.0) return inf;
        continue;
      }
      total += 0.5 * coef * Jv * Jv / den;
    }
  }
  return total;
}

double MobilityCost::periodic_value_grad(const PeriodicField& m, const PeriodicFlux& J, dvec* gm,
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
    double an = m.v[se.a] / fg.volume[se.a];
    double bn = m.v[se.b] / fg.volume[se.b];
    double coef = fg.dist[e] / fg.area[e];
    double den, da, db;  // mobility and its (sub)gradient in the normalized masses
    if (spec.version == MobilitySpec::Version::minimum) {
      double u = std::min(an, bn);
      den = spec.m.value(u);
      double mp = spec.m.derivative ? spec.m.derivative(u) : 0.0;
      if (an < bn) {
        da = mp;
        db = 0.0;
      } else if (bn < an) {
        da = 0.0;
        db = mp;
      } else {
        da = db = 0.5 * mp;
      }
    } else {
      double lam = spec.lambda[e];
      double u = lam * an + (1.0 - lam) * bn;
      den = spec.m.value(u);
      double mp = spec.m.derivative ? spec.m.derivative(u) : 0.0;
      da = lam * mp;
      db = (1.0 - lam) * mp;
    }
    if (den <= 0.0) {
      if (Jv != 0.0) return inf;
      continue;  // vacuum with zero flux: zero is a valid subgradient
    }
    double val = coef * Jv * Jv / den;  // both oriented pairs together
    total += val;
    if (gJ) (*gJ)[e] += 2.0 * coef * Jv / den;
    if (gm && Jv != 0.0) {
      double dden = -val / den;
      (*gm)[se.a] += dden * da / fg.volume[se.a];
      (*gm)[se.b] += dden * db / fg.volume[se.b];
    }
  }
  return total;
}

// ---- structure checks ------------------------------------------------------

IsometryReport isometry_check(const FVGraph& fg, const dvec& p1) {
  const PeriodicGraph& g = *fg.g;
  const int d = g.d;
  if (static_cast<int>(p1.size()) != 2 * g.edge_count())
    throw domain_error("one value per ordered pair required");
  IsometryReport rep;
  for (int e = 0; e < g.edge_count(); ++e)
    rep.chain_rule_gap =
        std::max(rep.chain_rule_gap,
                 std::abs(p1[pair_index(e, true)] + p1[pair_index(e, false)] - 1.0));
  rep.deviation.assign(g.fiber_count(), 0.0);
  for (int v = 0; v < g.fiber_count(); ++v) {
    std::vector<dvec> A(d, dvec(d, 0.0));
    for (const auto& inc : g.out[v]) {
      double w = p1[pair_index(inc.edge, inc.fwd)] * fg.dist[inc.edge] * fg.area[inc.edge];
      const dvec& n = fg.normal[inc.edge];
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) A[i][j] += w * n[i] * n[j];
    }
    double dev = 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        dev = std::max(dev, std::abs(A[i][j] - (i == j ? fg.volume[v] : 0.0)));
    rep.matrices.push_back(std::move(A));
    rep.deviation[v] = dev;
    rep.max_deviation = std::max(rep.max_deviation, dev);
  }
  return rep;
}

namespace {

// Exact rationals over long long with __int128 intermediates, enough for the
// dyadic geometry the feasibility system snaps to.
struct Rat {
  long long p = 0, q = 1;
};

Rat rat_make(__int128 p, __int128 q) {
  if (q == 0) throw domain_error("rational division by zero");
  if (q < 0) {
    p = -p;
    q = -q;
  }
  __int128 a = p < 0 ? -p : p, b = q;
  while (b) {
    __int128 t = a % b;
    a = b;
    b = t;
  }
  if (a > 1) {
    p /= a;
    q /= a;
  }
  const __int128 lim = static_cast<__int128>(1) << 62;
  if (p > lim || p < -lim || q > lim) throw domain_error("rational overflow in feasibility solve");
  return {static_cast<long long>(p), static_cast<long long>(q)};
}

Rat rat_add(Rat a, Rat b) {
  return rat_make(static_cast<__int128>(a.p) * b.q + static_cast<__int128>(b.p) * a.q,
                  static_cast<__int128>(a.q) * b.q);
}
Rat rat_sub(Rat a, Rat b) { return rat_add(a, {-b.p, b.q}); }
Rat rat_mul(Rat a, Rat b) {
  return rat_make(static_cast<__int128>(a.p) * b.p, static_cast<__int128>(a.q) * b.q);
}
Rat rat_div(Rat a, Rat b) {
  return rat_make(static_cast<__int128>(a.p) * b.q, static_cast<__int128>(a.q) * b.p);
}
bool rat_zero(Rat a) { return a.p == 0; }

std::string rat_str(Rat a) {
  if (a.q == 1) return std::to_string(a.p);
  return std::to_string(a.p) + "/" + std::to_string(a.q);
}

// Best rational approximation by continued fractions; the geometry must sit
// within 1e-9 of a fraction with denominator <= 1e6 or the exact solve is
// refused.
Rat rat_snap(double x) {
  long long h0 = 0, k0 = 1, h1 = 1, k1 = 0;
  double v = x;
  for (int it = 0; it < 64; ++it) {
    double fl = std::floor(v);
    long long a = static_cast<long long>(fl);
    long long h2 = a * h1 + h0, k2 = a * k1 + k0;
    if (k2 > 1000000) break;
    h0 = h1;
    k0 = k1;
    h1 = h2;
    k1 = k2;
    if (std::abs(x - static_cast<double>(h1) / k1) < 1e-13) break;
    double rem = v - fl;
    if (rem < 1e-13) break;
    v = 1.0 / rem;
  }
  if (k1 == 0 || std::abs(x - static_cast<double>(h1) / k1) > 1e-9)
    throw domain_error("partition geometry is not rational; exact feasibility solve refused");
  return rat_make(h1, k1);
}

}  // namespace

LambdaFeasibility isometry_feasibility(const FVGraph& fg) {
  const PeriodicGraph& g = *fg.g;
  const int d = g.d, E = g.edge_count(), V = g.fiber_count();
  const int nvar = 2 * E;

  // Snapped geometry: G[e][i][j] = dist * area * n_i n_j, and the volumes.
  std::vector<std::vector<std::vector<Rat>>> G(E);
  for (int e = 0; e < E; ++e) {
    G[e].assign(d, std::vector<Rat>(d));
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        G[e][i][j] = rat_snap(fg.dist[e] * fg.area[e] * fg.normal[e][i] * fg.normal[e][j]);
  }
  std::vector<Rat> vol(V);
  for (int v = 0; v < V; ++v) vol[v] = rat_snap(fg.volume[v]);

  // Rows: reverse-pair sums, then isometry entries (i <= j) per fiber.
  std::vector<std::vector<Rat>> A;
  std::vector<Rat> b;
  std::vector<std::string> label;
  for (int e = 0; e < E; ++e) {
    std::vector<Rat> row(nvar);
    row[pair_index(e, true)] = {1, 1};
    row[pair_index(e, false)] = {1, 1};
    A.push_back(std::move(row));
    b.push_back({1, 1});
    label.push_back("sum(" + g.fiber[g.edges[e].a] + "~" + g.fiber[g.edges[e].b] + ")");
  }
  for (int v = 0; v < V; ++v)
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) {
        std::vector<Rat> row(nvar);
        for (const auto& inc : g.out[v]) {
          int col = pair_index(inc.edge, inc.fwd);
          row[col] = rat_add(row[col], G[inc.edge][i][j]);
        }
        A.push_back(std::move(row));
        b.push_back(i == j ? vol[v] : Rat{0, 1});
        label.push_back("iso(" + g.fiber[v] + ";" + std::to_string(i + 1) + "," +
                        std::to_string(j + 1) + ")");
      }

  const int M = static_cast<int>(A.size());
  // Multiplier tracking: mult[r] expresses the current row r over the
  // original equations, so an inconsistent row is its own certificate.
  std::vector<std::vector<Rat>> mult(M, std::vector<Rat>(M));
  for (int r = 0; r < M; ++r) mult[r][r] = {1, 1};

  std::vector<int> pivot_row(nvar, -1);
  int rank = 0;
  for (int c = 0; c < nvar && rank < M; ++c) {
    int pr = -1;
    for (int r = rank; r < M; ++r)
      if (!rat_zero(A[r][c])) {
        pr = r;
        break;
      }
    if (pr < 0) continue;
    std::swap(A[pr], A[rank]);
    std::swap(b[pr], b[rank]);
    std::swap(mult[pr], mult[rank]);
    for (int r = 0; r < M; ++r) {
      if (r == rank || rat_zero(A[r][c])) continue;
      Rat f = rat_div(A[r][c], A[rank][c]);
      for (int cc = 0; cc < nvar; ++cc) A[r][cc] = rat_sub(A[r][cc], rat_mul(f, A[rank][cc]));
      b[r] = rat_sub(b[r], rat_mul(f, b[rank]));
      for (int mm = 0; mm < M; ++mm) mult[r][mm] = rat_sub(mult[r][mm], rat_mul(f, mult[rank][mm]));
    }
    pivot_row[c] = rank;
    ++rank;
  }

  LambdaFeasibility out;
  for (int r = rank; r < M; ++r) {
    if (rat_zero(b[r])) continue;
    std::ostringstream os;
    bool first = true;
    for (int mm = 0; mm < M; ++mm) {
      if (rat_zero(mult[r][mm])) continue;
      if (!first) os << " + ";
      os << "(" << rat_str(mult[r][mm]) << ") " << label[mm];
      first = false;
    }
    os << " gives 0 = " << rat_str(b[r]);
    out.feasible = false;
    out.certificate = os.str();
    return out;
  }

  // Consistent: center the free parameters and back-substitute exactly.
  std::vector<Rat> x(nvar, Rat{1, 2});
  for (int c = 0; c < nvar; ++c) {
    if (pivot_row[c] < 0) continue;
    int r = pivot_row[c];
    Rat rhs = b[r];
    for (int cc = 0; cc < nvar; ++cc) {
      if (cc == c || rat_zero(A[r][cc])) continue;
      if (pivot_row[cc] >= 0)
        throw domain_error("internal elimination error");  // RREF leaves only free columns
      rhs = rat_sub(rhs, rat_mul(A[r][cc], x[cc]));
    }
    x[c] = rat_div(rhs, A[r][c]);
  }
  out.feasible = true;
  out.lambda.resize(nvar);
  out.in_unit_interval = true;
  for (int c = 0; c < nvar; ++c) {
    out.lambda[c] = static_cast<double>(x[c].p) / static_cast<double>(x[c].q);
    if (x[c].p < 0 || x[c].p > x[c].q) out.in_unit_interval = false;
  }
  return out;
}

IsotropyReport isotropy_check(const FVGraph& fg, const MobilitySpec& spec, double rho,
                              const dvec& j, const SupergradientSelector& sel) {
  const PeriodicGraph& g = *fg.g;
  if (static_cast<int>(j.size()) != g.d) throw domain_error("flux has wrong dimension");
  if (!spec.m.derivative) throw domain_error("isotropy check needs the mobility derivative");
  const double mp = spec.m.derivative(rho);

  SupergradientSelector pick = sel;
  if (!pick) {
    MobilitySpec local = spec;  // capture by value, the check outlives no one
    pick = [local, mp](int e, bool fwd, double, const dvec&) {
      if (local.version == MobilitySpec::Version::minimum) return std::pair(0.5 * mp, 0.5 * mp);
      double lam = local.lambda[e];
      if (!fwd) lam = 1.0 - lam;
      return std::pair(lam * mp, (1.0 - lam) * mp);
    };
  }

  // Validate the selection against the supergradient set at (rho, rho).
  const double tol = 1e-9 * std::max(1.0, std::abs(mp));
  std::vector<std::pair<double, double>> p(2 * g.edge_count());
  for (int e = 0; e < g.edge_count(); ++e)
    for (int half = 0; half < 2; ++half) {
      bool fwd = half == 0;
      auto pr = pick(e, fwd, rho, j);
      if (pr.first < -tol || pr.second < -tol || std::abs(pr.first + pr.second - mp) > tol)
        throw domain_error("selected pair is outside the mobility supergradient");
      if (spec.version == MobilitySpec::Version::weighted_linear) {
        double lam = fwd ? spec.lambda[e] : 1.0 - spec.lambda[e];
        if (std::abs(pr.first - lam * mp) > tol)
          throw domain_error("weighted-linear versions admit a single supergradient");
      }
      p[pair_index(e, fwd)] = pr;
    }

  IsotropyReport rep;
  rep.a.assign(g.fiber_count(), 0.0);
  for (int v = 0; v < g.fiber_count(); ++v) {
    double acc = 0.0;
    for (const auto& inc : g.out[v]) {
      double nj = dot(fg.normal[inc.edge], j);
      double w = p[pair_index(inc.edge, inc.fwd)].first + p[pair_index(inc.edge, !inc.fwd)].second;
      acc += w * fg.dist[inc.edge] * fg.area[inc.edge] * nj * nj;
    }
    rep.a[v] = acc / fg.volume[v];
  }
  double lo = rep.a[0], hi = rep.a[0];
  for (double x : rep.a) {
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  rep.spread = hi - lo;
  return rep;
}

SupergradientSelector triangle_balancing_selector(const FVGraph& fg, Mobility m) {
  const PeriodicGraph& g = *fg.g;
  if (!m.derivative) throw domain_error("selector needs the mobility derivative");
  // Classify fibers by the axis their facet toward the opposite kind runs
  // along: N and S span horizontal square edges, E and W vertical ones.
  std::vector<int> axis(g.fiber_count(), -1);
  for (int v = 0; v < g.fiber_count(); ++v) {
    const std::string& l = g.fiber[v];
    if (l == "N" || l == "S") axis[v] = 1;
    if (l == "E" || l == "W") axis[v] = 0;
  }
  for (int v = 0; v < g.fiber_count(); ++v)
    if (axis[v] < 0) throw domain_error("selector expects the four-triangle partition");
  auto deriv = m.derivative;
  auto graph = fg.g;
  std::vector<int> ax = axis;
  return [graph, ax, deriv](int e, bool fwd, double rho, const dvec& j) {
    const stencil_edge& se = graph->edges[e];
    int tail = fwd ? se.a : se.b;
    int head = fwd ? se.b : se.a;
    double mp = deriv(rho);
    double jj = j[0] * j[0] + j[1] * j[1];
    if (ax[tail] == ax[head] || jj == 0.0) return std::pair(0.5 * mp, 0.5 * mp);
    double own = j[ax[tail]] * j[ax[tail]] / jj;  // tail's axis component, normalized
    return std::pair((1.0 - own) * mp, own * mp);
  };
}

}  // namespace lot
