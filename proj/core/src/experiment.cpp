#include "lot/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "lot/cell.hpp"

namespace lot {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

std::string point_str(double rho, const dvec& j) {
  std::ostringstream os;
  os << "rho=" << format_number(rho) << " j=(";
  for (std::size_t i = 0; i < j.size(); ++i) os << (i ? "," : "") << format_number(j[i]);
  os << ")";
  return os.str();
}

}  // namespace

// ---------------------------------------------------------------------------
// Bump

double Bump::density(double x) const { return 1.0 + amplitude * std::cos(two_pi * (x - center)); }

double Bump::cdf(double x) const {
  const double k = std::floor(x);
  const double r = x - k;
  // antiderivative of the density on [0, r]
  const double m =
      r + amplitude / two_pi * (std::sin(two_pi * (r - center)) - std::sin(two_pi * (0.0 - center)));
  return k + m;
}

double Bump::quantile(double q) const {
  const double k = std::floor(q);
  const double r = q - k;
  double lo = 0.0, hi = 1.0;
  for (int i = 0; i < 64; ++i) {
    const double mid = 0.5 * (lo + hi);
    (cdf(mid) < r ? lo : hi) = mid;
  }
  return k + 0.5 * (lo + hi);
}

// ---------------------------------------------------------------------------
// QuantileGeodesic

QuantileGeodesic QuantileGeodesic::make(Bump b0, Bump b1) {
  if (std::abs(b0.amplitude) >= 1.0 || std::abs(b1.amplitude) >= 1.0)
    throw std::domain_error("QuantileGeodesic: bump amplitude must satisfy |a| < 1");
  QuantileGeodesic g;
  g.b0 = b0;
  g.b1 = b1;

  // Midpoint rule: the integrand is smooth and 1-periodic in q, so the error
  // decays faster than any power of the node count.
  auto cut_cost = [&](double alpha, int nq) {
    double s = 0.0;
    for (int i = 0; i < nq; ++i) {
      const double q = (i + 0.5) / nq;
      const double dlt = b1.quantile(q + alpha) - b0.quantile(q);
      s += dlt * dlt;
    }
    return s / nq;
  };

  // The cut cost is convex in alpha (each integrand is a convex composition
  // of the nondecreasing lifted quantile), so golden-section search finds
  // the optimal cut. Matchings beyond one winding are never optimal.
  double lo = -1.0, hi = 1.0;
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - ratio * (hi - lo);
  double x2 = lo + ratio * (hi - lo);
  double f1 = cut_cost(x1, 512);
  double f2 = cut_cost(x2, 512);
  while (hi - lo > 1e-11) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - ratio * (hi - lo);
      f1 = cut_cost(x1, 512);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + ratio * (hi - lo);
      f2 = cut_cost(x2, 512);
    }
  }
  g.cut = 0.5 * (lo + hi);
  g.value = cut_cost(g.cut, 4096);
  return g;
}

double QuantileGeodesic::position(double q, double t) const {
  return (1.0 - t) * b0.quantile(q) + t * b1.quantile(q + cut);
}

double QuantileGeodesic::density(double x, double t) const {
  // invert the lifted position map (increasing in q, position(q + 1) =
  // position(q) + 1, and |position(q) - q| < 2)
  double lo = x - 2.0, hi = x + 2.0;
  for (int i = 0; i < 64; ++i) {
    const double mid = 0.5 * (lo + hi);
    (position(mid, t) < x ? lo : hi) = mid;
  }
  const double q = 0.5 * (lo + hi);
  const double dpos = (1.0 - t) / b0.density(b0.quantile(q)) + t / b1.density(b1.quantile(q + cut));
  return 1.0 / dpos;
}

double QuantileGeodesic::flux(double x, double t) const {
  double lo = x - 2.0, hi = x + 2.0;
  for (int i = 0; i < 64; ++i) {
    const double mid = 0.5 * (lo + hi);
    (position(mid, t) < x ? lo : hi) = mid;
  }
  const double q = 0.5 * (lo + hi);
  const double velocity = b1.quantile(q + cut) - b0.quantile(q);
  const double dpos = (1.0 - t) / b0.density(b0.quantile(q)) + t / b1.density(b1.quantile(q + cut));
  return velocity / dpos;
}

// ---------------------------------------------------------------------------
// run_converge

namespace {

// f_hom for the nearest-neighbor stencil with unit weights: sum_i |j_i|^p /
// rho^(p-1), with the zero-density convention inherited from the edge costs.
std::function<double(double, const dvec&)> closed_form_fhom(const PeriodicGraph& g,
                                                            const CostFunction& F) {
  const auto* wp = dynamic_cast<const WpMeanCost*>(&F);
  if (!wp)
    throw usage_error(
        "converge: reference_fhom \"closed_form\" needs a wp_mean cost; use \"solve\" instead");
  if (g.fiber_count() != 1)
    throw usage_error("converge: the closed-form reference needs a single-fiber graph");
  std::vector<bool> axis_seen(static_cast<std::size_t>(g.d), false);
  for (int e = 0; e < g.edge_count(); ++e) {
    const stencil_edge& se = g.edges[static_cast<std::size_t>(e)];
    int axis = -1;
    for (int i = 0; i < g.d; ++i) {
      if (se.dz[static_cast<std::size_t>(i)] == 0) continue;
      if (axis >= 0 || std::abs(se.dz[static_cast<std::size_t>(i)]) != 1) axis = -2;
      if (axis == -1) axis = i;
    }
    if (axis < 0 || axis_seen[static_cast<std::size_t>(axis)])
      throw usage_error(
          "converge: the closed-form reference needs the nearest-neighbor stencil (one unit edge "
          "per axis)");
    axis_seen[static_cast<std::size_t>(axis)] = true;
  }
  if (std::find(axis_seen.begin(), axis_seen.end(), false) != axis_seen.end())
    throw usage_error(
        "converge: the closed-form reference needs the nearest-neighbor stencil (one unit edge "
        "per axis)");
  for (const dvec* q : {&wp->q_fwd, &wp->q_bwd})
    for (double v : *q)
      if (v != 1.0)
        throw usage_error(
            "converge: the closed-form reference needs unit edge weights; use \"solve\" instead");
  const double p = wp->p;
  return [p](double rho, const dvec& j) {
    double num = 0.0;
    for (double c : j) num += std::pow(std::abs(c), p);
    if (rho <= 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return num / std::pow(rho, p - 1.0);
  };
}

std::function<double(double, const dvec&)> solver_fhom(std::shared_ptr<const PeriodicGraph> g,
                                                       std::shared_ptr<const CostFunction> F,
                                                       double tol) {
  // The quadrature walks a fixed grid, so identical (rho, j) nodes recur;
  // cache by exact key. Calls are sequential, no locking needed.
  auto cache = std::make_shared<std::map<std::vector<double>, double>>();
  return [g, F, tol, cache](double rho, const dvec& j) {
    std::vector<double> key;
    key.reserve(j.size() + 1);
    key.push_back(rho);
    key.insert(key.end(), j.begin(), j.end());
    if (auto it = cache->find(key); it != cache->end()) return it->second;
    const CellSolution sol = solve_cell(g, *F, rho, j, tol);
    cache->emplace(std::move(key), sol.value);
    return sol.value;
  };
}

}  // namespace

ConvergeReport run_converge(std::shared_ptr<const PeriodicGraph> g,
                            std::shared_ptr<const CostFunction> F, const MeasureSpec& m0,
                            const MeasureSpec& m1, const ConvergeOptions& opt) {
  if (!g || !F) throw std::domain_error("run_converge: null graph or cost");
  if (g->d != 1) throw usage_error("converge: the continuum reference needs a d = 1 graph");
  if (m0.type != MeasureSpec::Type::bump || m1.type != MeasureSpec::Type::bump)
    throw usage_error("converge: boundary measures must be bumps");
  if (opt.eps_list.empty()) throw usage_error("converge: eps list is empty");
  for (std::size_t i = 1; i < opt.eps_list.size(); ++i)
    if (!(opt.eps_list[i] < opt.eps_list[i - 1]))
      throw usage_error("converge: eps list must be strictly decreasing");
  if (opt.K < 1) throw usage_error("converge: K must be at least 1");
  if (opt.reference_fhom != "closed_form" && opt.reference_fhom != "solve")
    throw usage_error("converge: reference_fhom must be \"closed_form\" or \"solve\"");

  std::function<double(double, const dvec&)> fhom =
      opt.reference_fhom == "closed_form" ? closed_form_fhom(*g, *F)
                                          : solver_fhom(g, F, opt.tol);

  const QuantileGeodesic geo =
      QuantileGeodesic::make({m0.center, m0.amplitude}, {m1.center, m1.amplitude});
  const auto rho = [&geo](const dvec& x, double t) { return geo.density(x[0], t); };
  const auto flux = [&geo](const dvec& x, double t) { return dvec{geo.flux(x[0], t)}; };
  const ContinuumActionReport ref =
      continuum_action_reference(1, opt.quad_nx, opt.quad_nt, 0.0, 1.0, rho, flux, fhom);
  if (ref.infinite)
    throw data_error("converge: continuum reference is infinite at " + ref.location);

  ConvergeReport report;
  report.reference = ref.value;
  report.w2sq = geo.value;
  report.rows.resize(opt.eps_list.size());

  std::atomic<std::size_t> next{0};
  std::mutex err_mu;
  std::exception_ptr err;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < opt.eps_list.size();) {
      try {
        const double eps = opt.eps_list[i];
        const int n = static_cast<int>(std::llround(1.0 / eps));
        auto rg = std::make_shared<const RescaledGraph>(RescaledGraph::make(g, n));
        const TorusField a = realize_measure(m0, rg);
        const TorusField b = realize_measure(m1, rg);
        const auto t0 = std::chrono::steady_clock::now();
        const ActionSolution sol = minimal_action(rg, *F, a, b, opt.K, opt.tol);
        const auto t1 = std::chrono::steady_clock::now();
        ConvergeRow& row = report.rows[i];
        row.eps = eps;
        row.n = n;
        row.value = sol.value;
        row.reference = ref.value;
        row.gap = std::abs(sol.value - ref.value) / std::max(std::abs(ref.value), 1e-300);
        row.converged = sol.converged;
        row.iterations = sol.iterations;
        row.runtime_s = opt.timing ? std::chrono::duration<double>(t1 - t0).count() : 0.0;
      } catch (...) {
        const std::scoped_lock lock(err_mu);
        if (!err) err = std::current_exception();
      }
    }
  };
  const int workers =
      std::max(1, std::min<int>(opt.threads, static_cast<int>(opt.eps_list.size())));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (std::thread& th : pool) th.join();
  }
  if (err) std::rethrow_exception(err);

  report.all_converged = true;
  for (const ConvergeRow& row : report.rows) report.all_converged &= row.converged;
  if (report.rows.size() >= 2) {
    report.trend_known = true;
    report.nonincreasing = report.strictly_decreasing = true;
    for (std::size_t i = 1; i < report.rows.size(); ++i) {
      report.nonincreasing &= report.rows[i].gap <= report.rows[i - 1].gap;
      report.strictly_decreasing &= report.rows[i].gap < report.rows[i - 1].gap;
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// run_mesh_checks

std::vector<MeshCheckRow> run_mesh_checks(FVPartition part, const MeshOptions& opt) {
  if (opt.version != "weighted_linear" && opt.version != "minimum")
    throw usage_error("mesh: mobility version must be \"weighted_linear\" or \"minimum\"");
  if (!(opt.lambda >= 0.0 && opt.lambda <= 1.0))
    throw usage_error("mesh: lambda must lie in [0, 1]");
  if (!opt.selector.empty() && opt.selector != "tie" && opt.selector != "balancing")
    throw usage_error("mesh: selector must be \"\", \"tie\", or \"balancing\"");

  const FVGraph fg = build_graph(std::move(part));
  const int d = fg.part.d;

  std::vector<RhoJPoint> points = opt.points;
  if (points.empty()) {
    rng r(opt.seed);
    for (int k = 0; k < 5; ++k) {
      RhoJPoint pt;
      pt.rho = r.uniform(0.5, 2.0);
      pt.j.resize(static_cast<std::size_t>(d));
      for (double& c : pt.j) c = r.uniform(-1.0, 1.0);
      points.push_back(std::move(pt));
    }
  }
  for (const RhoJPoint& pt : points)
    if (pt.j.size() != static_cast<std::size_t>(d))
      throw usage_error("mesh: sample flux dimension does not match the partition");

  std::vector<MeshCheckRow> rows;

  {
    MeshCheckRow row;
    row.check = "fv_identity";
    row.detail = "max-abs entry of the weighted normal sum minus the identity";
    row.value = fv_identity(fg.part).deviation;
    row.reference = 0.0;
    row.status = *row.value <= 1e-12 ? "PASS" : "FAIL";
    rows.push_back(std::move(row));
  }

  if (opt.version == "weighted_linear") {
    dvec p1(static_cast<std::size_t>(2 * fg.g->edge_count()));
    for (int e = 0; e < fg.g->edge_count(); ++e) {
      p1[static_cast<std::size_t>(2 * e)] = opt.lambda;
      p1[static_cast<std::size_t>(2 * e + 1)] = 1.0 - opt.lambda;
    }
    const IsometryReport iso = isometry_check(fg, p1);
    for (int v = 0; v < fg.g->fiber_count(); ++v) {
      MeshCheckRow row;
      row.check = "isometry_deviation";
      row.detail = fg.part.cells[static_cast<std::size_t>(v)].label + " lambda=" +
                   format_number(opt.lambda);
      row.value = iso.deviation[static_cast<std::size_t>(v)];
      row.reference = 0.0;
      row.status = *row.value <= 1e-9 ? "PASS" : "FAIL";
      rows.push_back(std::move(row));
    }
  }

  {
    MeshCheckRow row;
    row.check = "isometry_feasibility";
    try {
      const LambdaFeasibility feas = isometry_feasibility(fg);
      if (feas.feasible) {
        const bool uniform = std::all_of(feas.lambda.begin(), feas.lambda.end(), [&](double v) {
          return v == feas.lambda.front();
        });
        std::string where = uniform ? "lambda=" + format_number(feas.lambda.front())
                                    : "per-pair lambda solve";
        if (!feas.in_unit_interval) where += " outside [0,1]";
        row.detail = where;
        row.status = "FEASIBLE";
      } else {
        row.detail = feas.certificate;
        row.status = "INFEASIBLE";
      }
    } catch (const std::domain_error& e) {
      row.detail = e.what();
      row.status = "SKIPPED";
    }
    rows.push_back(std::move(row));
  }

  MobilitySpec spec = opt.version == "weighted_linear"
                          ? weighted_linear_mobility(fg, Mobility::linear(), opt.lambda)
                          : minimum_mobility(Mobility::linear());

  SupergradientSelector sel;
  if (opt.selector == "balancing") {
    try {
      sel = triangle_balancing_selector(fg, Mobility::linear());
    } catch (const std::domain_error& e) {
      throw usage_error(std::string("mesh: balancing selector unavailable: ") + e.what());
    }
  }
  for (const RhoJPoint& pt : points) {
    MeshCheckRow row;
    row.check = "isotropy_spread";
    row.detail = point_str(pt.rho, pt.j);
    try {
      const IsotropyReport iso = isotropy_check(fg, spec, pt.rho, pt.j, sel);
      double scale = 0.0;
      for (double a : iso.a) scale = std::max(scale, std::abs(a));
      row.value = iso.spread;
      row.reference = 0.0;
      row.status = iso.spread <= 1e-9 * std::max(1.0, scale) ? "PASS" : "FAIL";
    } catch (const std::domain_error& e) {
      throw usage_error(std::string("mesh: isotropy check: ") + e.what());
    }
    rows.push_back(std::move(row));
  }

  const MobilityCost cost(fg, spec);
  for (const RhoJPoint& pt : points) {
    MeshCheckRow row;
    row.check = "cell_compare";
    row.detail = point_str(pt.rho, pt.j);
    const CellSolution sol = solve_cell(fg.g, cost, pt.rho, pt.j, opt.tol);
    double jsq = 0.0;
    for (double c : pt.j) jsq += c * c;
    row.value = sol.value;
    row.reference = pt.rho > 0.0 ? jsq / pt.rho
                                 : (jsq == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
    row.status = sol.converged ? "PASS" : "FLAGGED";
    rows.push_back(std::move(row));
  }

  return rows;
}

// ---------------------------------------------------------------------------
// run_validate

namespace {

void graph_rows(const std::string& file, std::vector<ValidateRow>& rows,
                std::shared_ptr<const PeriodicGraph>& last_graph) {
  std::shared_ptr<const PeriodicGraph> g;
  try {
    g = load_graph(file);
  } catch (const std::exception& e) {
    rows.push_back({file, "graph", "load", e.what(), "FAIL"});
    return;
  }
  last_graph = g;
  {
    std::ostringstream os;
    os << "d=" << g->d << " fibers=" << g->fiber_count() << " edges=" << g->edge_count();
    rows.push_back({file, "graph", "load", os.str(), "PASS"});
  }
  rows.push_back({file, "graph", "stencil_radius", format_number(double(g->r0)), "PASS"});
  rows.push_back({file, "graph", "max_degree", format_number(double(g->max_degree)), "PASS"});
  // load_graph already rejected disconnected stencils
  rows.push_back({file, "graph", "connectivity", "connected on the radius-3*R0 window", "PASS"});
  rows.push_back({file, "graph", "parallel_edges",
                  g->has_parallel_edges ? "parallel edges present" : "none",
                  g->has_parallel_edges ? "WARN" : "PASS"});
}

void mesh_rows(const std::string& file, std::vector<ValidateRow>& rows) {
  FVPartition part;
  try {
    part = load_mesh(file);
  } catch (const std::exception& e) {
    rows.push_back({file, "mesh", "load", e.what(), "FAIL"});
    return;
  }
  double volume = 0.0;
  for (double v : part.volume) volume += v;
  {
    std::ostringstream os;
    os << "d=" << part.d << " cells=" << part.cells.size() << " facets=" << part.facets.size()
       << " volume=" << format_number(volume);
    rows.push_back({file, "mesh", "load", os.str(), "PASS"});
  }
  for (const std::string& w : part.warnings) rows.push_back({file, "mesh", "warning", w, "WARN"});
  const double dev = fv_identity(part).deviation;
  rows.push_back({file, "mesh", "fv_identity", format_number(dev), dev <= 1e-12 ? "PASS" : "FAIL"});
}

void cost_rows(const std::string& file, std::vector<ValidateRow>& rows,
               const std::shared_ptr<const PeriodicGraph>& g, std::uint64_t seed) {
  if (!g) {
    rows.push_back({file, "cost", "load",
                    "no graph to validate against; list a graph file before this one", "FAIL"});
    return;
  }
  std::shared_ptr<const CostFunction> F;
  try {
    F = load_cost(file, g);
  } catch (const std::exception& e) {
    rows.push_back({file, "cost", "load", e.what(), "FAIL"});
    return;
  }
  {
    std::ostringstream os;
    os << "name=" << F->name() << (F->smooth() ? " smooth" : " nonsmooth");
    rows.push_back({file, "cost", "load", os.str(), "PASS"});
  }
  {
    // benign interior point: unit mass everywhere, no flux
    const PeriodicField m{g, dvec(static_cast<std::size_t>(g->fiber_count()), 1.0)};
    const PeriodicFlux J{g, dvec(static_cast<std::size_t>(g->edge_count()), 0.0)};
    const double at_unit = F->evaluate_periodic(m, J);
    rows.push_back({file, "cost", "interior_point", "F(1,0)=" + format_number(at_unit),
                    std::isfinite(at_unit) ? "PASS" : "FAIL"});
  }
  {
    CostSampler sampler = [g](rng& r) {
      PeriodicField m{g, dvec(static_cast<std::size_t>(g->fiber_count()))};
      PeriodicFlux J{g, dvec(static_cast<std::size_t>(g->edge_count()))};
      for (double& v : m.v) v = r.uniform(0.0, 3.0);
      for (double& v : J.v) v = r.uniform(-3.0, 3.0);
      return std::make_pair(m, J);
    };
    rng r(seed);
    const GrowthCertificate cert = check_growth(*F, sampler, 200, r);
    std::ostringstream os;
    os << "c=" << format_number(cert.c) << " C=" << format_number(cert.C)
       << " max_violation=" << format_number(cert.max_violation) << " n=" << cert.n_samples;
    const bool ok = cert.c > 0.0 && cert.max_violation <= 1e-9;
    rows.push_back({file, "cost", "growth", os.str(), ok ? "PASS" : "FAIL"});
  }
}

}  // namespace

std::vector<ValidateRow> run_validate(const std::vector<std::string>& files,
                                      const std::string& graph_hint, std::uint64_t seed) {
  std::vector<ValidateRow> rows;
  std::shared_ptr<const PeriodicGraph> last_graph;
  if (!graph_hint.empty()) {
    try {
      last_graph = load_graph(graph_hint);
    } catch (const std::exception& e) {
      rows.push_back({graph_hint, "graph", "load", e.what(), "FAIL"});
    }
  }
  for (const std::string& file : files) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_text_file(file));
    } catch (const std::exception& e) {
      rows.push_back({file, "?", "load", e.what(), "FAIL"});
      continue;
    }
    if (!j.is_object()) {
      rows.push_back({file, "?", "load", "top level is not a JSON object", "FAIL"});
    } else if (j.contains("edges")) {
      graph_rows(file, rows, last_graph);
    } else if (j.contains("cells") || j.contains("builtin")) {
      mesh_rows(file, rows);
    } else if (j.contains("kind")) {
      cost_rows(file, rows, last_graph, seed);
    } else {
      rows.push_back({file, "?", "load",
                      "unrecognized file: expected a graph (edges), mesh (cells or builtin), or "
                      "cost (kind)",
                      "FAIL"});
    }
  }
  return rows;
}

}  // namespace lot
