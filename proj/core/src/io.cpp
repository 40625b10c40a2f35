#include "lot/io.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "json.hpp"

namespace lot {

using nlohmann::json;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error(path + ": cannot open file");
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw data_error(path + ": read failed");
  return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  out << content;
  out.flush();
  if (!out.good()) throw std::runtime_error(path + ": write failed");
}

namespace {

json parse_json(const std::string& path, bool config) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const data_error& e) {
    if (config) throw usage_error(e.what());
    throw;
  }
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    const std::string msg = path + ": " + e.what();
    if (config) throw usage_error(msg);
    throw data_error(msg);
  }
}

[[noreturn]] void fail(const std::string& path, const std::string& msg, bool config) {
  const std::string full = path + ": " + msg;
  if (config) throw usage_error(full);
  throw data_error(full);
}

// Typed field access with file-and-field error messages.
struct Reader {
  const json& j;
  std::string path;
  bool config = false;

  [[noreturn]] void die(const std::string& msg) const { fail(path, msg, config); }

  bool has(const char* key) const { return j.contains(key); }

  const json& at(const char* key) const {
    if (!j.contains(key)) die(std::string("missing field \"") + key + "\"");
    return j[key];
  }

  Reader sub(const char* key) const { return Reader{at(key), path, config}; }

  int geti(const char* key) const {
    const json& v = at(key);
    if (!v.is_number_integer()) die(std::string("field \"") + key + "\" must be an integer");
    return v.get<int>();
  }
  int geti(const char* key, int dflt) const { return has(key) ? geti(key) : dflt; }

  double getd(const char* key) const {
    const json& v = at(key);
    if (!v.is_number()) die(std::string("field \"") + key + "\" must be a number");
    return v.get<double>();
  }
  double getd(const char* key, double dflt) const { return has(key) ? getd(key) : dflt; }

  bool getb(const char* key, bool dflt) const {
    if (!has(key)) return dflt;
    const json& v = at(key);
    if (!v.is_boolean()) die(std::string("field \"") + key + "\" must be a boolean");
    return v.get<bool>();
  }

  std::string gets(const char* key) const {
    const json& v = at(key);
    if (!v.is_string()) die(std::string("field \"") + key + "\" must be a string");
    return v.get<std::string>();
  }
  std::string gets(const char* key, const std::string& dflt) const {
    return has(key) ? gets(key) : dflt;
  }

  dvec getdv(const char* key) const { return to_dvec(at(key), key); }

  dvec to_dvec(const json& v, const std::string& what) const {
    if (!v.is_array()) die("field \"" + what + "\" must be an array of numbers");
    dvec out;
    out.reserve(v.size());
    for (const auto& e : v) {
      if (!e.is_number()) die("field \"" + what + "\" must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  ivec to_ivec(const json& v, const std::string& what) const {
    if (!v.is_array()) die("field \"" + what + "\" must be an array of integers");
    ivec out;
    out.reserve(v.size());
    for (const auto& e : v) {
      if (!e.is_number_integer()) die("field \"" + what + "\" must be an array of integers");
      out.push_back(e.get<int>());
    }
    return out;
  }
};

std::string edge_str(const std::string& a, const ivec& dz, const std::string& b) {
  std::string s = a + " --(";
  for (size_t i = 0; i < dz.size(); ++i) s += (i ? "," : "") + std::to_string(dz[i]);
  return s + ")--> " + b;
}

}  // namespace

// ---------------------------------------------------------------------------
// Graphs

std::shared_ptr<const PeriodicGraph> load_graph(const std::string& path) {
  const json j = parse_json(path, false);
  Reader r{j, path, false};

  const int d = r.geti("d");
  if (d < 1) r.die("d must be >= 1");

  const json& vj = r.at("V");
  if (!vj.is_array() || vj.empty()) r.die("V must be a nonempty array of labels");
  std::vector<std::string> fiber;
  std::map<std::string, int> index;
  for (const auto& e : vj) {
    if (!e.is_string()) r.die("V must be a nonempty array of labels");
    const std::string label = e.get<std::string>();
    if (label.empty()) r.die("empty fiber label");
    if (!index.emplace(label, static_cast<int>(fiber.size())).second)
      r.die("duplicate fiber label \"" + label + "\"");
    fiber.push_back(label);
  }

  const json& ej = r.at("edges");
  if (!ej.is_array() || ej.empty()) r.die("edges must be a nonempty array");
  struct Entry {
    int a;
    ivec dz;
    int b;
    std::string sa, sb;
  };
  std::vector<Entry> entries;
  for (const auto& e : ej) {
    Reader er{e, path, false};
    const std::string sa = er.gets("v"), sb = er.gets("v2");
    auto ia = index.find(sa), ib = index.find(sb);
    if (ia == index.end()) r.die("edge references unknown fiber \"" + sa + "\"");
    if (ib == index.end()) r.die("edge references unknown fiber \"" + sb + "\"");
    ivec dz = er.to_ivec(er.at("dz"), "dz");
    if (static_cast<int>(dz.size()) != d) r.die("edge dz must have length d");
    entries.push_back({ia->second, std::move(dz), ib->second, sa, sb});
  }

  std::vector<stencil_edge> raw;
  if (r.getb("symmetric", false)) {
    // The file lists oriented pairs; every entry needs its exact reverse.
    std::map<std::string, int> open;  // unmatched entries by key
    auto key = [d](int a, const ivec& dz, int b) {
      std::string k = std::to_string(a) + "|" + std::to_string(b);
      for (int i = 0; i < d; ++i) k += "|" + std::to_string(dz[i]);
      return k;
    };
    for (const auto& e : entries) {
      const std::string rev = key(e.b, ineg(e.dz), e.a);
      auto it = open.find(rev);
      if (it != open.end() && it->second > 0) {
        --it->second;  // closes a previously seen reverse
      } else {
        ++open[key(e.a, e.dz, e.b)];
        raw.push_back({e.a, e.dz, e.b});
      }
    }
    for (const auto& e : entries) {
      auto it = open.find(key(e.a, e.dz, e.b));
      if (it != open.end() && it->second > 0)
        r.die("asymmetric stencil: " + edge_str(e.sa, e.dz, e.sb) + " has no reverse entry");
    }
  } else {
    for (const auto& e : entries) raw.push_back({e.a, e.dz, e.b});
  }

  PeriodicGraph g;
  try {
    g = PeriodicGraph::make(d, std::move(fiber), std::move(raw));
  } catch (const domain_error& e) {
    r.die(e.what());
  }
  if (!g.connected_on_window(3 * std::max(g.r0, 1)))
    r.die("graph is disconnected (BFS on the radius-" + std::to_string(3 * std::max(g.r0, 1)) +
          " window)");
  return std::make_shared<const PeriodicGraph>(std::move(g));
}

// ---------------------------------------------------------------------------
// Costs

std::shared_ptr<const CostFunction> load_cost(const std::string& path,
                                              std::shared_ptr<const PeriodicGraph> g) {
  if (!g) throw domain_error("load_cost: null graph");
  const json j = parse_json(path, false);
  Reader r{j, path, false};
  const std::string kind = r.gets("kind");

  std::shared_ptr<CostFunction> cost;
  if (kind == "wp_mean") {
    const double p = r.getd("p", 2.0);
    Mean mean;
    try {
      mean = Mean::parse(r.gets("mean", "arithmetic"));
    } catch (const domain_error& e) {
      r.die(e.what());
    }
    auto weights = [&](const char* key) -> dvec {
      if (!r.has(key)) return {};
      const json& v = r.at(key);
      if (v.is_number())  // scalar broadcast
        return dvec(g->edge_count(), v.get<double>());
      return r.to_dvec(v, key);
    };
    try {
      cost = std::make_shared<WpMeanCost>(g, p, mean, weights("q_fwd"), weights("q_bwd"));
    } catch (const domain_error& e) {
      r.die(e.what());
    }
  } else if (kind == "quadratic") {
    const int R1 = r.geti("R1", 0);
    const json& Lj = r.at("L");
    if (!Lj.is_array()) r.die("L must be an array of rows");
    std::vector<dvec> L;
    for (const auto& row : Lj) L.push_back(r.to_dvec(row, "L"));
    dvec b = r.getdv("b");
    const double c = r.getd("c", 0.0);
    try {
      cost = std::make_shared<QuadraticWindowCost>(g, R1, std::move(L), std::move(b), c);
    } catch (const domain_error& e) {
      r.die(e.what());
    }
  } else {
    r.die("unknown cost kind \"" + kind + "\" (expected wp_mean or quadratic)");
  }

  if (r.has("reference")) {
    Reader ref = r.sub("reference");
    dvec m = ref.getdv("m"), J = ref.getdv("J");
    if (static_cast<int>(m.size()) != g->fiber_count())
      r.die("reference m must have one entry per fiber");
    if (static_cast<int>(J.size()) != g->edge_count())
      r.die("reference J must have one entry per stencil edge");
    for (double v : m)
      if (v < 0) r.die("reference m must be nonnegative");
    cost->m_ref.v = std::move(m);
    cost->J_ref.v = std::move(J);
    if (linf_norm(divergence(cost->J_ref)) > 1e-12)
      r.die("reference J is not divergence-free");
    double val;
    try {
      val = cost->evaluate_periodic(cost->m_ref, cost->J_ref);
    } catch (const domain_error& e) {
      r.die(std::string("reference point rejected: ") + e.what());
    }
    if (!std::isfinite(val)) r.die("cost is not finite at the declared reference point");
  }
  return cost;
}

// ---------------------------------------------------------------------------
// Meshes

FVPartition load_mesh(const std::string& path) {
  const json j = parse_json(path, false);
  Reader r{j, path, false};

  try {
    if (r.has("builtin")) {
      const std::string name = r.gets("builtin");
      if (name == "square") return square_mesh(r.geti("d", 2));
      if (name == "triangle") return triangle_mesh();
      r.die("unknown builtin mesh \"" + name + "\" (expected square or triangle)");
    }

    const int d = r.geti("d");
    if (d < 1) r.die("d must be >= 1");
    const json& cj = r.at("cells");
    if (!cj.is_array() || cj.empty()) r.die("cells must be a nonempty array");
    std::vector<FVCell> cells;
    std::map<std::string, int> index;
    for (const auto& e : cj) {
      Reader cr{e, path, false};
      FVCell cell;
      cell.label = cr.gets("label", "c" + std::to_string(cells.size()));
      cell.site = cr.getdv("site");
      if (static_cast<int>(cell.site.size()) != d) r.die("cell site must have length d");
      const json& vj = cr.at("vertices");
      if (!vj.is_array()) r.die("cell vertices must be an array of points");
      for (const auto& p : vj) {
        dvec pt = cr.to_dvec(p, "vertices");
        if (static_cast<int>(pt.size()) != d) r.die("cell vertex must have length d");
        cell.vertices.push_back(std::move(pt));
      }
      if (!index.emplace(cell.label, static_cast<int>(cells.size())).second)
        r.die("duplicate cell label \"" + cell.label + "\"");
      cells.push_back(std::move(cell));
    }

    if (!r.has("adjacency")) return make_partition(d, std::move(cells));

    if (!r.has("volumes")) r.die("precomputed adjacency also needs \"volumes\"");
    dvec volumes = r.getdv("volumes");
    if (volumes.size() != cells.size()) r.die("volumes must have one entry per cell");
    const json& aj = r.at("adjacency");
    if (!aj.is_array() || aj.empty()) r.die("adjacency must be a nonempty array");
    std::vector<FVFacet> facets;
    for (const auto& e : aj) {
      Reader fr{e, path, false};
      FVFacet f;
      const std::string sa = fr.gets("a"), sb = fr.gets("b");
      auto ia = index.find(sa), ib = index.find(sb);
      if (ia == index.end()) r.die("adjacency references unknown cell \"" + sa + "\"");
      if (ib == index.end()) r.die("adjacency references unknown cell \"" + sb + "\"");
      f.a = ia->second;
      f.b = ib->second;
      f.dz = fr.to_ivec(fr.at("dz"), "dz");
      if (static_cast<int>(f.dz.size()) != d) r.die("adjacency dz must have length d");
      f.dist = fr.getd("dist");
      f.area = fr.getd("area");
      f.normal = fr.getdv("normal");
      if (static_cast<int>(f.normal.size()) != d) r.die("adjacency normal must have length d");
      facets.push_back(std::move(f));
    }
    return make_partition(d, std::move(cells), std::move(volumes), std::move(facets));
  } catch (const domain_error& e) {
    throw data_error(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Paths

void save_path(const DiscretePath& p, const std::string& path) {
  check_path(p);
  json j;
  j["format"] = "lot-path";
  j["d"] = p.rg->base->d;
  j["fibers"] = p.rg->base->fiber_count();
  j["n"] = p.rg->n;
  j["eps"] = p.rg->eps();
  j["K"] = p.steps();
  j["t0"] = p.t0;
  j["t1"] = p.t1;
  json m = json::array(), J = json::array();
  for (const auto& mk : p.m) m.push_back(mk.v);
  for (const auto& Jk : p.J) J.push_back(Jk.v);
  j["m"] = std::move(m);
  j["J"] = std::move(J);
  write_text_file(path, j.dump(1) + "\n");
}

DiscretePath load_path(const std::string& path, std::shared_ptr<const PeriodicGraph> base) {
  if (!base) throw domain_error("load_path: null graph");
  const json j = parse_json(path, false);
  Reader r{j, path, false};
  if (r.gets("format", "lot-path") != "lot-path") r.die("not a lot-path file");
  if (r.geti("d") != base->d) r.die("path dimension does not match the graph");
  if (r.geti("fibers") != base->fiber_count()) r.die("path fiber count does not match the graph");
  const int n = r.geti("n");
  const int K = r.geti("K");
  if (n < 1 || K < 1) r.die("n and K must be >= 1");

  std::shared_ptr<const RescaledGraph> rg;
  try {
    rg = std::make_shared<const RescaledGraph>(RescaledGraph::make(base, n));
  } catch (const domain_error& e) {
    r.die(e.what());
  }

  DiscretePath p;
  p.rg = rg;
  p.t0 = r.getd("t0", 0.0);
  p.t1 = r.getd("t1", 1.0);
  const json& mj = r.at("m");
  const json& Jj = r.at("J");
  if (!mj.is_array() || static_cast<int>(mj.size()) != K + 1) r.die("m must hold K+1 arrays");
  if (!Jj.is_array() || static_cast<int>(Jj.size()) != K) r.die("J must hold K arrays");
  for (const auto& e : mj) {
    dvec v = r.to_dvec(e, "m");
    if (static_cast<long long>(v.size()) != rg->vertex_count())
      r.die("each m array must have one entry per torus vertex");
    p.m.push_back(TorusField{rg, std::move(v)});
  }
  for (const auto& e : Jj) {
    dvec v = r.to_dvec(e, "J");
    if (static_cast<long long>(v.size()) != rg->edge_count())
      r.die("each J array must have one entry per torus edge");
    p.J.push_back(TorusFlux{rg, std::move(v)});
  }
  try {
    check_path(p);
  } catch (const domain_error& e) {
    r.die(e.what());
  }
  return p;
}

// ---------------------------------------------------------------------------
// Measures

namespace {

// Mass of [x0, x1] under rho(x) = 1 + a cos(2 pi (x - c)).
double bump_mass(double c, double a, double x0, double x1) {
  const double twopi = 2.0 * std::numbers::pi;
  return (x1 - x0) + a / twopi * (std::sin(twopi * (x1 - c)) - std::sin(twopi * (x0 - c)));
}

}  // namespace

TorusField realize_measure(const MeasureSpec& spec, std::shared_ptr<const RescaledGraph> rg) {
  if (!rg) throw domain_error("realize_measure: null graph");
  TorusField m = make_torus_field(rg);
  if (spec.type == MeasureSpec::Type::array) {
    if (static_cast<long long>(spec.values.size()) != rg->vertex_count())
      throw data_error("measure array must have one entry per torus vertex (" +
                       std::to_string(rg->vertex_count()) + ")");
    for (double v : spec.values)
      if (v < 0) throw data_error("measure entries must be nonnegative");
    m.v = spec.values;
    return m;
  }
  if (rg->base->d != 1) throw data_error("bump measures are defined for d = 1 only");
  if (!(std::abs(spec.amplitude) < 1.0))
    throw data_error("bump amplitude must satisfy |amplitude| < 1");
  const int n = rg->n;
  const int fibers = rg->base->fiber_count();
  for (int z = 0; z < n; ++z) {
    const double cube =
        bump_mass(spec.center, spec.amplitude, static_cast<double>(z) / n,
                  static_cast<double>(z + 1) / n);
    for (int f = 0; f < fibers; ++f) m.v[rg->vidx(z, f)] = cube / fibers;
  }
  return m;
}

// ---------------------------------------------------------------------------
// Experiment config

namespace {

MeasureSpec parse_measure(const Reader& r) {
  MeasureSpec spec;
  const std::string type = r.gets("type");
  if (type == "array") {
    spec.type = MeasureSpec::Type::array;
    spec.values = r.getdv("values");
  } else if (type == "bump") {
    spec.type = MeasureSpec::Type::bump;
    spec.center = r.getd("center", 0.0);
    spec.amplitude = r.getd("amplitude", 0.8);
    if (!(std::abs(spec.amplitude) < 1.0)) r.die("bump amplitude must satisfy |amplitude| < 1");
  } else {
    r.die("measure type must be \"array\" or \"bump\"");
  }
  return spec;
}

}  // namespace

ExperimentConfig load_config(const std::string& path) {
  const json j = parse_json(path, true);
  Reader r{j, path, true};
  if (!j.is_object()) r.die("config must be a JSON object");

  static const std::vector<std::string> known = {
      "command", "graph",     "cost",           "mesh",    "rho",     "j",        "eps",
      "n",       "K",         "tol",            "seed",    "threads", "out",      "format",
      "timing",  "boundary",  "reference_fhom", "quad_nx", "quad_nt", "save_path", "mobility",
      "points",  "files"};
  for (const auto& [key, value] : j.items()) {
    (void)value;
    bool ok = false;
    for (const auto& k : known) ok = ok || k == key;
    if (!ok) r.die("unknown config field \"" + key + "\"");
  }

  ExperimentConfig cfg;
  const std::filesystem::path dir = std::filesystem::path(path).parent_path();
  auto resolve = [&dir](const std::string& p) {
    if (p.empty()) return p;
    std::filesystem::path fp(p);
    if (fp.is_absolute()) return p;
    return (dir / fp).string();
  };

  if (r.has("command")) {
    cfg.command = r.gets("command");
    static const std::vector<std::string> cmds = {"cell", "minimal_action", "converge", "mesh",
                                                  "validate"};
    bool ok = false;
    for (const auto& c : cmds) ok = ok || c == cfg.command;
    if (!ok) r.die("unknown command \"" + cfg.command + "\"");
  }
  cfg.graph_file = resolve(r.gets("graph", ""));
  cfg.cost_file = resolve(r.gets("cost", ""));
  cfg.mesh_file = resolve(r.gets("mesh", ""));

  if (r.has("rho")) {
    cfg.rho_list = r.getdv("rho");
    for (double v : cfg.rho_list)
      if (v < 0) r.die("rho entries must be nonnegative");
  }
  if (r.has("j")) {
    const json& jj = r.at("j");
    if (!jj.is_array()) r.die("j must be an array of flux vectors");
    for (const auto& e : jj) cfg.j_grid.push_back(r.to_dvec(e, "j"));
    for (const auto& v : cfg.j_grid)
      if (v.size() != cfg.j_grid.front().size()) r.die("all j entries must have equal length");
  }
  if (r.has("eps")) {
    cfg.eps_list = r.getdv("eps");
    for (double e : cfg.eps_list) {
      if (!(e > 0.0 && e <= 1.0)) r.die("eps entries must lie in (0, 1]");
      const double inv = 1.0 / e;
      if (std::abs(inv - std::round(inv)) > 1e-9 * inv)
        r.die("eps entries must be reciprocals of integers, got " + format_number(e));
    }
  }
  cfg.n = r.geti("n", 0);
  if (r.has("n") && cfg.n < 1) r.die("n must be >= 1");
  cfg.K = r.geti("K", 8);
  if (cfg.K < 1) r.die("K must be >= 1");
  if (r.has("tol")) {
    cfg.tol = r.getd("tol");
    cfg.tol_set = true;
    if (!(cfg.tol > 0)) r.die("tol must be positive");
  }
  if (r.has("seed")) {
    const json& s = r.at("seed");
    if (!s.is_number_integer() || s.get<long long>() < 0)
      r.die("seed must be a nonnegative integer");
    cfg.seed = s.get<std::uint64_t>();
    cfg.seed_set = true;
  }
  cfg.threads = r.geti("threads", 1);
  if (cfg.threads < 1) r.die("threads must be >= 1");
  cfg.out = r.gets("out", "");
  cfg.format = r.gets("format", "csv");
  if (cfg.format != "csv" && cfg.format != "json") r.die("format must be csv or json");
  cfg.timing = r.getb("timing", false);

  if (r.has("boundary")) {
    Reader b = r.sub("boundary");
    if (b.has("m0")) cfg.m0 = parse_measure(b.sub("m0"));
    if (b.has("m1")) cfg.m1 = parse_measure(b.sub("m1"));
  }
  cfg.reference_fhom = r.gets("reference_fhom", "closed_form");
  if (cfg.reference_fhom != "closed_form" && cfg.reference_fhom != "solve")
    r.die("reference_fhom must be closed_form or solve");
  cfg.quad_nx = r.geti("quad_nx", 48);
  cfg.quad_nt = r.geti("quad_nt", 24);
  if (cfg.quad_nx < 2 || cfg.quad_nt < 2) r.die("quad_nx and quad_nt must be >= 2");
  cfg.save_path_file = resolve(r.gets("save_path", ""));

  if (r.has("mobility")) {
    Reader m = r.sub("mobility");
    cfg.mobility_version = m.gets("version", "weighted_linear");
    if (cfg.mobility_version != "weighted_linear" && cfg.mobility_version != "minimum")
      r.die("mobility version must be weighted_linear or minimum");
    cfg.lambda = m.getd("lambda", 0.5);
    if (!(cfg.lambda >= 0.0 && cfg.lambda <= 1.0)) r.die("mobility lambda must lie in [0, 1]");
    cfg.selector = m.gets("selector", "");
    if (!cfg.selector.empty() && cfg.selector != "tie" && cfg.selector != "balancing")
      r.die("mobility selector must be tie or balancing");
  }

  if (r.has("points")) {
    const json& pj = r.at("points");
    if (!pj.is_array()) r.die("points must be an array of {rho, j} objects");
    for (const auto& e : pj) {
      Reader pr{e, path, true};
      RhoJPoint pt;
      pt.rho = pr.getd("rho");
      if (pt.rho < 0) r.die("point rho must be nonnegative");
      pt.j = pr.getdv("j");
      cfg.points.push_back(std::move(pt));
    }
  }
  if (r.has("files")) {
    const json& fj = r.at("files");
    if (!fj.is_array()) r.die("files must be an array of paths");
    for (const auto& e : fj) {
      if (!e.is_string()) r.die("files must be an array of paths");
      cfg.validate_files.push_back(resolve(e.get<std::string>()));
    }
  }
  return cfg;
}

// ---------------------------------------------------------------------------
// CSV

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0";  // merges -0
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void CsvBuilder::comment(const std::string& line) {
  std::string clean = line;
  for (char& c : clean)
    if (c == '\n' || c == '\r') c = ' ';
  out_ += "# " + clean + "\n";
}

void CsvBuilder::columns(const std::vector<std::string>& cols) {
  for (const auto& c : cols) cell(c);
  endrow();
}

void CsvBuilder::sep() {
  if (row_open_) out_ += ',';
  row_open_ = true;
}

void CsvBuilder::cell(double v) {
  sep();
  out_ += format_number(v);
}

void CsvBuilder::cell(long long v) {
  sep();
  out_ += std::to_string(v);
}

void CsvBuilder::cell(const std::string& s) {
  sep();
  if (s.find_first_of(",\"\n\r") == std::string::npos) {
    out_ += s;
    return;
  }
  out_ += '"';
  for (char c : s) {
    if (c == '"') out_ += '"';
    out_ += c;
  }
  out_ += '"';
}

void CsvBuilder::endrow() {
  out_ += '\n';
  row_open_ = false;
}

}  // namespace lot
