#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "lot/io.hpp"

using namespace lot;

namespace {

std::string data(const std::string& name) {
  return std::string(LOT_DATA_DIR) + "/" + name;
}

std::string tmp_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("graph files load with validation and fail with named culprits") {
  auto z1 = load_graph(data("graph_z1.json"));
  CHECK(z1->d == 1);
  CHECK(z1->fiber_count() == 1);
  CHECK(z1->edge_count() == 1);
  CHECK(z1->r0 == 1);
  CHECK(z1->max_degree == 2);

  auto ladder = load_graph(data("graph_ladder.json"));
  CHECK(ladder->fiber_count() == 2);
  CHECK(ladder->edge_count() == 3);
  CHECK(ladder->fiber_index("b") == 1);

  // The symmetric convention lists both orientations; pairing halves them.
  auto sym = load_graph(data("graph_symmetric.json"));
  CHECK(sym->edge_count() == 3);
  CHECK(sym->fiber_count() == 2);
  CHECK_FALSE(sym->has_parallel_edges);

  CHECK_THROWS_WITH_AS(load_graph(data("graph_asym.json")),
                       doctest::Contains("a --(0)--> b"), data_error);
  CHECK_THROWS_WITH_AS(load_graph(data("graph_disconnected.json")),
                       doctest::Contains("disconnected"), data_error);
  CHECK_THROWS_AS(load_graph(data("no_such_file.json")), data_error);

  const std::string bad = tmp_file("lot_bad_graph.json");
  write_text_file(bad, "{ not json");
  CHECK_THROWS_AS(load_graph(bad), data_error);
  write_text_file(bad, R"({"d": 1, "V": ["v"], "edges": [{"v": "w", "dz": [1], "v2": "v"}]})");
  CHECK_THROWS_WITH_AS(load_graph(bad), doctest::Contains("unknown fiber"), data_error);
  write_text_file(bad, R"({"d": 2, "V": ["v"], "edges": [{"v": "v", "dz": [1], "v2": "v"}]})");
  CHECK_THROWS_WITH_AS(load_graph(bad), doctest::Contains("length d"), data_error);
}

TEST_CASE("cost files construct the declared energies") {
  auto z1 = load_graph(data("graph_z1.json"));
  auto w2 = load_cost(data("cost_w2.json"), z1);
  CHECK(w2->name() == "wp_mean");
  CHECK(w2->smooth());

  // m = 1, J(v, v+1) = j costs j^2 / rho on the two oriented pairs.
  PeriodicField m{z1, {1.0}};
  PeriodicFlux J{z1, {3.0}};
  CHECK(w2->evaluate_periodic(m, J) == doctest::Approx(9.0).epsilon(1e-12));

  auto w1 = load_cost(data("cost_w1min.json"), z1);
  CHECK_FALSE(w1->smooth());
  CHECK(w1->evaluate_periodic(m, J) == doctest::Approx(3.0).epsilon(1e-12));

  auto wref = load_cost(data("cost_w2_ref.json"), z1);
  CHECK(wref->m_ref.v[0] == 0.5);
  CHECK(wref->J_ref.v[0] == 1.0);

  auto ladder = load_graph(data("graph_ladder.json"));
  CHECK_THROWS_WITH_AS(load_cost(data("cost_bad_reference.json"), ladder),
                       doctest::Contains("divergence-free"), data_error);

  const std::string bad = tmp_file("lot_bad_cost.json");
  write_text_file(bad, R"({"kind": "wp_mean", "p": 2, "mean": "median"})");
  CHECK_THROWS_AS(load_cost(bad, z1), data_error);
  write_text_file(bad, R"({"kind": "nonsense"})");
  CHECK_THROWS_WITH_AS(load_cost(bad, z1), doctest::Contains("unknown cost kind"), data_error);

  write_text_file(bad, R"({"kind": "quadratic", "R1": 0, "L": [[0, 1]], "b": [0, 0], "c": 0.25})");
  auto quad = load_cost(bad, z1);
  CHECK(quad->evaluate_periodic(m, J) == doctest::Approx(0.5 * 9.0 + 0.25).epsilon(1e-12));
}

TEST_CASE("mesh files reach both construction routes") {
  FVPartition sq = load_mesh(data("mesh_square2.json"));
  CHECK(sq.cells.size() == 1);
  CHECK(fv_identity(sq).deviation <= 1e-15);

  FVPartition tri = load_mesh(data("mesh_triangle.json"));
  CHECK(tri.cells.size() == 4);

  // The same four triangles via polytope-derived geometry.
  FVPartition tri2 = load_mesh(data("mesh_tri_explicit.json"));
  CHECK(tri2.facets.size() == tri.facets.size());
  CHECK(fv_identity(tri2).deviation <= 1e-12);

  FVPartition pre = load_mesh(data("mesh_square_precomputed.json"));
  CHECK(pre.facets.size() == 2);
  CHECK(fv_identity(pre).deviation <= 1e-15);

  CHECK_THROWS_WITH_AS(load_mesh(data("mesh_bad.json")), doctest::Contains("orthogonally"),
                       data_error);

  const std::string bad = tmp_file("lot_bad_mesh.json");
  write_text_file(bad, R"({"builtin": "hex"})");
  CHECK_THROWS_AS(load_mesh(bad), data_error);
}

TEST_CASE("paths survive a save and load round trip") {
  auto z1 = load_graph(data("graph_z1.json"));
  auto rg = std::make_shared<const RescaledGraph>(RescaledGraph::make(z1, 4));

  TorusField m0 = make_torus_field(rg);
  for (int z = 0; z < 4; ++z) m0.v[z] = 0.25;
  std::vector<TorusFlux> J;
  rng gen(7);
  for (int k = 0; k < 3; ++k) {
    TorusFlux Jk = make_torus_flux(rg);
    for (auto& v : Jk.v) v = gen.uniform(-0.05, 0.05);
    J.push_back(Jk);
  }
  DiscretePath p = integrate_path(m0, J, 0.0, 0.5);

  const std::string file = tmp_file("lot_path_roundtrip.json");
  save_path(p, file);
  DiscretePath q = load_path(file, z1);
  CHECK(q.rg->n == 4);
  CHECK(q.t0 == 0.0);
  CHECK(q.t1 == 0.5);
  REQUIRE(q.m.size() == p.m.size());
  REQUIRE(q.J.size() == p.J.size());
  for (size_t k = 0; k < p.m.size(); ++k)
    for (size_t i = 0; i < p.m[k].v.size(); ++i) CHECK(q.m[k].v[i] == p.m[k].v[i]);
  for (size_t k = 0; k < p.J.size(); ++k)
    for (size_t i = 0; i < p.J[k].v.size(); ++i) CHECK(q.J[k].v[i] == p.J[k].v[i]);

  // Same bytes on a second save: serialization is deterministic.
  const std::string file2 = tmp_file("lot_path_roundtrip2.json");
  save_path(p, file2);
  CHECK(read_text_file(file) == read_text_file(file2));

  auto ladder = load_graph(data("graph_ladder.json"));
  CHECK_THROWS_WITH_AS(load_path(file, ladder), doctest::Contains("fiber count"), data_error);
}

TEST_CASE("measure specs realize exact masses") {
  auto z1 = load_graph(data("graph_z1.json"));
  auto rg = std::make_shared<const RescaledGraph>(RescaledGraph::make(z1, 8));

  MeasureSpec arr;
  arr.type = MeasureSpec::Type::array;
  arr.values = dvec(8, 0.125);
  TorusField m = realize_measure(arr, rg);
  CHECK(m.v[3] == 0.125);
  arr.values.pop_back();
  CHECK_THROWS_AS(realize_measure(arr, rg), data_error);
  arr.values = dvec(8, 0.125);
  arr.values[0] = -0.1;
  CHECK_THROWS_WITH_AS(realize_measure(arr, rg), doctest::Contains("nonnegative"), data_error);

  MeasureSpec bump;
  bump.type = MeasureSpec::Type::bump;
  bump.center = 0.25;
  bump.amplitude = 0.8;
  TorusField b = realize_measure(bump, rg);
  CHECK(vsum(b.v) == doctest::Approx(1.0).epsilon(1e-14));
  // Cube mass against midpoint quadrature of the density.
  for (int z = 0; z < 8; ++z) {
    double q = 0.0;
    const int nq = 2000;
    for (int i = 0; i < nq; ++i) {
      const double x = (z + (i + 0.5) / nq) / 8.0;
      q += (1.0 + 0.8 * std::cos(2.0 * std::numbers::pi * (x - 0.25))) / (8.0 * nq);
    }
    CHECK(b.v[z] == doctest::Approx(q).epsilon(1e-7));
  }
  // Center 0.25 is the shared edge of cubes 1 and 2: their masses tie at the
  // top, and the antipodal cubes 5 and 6 tie at the bottom.
  CHECK(b.v[1] == doctest::Approx(b.v[2]).epsilon(1e-13));
  CHECK(b.v[5] == doctest::Approx(b.v[6]).epsilon(1e-13));
  CHECK(b.v[1] > b.v[5]);
  int peak = 0;
  for (int z = 0; z < 8; ++z)
    if (b.v[z] > b.v[peak]) peak = z;
  CHECK((peak == 1 || peak == 2));

  bump.amplitude = 1.0;
  CHECK_THROWS_AS(realize_measure(bump, rg), data_error);

  // Multi-fiber graphs split each cube mass equally.
  auto ladder = load_graph(data("graph_ladder.json"));
  auto rg2 = std::make_shared<const RescaledGraph>(RescaledGraph::make(ladder, 8));
  bump.amplitude = 0.8;
  TorusField b2 = realize_measure(bump, rg2);
  CHECK(vsum(b2.v) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(b2.v[rg2->vidx(2, 0)] == b2.v[rg2->vidx(2, 1)]);
}

TEST_CASE("experiment configs parse, validate, and resolve paths") {
  const std::string file = tmp_file("lot_config.json");
  write_text_file(file, R"({
    "command": "cell",
    "graph": "graph_z1.json",
    "cost": "/abs/cost.json",
    "rho": [1, 2],
    "j": [[0], [1], [3]],
    "eps": [0.25, 0.125],
    "K": 12,
    "tol": 1e-8,
    "seed": 41,
    "threads": 2,
    "format": "json",
    "boundary": { "m0": { "type": "bump", "center": 0.25 },
                  "m1": { "type": "array", "values": [1, 0] } },
    "points": [ { "rho": 1.5, "j": [0.3, -0.2] } ]
  })");
  ExperimentConfig cfg = load_config(file);
  CHECK(cfg.command == "cell");
  // Relative entries resolve against the config directory; absolute ones stay.
  CHECK(cfg.graph_file ==
        (std::filesystem::path(file).parent_path() / "graph_z1.json").string());
  CHECK(cfg.cost_file == "/abs/cost.json");
  CHECK(cfg.rho_list == dvec{1.0, 2.0});
  CHECK(cfg.j_grid.size() == 3);
  CHECK(cfg.eps_list.size() == 2);
  CHECK(cfg.K == 12);
  CHECK(cfg.tol == 1e-8);
  CHECK(cfg.tol_set);
  CHECK(cfg.seed == 41);
  CHECK(cfg.seed_set);
  CHECK(cfg.threads == 2);
  CHECK(cfg.format == "json");
  REQUIRE(cfg.m0.has_value());
  CHECK(cfg.m0->type == MeasureSpec::Type::bump);
  REQUIRE(cfg.m1.has_value());
  CHECK(cfg.m1->values == dvec{1.0, 0.0});
  REQUIRE(cfg.points.size() == 1);
  CHECK(cfg.points[0].rho == 1.5);

  ExperimentConfig dflt = load_config([&] {
    write_text_file(file, R"({"graph": "g.json"})");
    return file;
  }());
  CHECK(dflt.K == 8);
  CHECK(dflt.tol == 1e-9);
  CHECK_FALSE(dflt.tol_set);
  CHECK(dflt.seed == 2026);
  CHECK_FALSE(dflt.seed_set);
  CHECK(dflt.format == "csv");

  write_text_file(file, R"({"comand": "cell"})");
  CHECK_THROWS_WITH_AS(load_config(file), doctest::Contains("unknown config field"), usage_error);
  write_text_file(file, R"({"eps": [0.3]})");
  CHECK_THROWS_WITH_AS(load_config(file), doctest::Contains("reciprocals"), usage_error);
  write_text_file(file, R"({"tol": 0})");
  CHECK_THROWS_AS(load_config(file), usage_error);
  write_text_file(file, R"({"format": "xml"})");
  CHECK_THROWS_AS(load_config(file), usage_error);
  write_text_file(file, R"({"command": "fly"})");
  CHECK_THROWS_AS(load_config(file), usage_error);
  write_text_file(file, "{");
  CHECK_THROWS_AS(load_config(file), usage_error);
  CHECK_THROWS_AS(load_config(tmp_file("lot_missing_config.json")), usage_error);
}

TEST_CASE("csv output is deterministic, quoted, and round-trippable") {
  CHECK(format_number(0.0) == "0");
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(9.0) == "9");
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(4.5) == "4.5");
  CHECK(format_number(inf) == "inf");
  CHECK(format_number(-inf) == "-inf");
  CHECK(format_number(std::nan("")) == "nan");

  // Shortest representation still round-trips exactly.
  rng gen(3);
  for (int i = 0; i < 200; ++i) {
    const double v = gen.normal() * std::pow(10.0, gen.uniform_int(-12, 12));
    CHECK(std::stod(format_number(v)) == v);
  }

  CsvBuilder b;
  b.comment("units: value [energy]");
  b.columns({"name", "value"});
  b.cell(std::string("plain"));
  b.cell(1.0 / 3.0);
  b.endrow();
  b.cell(std::string("a,b \"quoted\""));
  b.cell(2LL);
  b.endrow();
  const std::string expect = std::string("# units: value [energy]\n") + "name,value\n" +
                             "plain," + format_number(1.0 / 3.0) + "\n" +
                             "\"a,b \"\"quoted\"\"\",2\n";
  CHECK(b.str() == expect);

  CsvBuilder c;
  c.comment("units: value [energy]");
  c.columns({"name", "value"});
  c.cell(std::string("plain"));
  c.cell(1.0 / 3.0);
  c.endrow();
  c.cell(std::string("a,b \"quoted\""));
  c.cell(2LL);
  c.endrow();
  CHECK(c.str() == b.str());
}
