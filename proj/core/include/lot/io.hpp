#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "lot/dynamics.hpp"
#include "lot/fv.hpp"

namespace lot {

/// The request itself is malformed: unreadable or invalid experiment config,
/// missing required parameters, contradictory flags. Maps to exit code 64.
struct usage_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// A referenced data file (graph, cost, mesh, path, measure) exists but does
/// not describe a usable object. Maps to exit code 65, like infeasible_error.
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Graph stencil files
//
// { "d": 1, "V": ["v"], "edges": [ { "v": "v", "dz": [1], "v2": "v" } ] }
//
// Each entry is one undirected stencil edge. With "symmetric": true the file
// instead lists both orientations of every edge and the loader pairs them up,
// failing with the offending entry when a reverse is missing. Connectivity of
// the infinite graph is checked by BFS on a window of radius 3 max(R0, 1).

std::shared_ptr<const PeriodicGraph> load_graph(const std::string& path);

// ---------------------------------------------------------------------------
// Cost config files
//
// { "kind": "wp_mean", "p": 2, "mean": "arithmetic",
//   "q_fwd": [...], "q_bwd": [...],               // optional, default 1
//   "reference": { "m": [...], "J": [...] } }     // optional override
//
// { "kind": "quadratic", "R1": 0, "L": [[...], ...], "b": [...], "c": 0 }
//
// A reference override must be a valid interior point: J divergence-free and
// the cost finite there.

std::shared_ptr<const CostFunction> load_cost(const std::string& path,
                                              std::shared_ptr<const PeriodicGraph> g);

// ---------------------------------------------------------------------------
// Mesh files
//
// { "builtin": "square", "d": 2 }   or   { "builtin": "triangle" }
//
// { "d": 2,
//   "cells": [ { "label": "N", "site": [...], "vertices": [[...], ...] } ],
//   "volumes": [...],                                   // with "adjacency"
//   "adjacency": [ { "a": "N", "dz": [0,1], "b": "S",
//                    "dist": 0.5, "area": 1.0, "normal": [0,1] } ] }
//
// Without "adjacency" the facet geometry is derived from the polytopes
// (d <= 3); with it the stated geometry is trusted, as for analytic meshes.

FVPartition load_mesh(const std::string& path);

// ---------------------------------------------------------------------------
// Discrete path serialization
//
// { "format": "lot-path", "d": 1, "fibers": 1, "n": 2, "eps": 0.5, "K": 8,
//   "t0": 0, "t1": 1, "m": [[...], ...], "J": [[...], ...] }

void save_path(const DiscretePath& p, const std::string& path);
DiscretePath load_path(const std::string& path, std::shared_ptr<const PeriodicGraph> base);

// ---------------------------------------------------------------------------
// Boundary measures
//
// { "type": "array", "values": [...] }                    // per torus vertex
// { "type": "bump", "center": 0.25, "amplitude": 0.8 }    // d = 1 only

struct MeasureSpec {
  enum class Type { array, bump };
  Type type = Type::array;
  dvec values;
  double center = 0.0;
  double amplitude = 0.0;  // |amplitude| < 1 keeps the density positive
};

/// Realizes the spec on a torus graph. Arrays are taken verbatim (size must
/// be vertex_count, entries >= 0). A bump places the exact cube masses of
/// rho(x) = 1 + amplitude cos(2 pi (x - center)) on the n cubes, split
/// equally across fibers; total mass is exactly 1.
TorusField realize_measure(const MeasureSpec& spec, std::shared_ptr<const RescaledGraph> rg);

// ---------------------------------------------------------------------------
// Experiment config
//
// One JSON object holding the science parameters of a command. Relative
// graph/cost/mesh/save_path entries resolve against the config's directory;
// "out" resolves against the working directory.

struct RhoJPoint {
  double rho = 1.0;
  dvec j;
};

struct ExperimentConfig {
  std::string command;  // optional; the CLI subcommand wins
  std::string graph_file, cost_file, mesh_file;
  dvec rho_list;
  std::vector<dvec> j_grid;
  dvec eps_list;  // entries are reciprocals of integers
  int n = 0;      // torus resolution for minimal_action
  int K = 8;
  double tol = 1e-9;
  bool tol_set = false;
  std::uint64_t seed = 2026;
  bool seed_set = false;
  int threads = 1;
  std::string out;
  std::string format = "csv";
  bool timing = false;
  std::optional<MeasureSpec> m0, m1;
  std::string reference_fhom = "closed_form";  // or "solve"
  int quad_nx = 48, quad_nt = 24;              // continuum reference quadrature
  std::string save_path_file;
  std::string mobility_version = "weighted_linear";  // or "minimum"
  double lambda = 0.5;
  std::string selector;  // "", "tie", "balancing"
  std::vector<RhoJPoint> points;
  std::vector<std::string> validate_files;
};

ExperimentConfig load_config(const std::string& path);

// ---------------------------------------------------------------------------
// Deterministic table output
//
// CSV bytes depend only on the appended content: numbers are rendered as
// shortest round-trip decimals, fields with separators are RFC 4180 quoted,
// rows end with a single newline. Metadata travels in leading '#' comment
// lines, which gnuplot and spreadsheet importers skip.

std::string format_number(double v);

class CsvBuilder {
 public:
  void comment(const std::string& line);               // "# line"
  void columns(const std::vector<std::string>& cols);  // header row
  void cell(double v);
  void cell(long long v);
  void cell(int v) { cell(static_cast<long long>(v)); }
  void cell(const std::string& s);
  void endrow();

  const std::string& str() const { return out_; }

 private:
  void sep();
  std::string out_;
  bool row_open_ = false;
};

/// Whole-file write; throws std::runtime_error (internal) on failure.
void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);  // data_error if unreadable

}  // namespace lot
