#pragma once

#include <memory>

#include "lot/periodic_graph.hpp"

namespace lt {

// Nearest-neighbour lattice: one fiber, one rail per coordinate direction.
inline std::shared_ptr<const lot::PeriodicGraph> make_zd(int d) {
  std::vector<lot::stencil_edge> edges;
  for (int i = 0; i < d; ++i) {
    lot::ivec dz(d, 0);
    dz[i] = 1;
    edges.push_back({0, dz, 0});
  }
  return std::make_shared<const lot::PeriodicGraph>(
      lot::PeriodicGraph::make(d, {"v"}, edges));
}

// Two parallel rails in Z^1 joined by a vertical rung inside each cell.
inline std::shared_ptr<const lot::PeriodicGraph> make_ladder() {
  std::vector<lot::stencil_edge> edges = {
      {0, {1}, 0},  // rail a
      {1, {1}, 1},  // rail b
      {0, {0}, 1},  // rung
  };
  return std::make_shared<const lot::PeriodicGraph>(
      lot::PeriodicGraph::make(1, {"a", "b"}, edges));
}

// Z^1 with fiber {a,b}: a--b inside the cell and b--a into the next cell.
inline std::shared_ptr<const lot::PeriodicGraph> make_chain2() {
  std::vector<lot::stencil_edge> edges = {
      {0, {0}, 1},
      {1, {1}, 0},
  };
  return std::make_shared<const lot::PeriodicGraph>(
      lot::PeriodicGraph::make(1, {"a", "b"}, edges));
}

}  // namespace lt
