#include "lot/kr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <vector>

#include "lot/common.hpp"

namespace lot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Uncapacitated min-cost flow, successive shortest paths with potentials.
// Forward arcs carry unbounded capacity; residual (reverse) arcs carry the
// flow already placed. All arc costs are nonnegative, so the initial zero
// potential is valid and every Dijkstra runs on nonnegative reduced costs.
struct MinCostFlow {
  struct Arc {
    int to;
    double cost;
    double residual;  // remaining capacity in this direction
    int rev;          // index of the paired arc in adj[to]
  };

  explicit MinCostFlow(int n) : adj(n), excess(n, 0.0), potential(n, 0.0) {}

  void add_edge(int u, int v, double cost) {
    adj[u].push_back({v, cost, kInf, static_cast<int>(adj[v].size())});
    adj[v].push_back({u, -cost, 0.0, static_cast<int>(adj[u].size()) - 1});
  }

  // Ships all excess to the deficits; returns the total cost. Throws if the
  // imbalances cannot be cleared (never expected on connected networks).
  double solve() {
    const int n = static_cast<int>(adj.size());
    double scale = 1.0;
    for (int v = 0; v < n; ++v) scale = std::max(scale, std::abs(excess[v]));
    const double tol = 1e-13 * scale;

    std::vector<double> dist(n);
    std::vector<int> prev_node(n), prev_arc(n);
    long long guard = 0;
    const long long guard_cap = 16LL * n * n + 1024;

    for (;;) {
      int source = -1;
      for (int v = 0; v < n; ++v)
        if (excess[v] > tol) {
          source = v;
          break;
        }
      if (source < 0) break;
      if (++guard > guard_cap)
        throw std::runtime_error("min-cost flow failed to converge");

      // Dijkstra on reduced costs from the chosen surplus node.
      std::fill(dist.begin(), dist.end(), kInf);
      dist[source] = 0.0;
      using Item = std::pair<double, int>;
      std::priority_queue<Item, std::vector<Item>, std::greater<Item>> heap;
      heap.push({0.0, source});
      while (!heap.empty()) {
        auto [d, u] = heap.top();
        heap.pop();
        if (d > dist[u] + 1e-15 * (1.0 + std::abs(d))) continue;
        for (int a = 0; a < static_cast<int>(adj[u].size()); ++a) {
          const Arc& arc = adj[u][a];
          if (arc.residual <= tol) continue;
          double rc = arc.cost + potential[u] - potential[arc.to];
          if (rc < 0.0) rc = 0.0;  // float dust on residual arcs
          if (dist[u] + rc < dist[arc.to] - 1e-18) {
            dist[arc.to] = dist[u] + rc;
            prev_node[arc.to] = u;
            prev_arc[arc.to] = a;
            heap.push({dist[arc.to], arc.to});
          }
        }
      }

      int sink = -1;
      double best = kInf;
      for (int v = 0; v < n; ++v)
        if (excess[v] < -tol && dist[v] < best) {
          best = dist[v];
          sink = v;
        }
      if (sink < 0)
        throw std::runtime_error("min-cost flow: no path to a deficit node");

      for (int v = 0; v < n; ++v)
        potential[v] += std::min(dist[v], dist[sink]);

      double amount = std::min(excess[source], -excess[sink]);
      for (int v = sink; v != source; v = prev_node[v])
        amount = std::min(amount, adj[prev_node[v]][prev_arc[v]].residual);
      for (int v = sink; v != source; v = prev_node[v]) {
        Arc& arc = adj[prev_node[v]][prev_arc[v]];
        arc.residual -= amount;
        adj[v][arc.rev].residual += amount;
      }
      excess[source] -= amount;
      excess[sink] += amount;
    }

    double cost = 0.0;
    for (int u = 0; u < n; ++u)
      for (const Arc& arc : adj[u])
        if (arc.cost < 0.0) cost += (-arc.cost) * arc.residual;
    return cost;
  }

  std::vector<std::vector<Arc>> adj;
  std::vector<double> excess;
  std::vector<double> potential;
};

void check_pair(const TorusMeasure& mu1, const TorusMeasure& mu2) {
  if (mu1.d != mu2.d || mu1.n != mu2.n)
    throw domain_error("measures live on different grids");
  if (mu1.comps != 1 || mu2.comps != 1 || mu1.density || mu2.density)
    throw domain_error("transport distances need scalar cube-mass measures");
}

// Grid nodes plus optionally one reservoir; axis-neighbor arcs cost eps.
MinCostFlow grid_network(const TorusMeasure& mu1, const TorusMeasure& mu2,
                         bool with_reservoir) {
  const long long nc = mu1.cells.total;
  const double eps = mu1.eps();
  MinCostFlow net(static_cast<int>(nc) + (with_reservoir ? 1 : 0));
  for (long long c = 0; c < nc; ++c) {
    ivec z = mu1.cells.coords(c);
    for (int i = 0; i < mu1.d; ++i) {
      if (mu1.n == 1) continue;  // self-loop
      z[i] += 1;
      const long long nb = mu1.cells.index(z);
      z[i] -= 1;
      net.add_edge(static_cast<int>(c), static_cast<int>(nb), eps);
      net.add_edge(static_cast<int>(nb), static_cast<int>(c), eps);
    }
    net.excess[static_cast<size_t>(c)] = mu1.w[static_cast<size_t>(c)] -
                                         mu2.w[static_cast<size_t>(c)];
  }
  if (with_reservoir) {
    const int t = static_cast<int>(nc);
    double total = 0.0;
    for (long long c = 0; c < nc; ++c) {
      net.add_edge(static_cast<int>(c), t, 1.0);
      net.add_edge(t, static_cast<int>(c), 1.0);
      total += net.excess[static_cast<size_t>(c)];
    }
    net.excess[static_cast<size_t>(t)] = -total;
  }
  return net;
}

}  // namespace

double kr_distance(const TorusMeasure& mu1, const TorusMeasure& mu2) {
  check_pair(mu1, mu2);
  MinCostFlow net = grid_network(mu1, mu2, true);
  return net.solve();
}

double grid_w1(const TorusMeasure& mu1, const TorusMeasure& mu2) {
  check_pair(mu1, mu2);
  double scale = 1.0, total = 0.0;
  for (size_t i = 0; i < mu1.w.size(); ++i) {
    scale = std::max({scale, std::abs(mu1.w[i]), std::abs(mu2.w[i])});
    total += mu1.w[i] - mu2.w[i];
  }
  if (std::abs(total) > 1e-12 * scale * static_cast<double>(mu1.w.size()))
    throw domain_error("grid_w1 needs measures with equal totals");
  MinCostFlow net = grid_network(mu1, mu2, false);
  // Splash any float dust in the imbalance onto one node so the solver's
  // excess sweep terminates cleanly.
  net.excess[0] -= total;
  return net.solve();
}

}  // namespace lot
