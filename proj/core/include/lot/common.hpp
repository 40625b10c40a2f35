#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace lot {

using ivec = std::vector<int>;     // lattice vector, length d
using dvec = std::vector<double>;

inline constexpr double inf = std::numeric_limits<double>::infinity();

inline int inf_norm(const ivec& z) {
  int m = 0;
  for (int c : z) m = std::max(m, std::abs(c));
  return m;
}

inline ivec iadd(const ivec& a, const ivec& b) {
  ivec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline ivec ineg(const ivec& a) {
  ivec r(a.size());
  for (size_t i = 0; i < a.size(); ++i) r[i] = -a[i];
  return r;
}

inline bool is_zero(const ivec& a) {
  for (int c : a) if (c != 0) return false;
  return true;
}

inline double l2_norm(const dvec& v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline double linf_norm(const dvec& v) {
  double s = 0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

inline double l1_norm(const dvec& v) {
  double s = 0;
  for (double x : v) s += std::abs(x);
  return s;
}

inline double dot(const dvec& a, const dvec& b) {
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double vsum(const dvec& v) {
  double s = 0;
  for (double x : v) s += x;
  return s;
}

/// Row-major indexer for the box [0,n)^d with periodic wrapping.
struct grid_indexer {
  int d = 0;
  int n = 1;
  long long total = 1;

  grid_indexer() = default;
  grid_indexer(int d_, int n_) : d(d_), n(n_) {
    total = 1;
    for (int i = 0; i < d; ++i) total *= n;
  }

  int wrap(int c) const {
    int r = c % n;
    return r < 0 ? r + n : r;
  }

  long long index(const ivec& z) const {
    long long idx = 0;
    for (int i = 0; i < d; ++i) idx = idx * n + wrap(z[i]);
    return idx;
  }

  ivec coords(long long idx) const {
    ivec z(d);
    for (int i = d - 1; i >= 0; --i) {
      z[i] = static_cast<int>(idx % n);
      idx /= n;
    }
    return z;
  }

  ivec wrap_vec(const ivec& z) const {
    ivec r(d);
    for (int i = 0; i < d; ++i) r[i] = wrap(z[i]);
    return r;
  }
};

/// Indexer for a centered window [-R,R]^d (no wrapping).
struct window_indexer {
  int d = 0;
  int R = 0;
  int side = 1;
  long long total = 1;

  window_indexer() = default;
  window_indexer(int d_, int R_) : d(d_), R(R_), side(2 * R_ + 1) {
    total = 1;
    for (int i = 0; i < d; ++i) total *= side;
  }

  bool contains(const ivec& z) const { return inf_norm(z) <= R; }

  long long index(const ivec& z) const {
    long long idx = 0;
    for (int i = 0; i < d; ++i) {
      assert(std::abs(z[i]) <= R);
      idx = idx * side + (z[i] + R);
    }
    return idx;
  }

  ivec coords(long long idx) const {
    ivec z(d);
    for (int i = d - 1; i >= 0; --i) {
      z[i] = static_cast<int>(idx % side) - R;
      idx /= side;
    }
    return z;
  }
};

/// Deterministic RNG with platform-stable distributions (the std:: ones are
/// implementation defined, which would break byte-identical CSV output).
struct rng {
  uint64_t s;

  explicit rng(uint64_t seed = 1) : s(seed ? seed : 0x9e3779b97f4a7c15ull) {}

  uint64_t next() {
    // splitmix64
    uint64_t z = (s += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  int uniform_int(int lo, int hi) {  // inclusive bounds
    return lo + static_cast<int>(next() % static_cast<uint64_t>(hi - lo + 1));
  }

  double normal() {
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925287 * u2);
  }
};

struct domain_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct infeasible_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace lot
