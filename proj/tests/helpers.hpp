#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "sumdim/content.hpp"
#include "sumdim/tree.hpp"

namespace testutil {

// Exhaustive minimum over contiguous-run partitions of sorted points;
// independent oracle for interval_cover_content.
inline double brute_cover_cost(const std::vector<double>& xs, double rho,
                               double gamma) {
  const size_t n = xs.size();
  if (n == 0) return 0;
  double best = std::numeric_limits<double>::infinity();
  // bit k set = cut between point k and k+1
  for (uint64_t mask = 0; mask < (uint64_t(1) << (n - 1)); ++mask) {
    double cost = 0;
    size_t start = 0;
    for (size_t k = 0; k < n; ++k) {
      if (k + 1 == n || (mask >> k) & 1) {
        cost += std::pow(std::max(rho, xs[k] - xs[start]), gamma);
        start = k + 1;
      }
    }
    best = std::min(best, cost);
  }
  return best;
}

// All antichain cuts of the subtree at (level, index), as total costs;
// independent oracle for tree_content.
inline std::vector<double> brute_cut_costs(const sumdim::Subtree& sub, int level,
                                           uint32_t index, double rbase,
                                           double gamma) {
  const sumdim::LevelTree& base = sub.base();
  const double node_cost = std::pow(rbase, -double(level) * gamma);
  if (level == base.height()) return {node_cost};
  std::vector<double> combined{0.0};
  auto [b, e] = base.children(level, index);
  for (uint32_t c = b; c < e; ++c) {
    if (!sub.kept(level + 1, c)) continue;
    std::vector<double> child = brute_cut_costs(sub, level + 1, c, rbase, gamma);
    std::vector<double> next;
    next.reserve(combined.size() * child.size());
    for (double x : combined)
      for (double y : child) next.push_back(x + y);
    combined = std::move(next);
    if (combined.size() > 2000000) throw std::runtime_error("cut oracle blowup");
  }
  combined.push_back(node_cost);
  return combined;
}

inline double brute_tree_content(const sumdim::Subtree& sub, double rbase,
                                 double gamma) {
  std::vector<double> costs = brute_cut_costs(sub, 0, 0, rbase, gamma);
  return *std::min_element(costs.begin(), costs.end());
}

// Random level tree: every node at levels < height gets min..max_children
// children, total nodes capped.
inline sumdim::LevelTree random_tree(std::mt19937_64& rng, int height,
                                     int max_children, size_t node_cap,
                                     int min_children = 1) {
  std::vector<std::vector<uint32_t>> parents(height + 1);
  size_t total = 1;
  size_t prev = 1;
  for (int n = 1; n <= height; ++n) {
    std::vector<uint32_t> par;
    for (uint32_t p = 0; p < prev; ++p) {
      size_t room = node_cap > total ? node_cap - total : 0;
      int maxc = std::max<int>(1, std::min<size_t>(max_children, room + 1));
      int minc = std::min(min_children, maxc);
      std::uniform_int_distribution<int> dist(minc, maxc);
      int c = dist(rng);
      for (int k = 0; k < c; ++k) par.push_back(p);
      total += c;
    }
    parents[n] = std::move(par);
    prev = parents[n].size();
  }
  return sumdim::LevelTree::from_parent_lists(std::move(parents));
}

// Exact interval discrepancy by direct enumeration of critical boundaries
// with one-sided limits; independent oracle for discrepancy().
inline double brute_discrepancy(const std::vector<double>& xs) {
  std::vector<double> v = xs;
  std::sort(v.begin(), v.end());
  const size_t N = v.size();
  // candidate boundaries: value + open/closed flag; for a: closed includes
  // points equal to a, open excludes; for b: [a,b) always excludes b, and
  // the limit b -> x_j^+ includes x_j
  struct Bound {
    double value;
    bool include_equal;  // for a: count x == a; for b: count x == b
  };
  std::vector<Bound> as, bs;
  as.push_back({0.0, true});
  bs.push_back({1.0, true});  // [a, 1): includes everything below 1
  for (double x : v) {
    as.push_back({x, true});
    as.push_back({x, false});
    bs.push_back({x, false});
    bs.push_back({x, true});
  }
  double best = 0;
  for (const Bound& a : as)
    for (const Bound& b : bs) {
      if (b.value < a.value) continue;
      size_t count = 0;
      for (double x : v) {
        bool in_lo = a.include_equal ? x >= a.value : x > a.value;
        bool in_hi = b.include_equal ? x <= b.value : x < b.value;
        if (in_lo && in_hi) ++count;
      }
      best = std::max(best, std::abs(double(count) / N - (b.value - a.value)));
    }
  return best;
}

// Random planar (rho,gamma)ic test sets: product of random restricted digit
// sets in a common base, so the concentration bound holds structurally.
inline std::vector<sumdim::Point2> random_planar_fractal(std::mt19937_64& rng,
                                                         int base, int levels,
                                                         int digits_per_level) {
  std::vector<std::pair<uint64_t, uint64_t>> cells{{0, 0}};
  for (int l = 0; l < levels; ++l) {
    std::vector<std::pair<int, int>> chosen;
    std::uniform_int_distribution<int> dist(0, base - 1);
    while (static_cast<int>(chosen.size()) < digits_per_level) {
      std::pair<int, int> d{dist(rng), dist(rng)};
      if (std::find(chosen.begin(), chosen.end(), d) == chosen.end())
        chosen.push_back(d);
    }
    std::vector<std::pair<uint64_t, uint64_t>> next;
    next.reserve(cells.size() * chosen.size());
    for (auto [i, j] : cells)
      for (auto [a, b] : chosen)
        next.push_back({i * base + a, j * base + b});
    cells = std::move(next);
  }
  const double scale = std::pow(double(base), -levels);
  std::vector<sumdim::Point2> pts;
  pts.reserve(cells.size());
  for (auto [i, j] : cells) pts.push_back({double(i) * scale, double(j) * scale});
  return pts;
}

}  // namespace testutil
