#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sumdim/invariant_set.hpp"

namespace sumdim {

struct NodeId {
  int level = 0;
  uint32_t index = 0;
  friend bool operator==(const NodeId&, const NodeId&) = default;
};

// A rooted tree of height N with per-level node arrays. Nodes at level n+1
// are stored grouped by parent, so the children of any node form a
// contiguous index range. Optionally carries a planar-lattice payload per
// node. Immutable once built.
class LevelTree {
 public:
  // parents[n][k] is the parent (index in level n-1) of node k at level n,
  // for n = 1..N; parents[0] must be empty and level 0 has the single root.
  // Parent arrays must be nondecreasing (grouped) and surjective.
  static LevelTree from_parent_lists(std::vector<std::vector<uint32_t>> parents);

  int height() const { return static_cast<int>(parents_.size()) - 1; }
  size_t level_size(int n) const { return n == 0 ? 1 : parents_[n].size(); }
  size_t node_count() const;
  uint32_t parent(int n, uint32_t k) const { return parents_[n][k]; }
  // children of (n,k), as [begin, end) into level n+1
  std::pair<uint32_t, uint32_t> children(int n, uint32_t k) const {
    return {child_begin_[n][k], child_begin_[n][k + 1]};
  }
  uint32_t child_count(int n, uint32_t k) const {
    return child_begin_[n][k + 1] - child_begin_[n][k];
  }

  bool has_payload() const { return !payload_.empty(); }
  const IndexPair& payload(int n, uint32_t k) const { return payload_[n][k]; }
  void attach_payload(std::vector<std::vector<IndexPair>> payload);

 private:
  std::vector<std::vector<uint32_t>> parents_;
  std::vector<std::vector<uint32_t>> child_begin_;  // per level 0..N-1, size+1
  std::vector<std::vector<IndexPair>> payload_;
};

// A subtree sharing the base tree's structure, determined by its leaf set:
// a node is kept iff some kept leaf descends from it.
class Subtree {
 public:
  static Subtree full(const LevelTree& base);
  static Subtree from_leaf_mask(const LevelTree& base, std::vector<uint8_t> leaf_keep);

  const LevelTree& base() const { return *base_; }
  int height() const { return base_->height(); }
  bool kept(int n, uint32_t k) const { return keep_[n][k] != 0; }
  const std::vector<uint8_t>& level_mask(int n) const { return keep_[n]; }
  size_t kept_count(int n) const;
  size_t kept_node_count() const;
  uint32_t kept_child_count(int n, uint32_t k) const;
  std::vector<uint32_t> kept_leaves() const;

 private:
  const LevelTree* base_ = nullptr;
  std::vector<std::vector<uint8_t>> keep_;
};

// Bottom-up min-cut values for every node of a subtree at cost
// rbase^(-level*gamma). Stores levels 0..N-1 explicitly; every leaf has the
// uniform value rbase^(-N*gamma).
struct ContentTable {
  double rbase = 0;
  double gamma = 0;
  int height = 0;
  std::vector<std::vector<double>> values;  // levels 0..N-1
  double leaf_value = 0;

  double value(int n, uint32_t k) const {
    return n == height ? leaf_value : values[n][k];
  }
  // Content of the induced tree based at (n,k), i.e. re-leveled to height 0.
  double induced(int n, uint32_t k) const;
  double root() const { return values[0][0]; }
};

ContentTable tree_content_table(const Subtree& sub, double rbase, double gamma);

// H_r^gamma: the cheapest cut cost (root of the DP).
double tree_content(const Subtree& sub, double rbase, double gamma);

// An optimal cut in canonical form (ties prefer the shallower node); meets
// every root-to-leaf path exactly once.
std::vector<NodeId> minimal_cut(const Subtree& sub, double rbase, double gamma);

// Number of strict ancestors of `node` with at least c children in the
// subtree view.
int fertile_ancestors(const Subtree& sub, NodeId node, double c);

enum class DichotomyCase { kManyChildren, kOneChild };

struct DichotomyResult {
  DichotomyCase tag = DichotomyCase::kManyChildren;
  std::vector<uint32_t> children;  // kept child indices (level node.level+1)
};

// The content dichotomy at one node: either at least ceil(r^gamma3)
// children carry content >= H * r^-A (keep that many, highest first), or a
// single child carries content >= H * r^B. Requires the node's child count
// <= r^gamma5 and B = gamma4 - gamma3 - log_r 2 > 0.
DichotomyResult dichotomy_split_at(const Subtree& sub, const ContentTable& table,
                                   NodeId node, double gamma3, double gamma4,
                                   double gamma5);
// Convenience form applying to the root of the subtree.
DichotomyResult dichotomy_split(const Subtree& sub, double rbase, double gamma3,
                                double gamma4, double gamma5);

// The recursive regular-subtree extraction: applies the dichotomy at every
// kept node from the root down. Every node of the result satisfies the
// fertile-ancestry inequality (checked by tests).
Subtree regular_subtree(const Subtree& sub, double rbase, double gamma3,
                        double gamma4, double gamma5);

// Smallest N0 >= 1 with (N0*B + log_r V) / (N0*(A+B)) > 1 - eps; throws if
// the base is too small for the ladder (B <= (1-eps)*(A+B)).
int64_t thinning_threshold(double eps, double gamma3, double gamma4,
                           double gamma5, double rbase, double V);

// Unit mass at the root, split equally among kept children at every node.
struct NodeMeasure {
  std::vector<std::vector<double>> mass;  // per level, 0 on dropped nodes
  double node(int n, uint32_t k) const { return mass[n][k]; }
  std::vector<double> leaf_masses(const Subtree& sub) const;
};
NodeMeasure flow_measure(const Subtree& sub);

// Graphviz dump for small trees (<= 500 nodes).
std::string to_dot(const Subtree& sub);

}  // namespace sumdim
