#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "sumdim/tree.hpp"

using namespace sumdim;

namespace {

LevelTree full_kary(int height, int arity) {
  std::vector<std::vector<uint32_t>> parents(height + 1);
  size_t prev = 1;
  for (int n = 1; n <= height; ++n) {
    std::vector<uint32_t> par;
    for (uint32_t p = 0; p < prev; ++p)
      for (int c = 0; c < arity; ++c) par.push_back(p);
    parents[n] = std::move(par);
    prev = parents[n].size();
  }
  return LevelTree::from_parent_lists(std::move(parents));
}

LevelTree path_tree(int height) { return full_kary(height, 1); }

}  // namespace

TEST_CASE("tree content closed forms") {
  for (int N : {1, 2, 3, 4, 6}) {
    LevelTree t = full_kary(N, 2);
    CHECK(tree_content(Subtree::full(t), 2.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
  }
  LevelTree b3 = full_kary(3, 2);
  CHECK(tree_content(Subtree::full(b3), 2.0, 2.0) ==
        doctest::Approx(1.0 / 8).epsilon(1e-12));  // leaf cut: 8 * 2^-6
  for (int N : {1, 3, 5}) {
    LevelTree p = path_tree(N);
    CHECK(tree_content(Subtree::full(p), 3.0, 0.7) ==
          doctest::Approx(std::pow(3.0, -N * 0.7)).epsilon(1e-12));
  }
  // content never exceeds the root cut
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    LevelTree t = testutil::random_tree(rng, 4, 4, 60);
    CHECK(tree_content(Subtree::full(t), 2.0, 0.8) <= 1.0 + 1e-12);
  }
}

TEST_CASE("minimal cut canonical forms") {
  LevelTree p = path_tree(4);
  auto cut = minimal_cut(Subtree::full(p), 2.0, 1.0);
  REQUIRE(cut.size() == 1);
  CHECK(cut[0].level == 4);  // leaf is cheapest on a path

  // full binary tree at gamma = 1, r = 2: every level cut ties; the root wins
  LevelTree b = full_kary(3, 2);
  auto cut2 = minimal_cut(Subtree::full(b), 2.0, 1.0);
  REQUIRE(cut2.size() == 1);
  CHECK(cut2[0].level == 0);
}

TEST_CASE("tree content equals the antichain-cut oracle") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    int height = 1 + int(rng() % 3);
    LevelTree t = testutil::random_tree(rng, height, 3, 10);
    Subtree sub = Subtree::full(t);
    double rbase = 2 + double(rng() % 3);
    double gamma = 0.3 + 0.001 * double(rng() % 1500);
    CHECK(tree_content(sub, rbase, gamma) ==
          doctest::Approx(testutil::brute_tree_content(sub, rbase, gamma))
              .epsilon(1e-12));
    // the canonical cut is valid and achieves the same cost
    auto cut = minimal_cut(sub, rbase, gamma);
    double cost = 0;
    for (const NodeId& nid : cut) cost += std::pow(rbase, -double(nid.level) * gamma);
    CHECK(cost == doctest::Approx(tree_content(sub, rbase, gamma)).epsilon(1e-12));
  }
}

TEST_CASE("minimal cut meets every root-to-leaf path exactly once") {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    LevelTree t = testutil::random_tree(rng, 4, 3, 50);
    Subtree sub = Subtree::full(t);
    auto cut = minimal_cut(sub, 2.0, 0.9);
    std::vector<std::vector<uint8_t>> in_cut(t.height() + 1);
    for (int n = 0; n <= t.height(); ++n) in_cut[n].assign(t.level_size(n), 0);
    for (const NodeId& nid : cut) in_cut[nid.level][nid.index] = 1;
    for (uint32_t leaf = 0; leaf < t.level_size(t.height()); ++leaf) {
      int hits = in_cut[t.height()][leaf];
      uint32_t k = leaf;
      for (int n = t.height(); n > 0; --n) {
        k = t.parent(n, k);
        hits += in_cut[n - 1][k];
      }
      CHECK(hits == 1);
    }
  }
}

TEST_CASE("content is monotone under subtree restriction") {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 40; ++trial) {
    LevelTree t = testutil::random_tree(rng, 4, 3, 80);
    Subtree full = Subtree::full(t);
    std::vector<uint8_t> mask(t.level_size(t.height()), 0);
    bool any = false;
    for (auto& v : mask)
      if (rng() % 2) {
        v = 1;
        any = true;
      }
    if (!any) mask[0] = 1;
    Subtree sub = Subtree::from_leaf_mask(t, mask);
    CHECK(tree_content(sub, 2.0, 0.8) <= tree_content(full, 2.0, 0.8) + 1e-12);
  }
}

TEST_CASE("fertile ancestors") {
  LevelTree k3 = full_kary(4, 3);
  Subtree sub = Subtree::full(k3);
  CHECK(fertile_ancestors(sub, {0, 0}, 2.0) == 0);  // the root has no ancestors
  CHECK(fertile_ancestors(sub, {4, 0}, 3.0) == 4);  // every ancestor is 3-fertile
  LevelTree p = path_tree(5);
  CHECK(fertile_ancestors(Subtree::full(p), {5, 0}, 2.0) == 0);
}

TEST_CASE("dichotomy split cases") {
  // full 16-ary tree with (r, g3, g4, g5) = (16, 0.5, 0.9, 1.0): case I with
  // ceil(16^0.5) = 4 children kept by symmetry
  LevelTree t = full_kary(3, 16);
  auto d = dichotomy_split(Subtree::full(t), 16.0, 0.5, 0.9, 1.0);
  CHECK(d.tag == DichotomyCase::kManyChildren);
  CHECK(d.children.size() == 4);

  // path tree: case II with the unique child
  LevelTree p = path_tree(3);
  auto d2 = dichotomy_split(Subtree::full(p), 16.0, 0.5, 0.9, 1.0);
  CHECK(d2.tag == DichotomyCase::kOneChild);
  REQUIRE(d2.children.size() == 1);

  // child bound violated
  LevelTree fat = full_kary(1, 20);
  CHECK_THROWS(dichotomy_split(Subtree::full(fat), 16.0, 0.5, 0.9, 1.0));
  // B <= 0
  CHECK_THROWS(dichotomy_split(Subtree::full(p), 2.0, 0.5, 0.9, 1.0));
}

TEST_CASE("dichotomy case predicate re-verified by direct content") {
  std::mt19937_64 rng(37);
  const double r = 16.0, g3 = 0.5, g4 = 0.9, g5 = 1.0;
  const double logr2 = std::log(2.0) / std::log(r);
  const double A = g5 - g4 + logr2, B = g4 - g3 - logr2;
  int case1 = 0, case2 = 0;
  for (int trial = 0; trial < 300; ++trial) {
    LevelTree t = testutil::random_tree(rng, 2, 4, 12);
    Subtree sub = Subtree::full(t);
    auto d = dichotomy_split(sub, r, g3, g4, g5);
    ContentTable table = tree_content_table(sub, r, g4);
    const double H = table.root();
    if (d.tag == DichotomyCase::kManyChildren) {
      ++case1;
      CHECK(d.children.size() >= size_t(std::ceil(std::pow(r, g3) - 1e-12)));
      for (uint32_t c : d.children)
        CHECK(table.induced(1, c) >= H * std::pow(r, -A) - 1e-12);
    } else {
      ++case2;
      REQUIRE(d.children.size() == 1);
      CHECK(table.induced(1, d.children[0]) >= H * std::pow(r, B) - 1e-12);
    }
  }
  CHECK(case1 > 0);
  CHECK(case2 > 0);
}

namespace {

// literal check of the fertile-ancestry inequality (both sides recomputed)
void check_regularity(const Subtree& reg, const Subtree& orig, double rbase,
                      double g3, double g4, double g5) {
  const LevelTree& base = reg.base();
  const double logr2 = std::log(2.0) / std::log(rbase);
  const double A = g5 - g4 + logr2, B = g4 - g3 - logr2;
  const double H = tree_content(orig, rbase, g4);
  const double c = std::pow(rbase, g3);
  for (int n = 0; n <= base.height(); ++n)
    for (uint32_t k = 0; k < base.level_size(n); ++k) {
      if (!reg.kept(n, k)) continue;
      const double lhs = double(fertile_ancestors(reg, {n, k}, c));
      const double rhs =
          (double(n) * B + std::log(H) / std::log(rbase)) / (A + B);
      CHECK(lhs >= rhs - 1e-9);
    }
}

}  // namespace

TEST_CASE("regular subtree satisfies the fertile-ancestry inequality") {
  const double r = 16.0, g3 = 0.5, g4 = 0.9, g5 = 1.0;
  // height-0 tree is its own regular subtree
  LevelTree t0 = LevelTree::from_parent_lists({{}});
  Subtree reg0 = regular_subtree(Subtree::full(t0), r, g3, g4, g5);
  CHECK(reg0.kept_node_count() == 1);

  // a path tree is returned unchanged
  LevelTree p = path_tree(5);
  Subtree regp = regular_subtree(Subtree::full(p), r, g3, g4, g5);
  CHECK(regp.kept_node_count() == p.node_count());
  check_regularity(regp, Subtree::full(p), r, g3, g4, g5);

  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 25; ++trial) {
    LevelTree t = testutil::random_tree(rng, 6, 16, 3000);
    Subtree full = Subtree::full(t);
    Subtree reg = regular_subtree(full, r, g3, g4, g5);
    check_regularity(reg, full, r, g3, g4, g5);
  }
}

TEST_CASE("thinning threshold closed forms") {
  // A = 0.35, B = 0.15 at (r, g3, g4, g5) = (16, 0.5, 0.9, 1.0)
  CHECK(thinning_threshold(0.8, 0.5, 0.9, 1.0, 16.0, 1.0) == 1);
  CHECK(thinning_threshold(0.8, 0.5, 0.9, 1.0, 16.0, std::pow(16.0, -2)) == 41);
  // precondition: B > (1-eps)(g5-g3)
  CHECK_THROWS(thinning_threshold(0.1, 0.5, 0.9, 1.0, 16.0, 1.0));
}

TEST_CASE("thinning threshold delivers fertile ancestry on random trees") {
  std::mt19937_64 rng(53);
  const double r = 16.0, g3 = 0.5, g4 = 0.9, g5 = 1.0, eps = 0.8;
  for (int trial = 0; trial < 30; ++trial) {
    LevelTree t = testutil::random_tree(rng, 6, 16, 4000);
    Subtree full = Subtree::full(t);
    const double V = tree_content(full, r, g4);
    const int64_t n0 = thinning_threshold(eps, g3, g4, g5, r, V);
    Subtree reg = regular_subtree(full, r, g3, g4, g5);
    const double c = std::pow(r, g3);
    for (int n = int(n0); n <= t.height(); ++n)
      for (uint32_t k = 0; k < t.level_size(n); ++k)
        if (reg.kept(n, k))
          CHECK(double(fertile_ancestors(reg, {n, k}, c)) >=
                (1 - eps) * double(n) - 1e-9);
  }
}

TEST_CASE("dichotomy holds on many random admissible trees") {
  std::mt19937_64 rng(61);
  const double r = 16.0, g3 = 0.5, g4 = 0.9, g5 = 1.0;
  for (int trial = 0; trial < 10000; ++trial) {
    LevelTree t = testutil::random_tree(rng, 2, 16, 40);
    CHECK_NOTHROW(dichotomy_split(Subtree::full(t), r, g3, g4, g5));
  }
}

TEST_CASE("flow measure") {
  LevelTree b = full_kary(4, 2);
  NodeMeasure m = flow_measure(Subtree::full(b));
  for (uint32_t k = 0; k < b.level_size(4); ++k)
    CHECK(m.node(4, k) == doctest::Approx(std::pow(2.0, -4)).epsilon(1e-15));

  LevelTree p = path_tree(3);
  NodeMeasure mp = flow_measure(Subtree::full(p));
  CHECK(mp.node(3, 0) == doctest::Approx(1.0).epsilon(1e-15));

  // 2 children at the root, then 3 on one branch: grandchild mass 1/6
  std::vector<std::vector<uint32_t>> parents(3);
  parents[1] = {0, 0};
  parents[2] = {0, 0, 0, 1};
  LevelTree mixed = LevelTree::from_parent_lists(std::move(parents));
  NodeMeasure mm = flow_measure(Subtree::full(mixed));
  CHECK(mm.node(2, 0) == doctest::Approx(1.0 / 6).epsilon(1e-15));

  // leaf restriction sums to 1
  std::mt19937_64 rng(71);
  for (int trial = 0; trial < 30; ++trial) {
    LevelTree t = testutil::random_tree(rng, 5, 4, 500);
    Subtree sub = Subtree::full(t);
    NodeMeasure nm = flow_measure(sub);
    double total = 0;
    for (double v : nm.leaf_masses(sub)) total += v;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("fertile ancestry bounds the flow") {
  std::mt19937_64 rng(79);
  for (int trial = 0; trial < 30; ++trial) {
    LevelTree t = testutil::random_tree(rng, 5, 5, 800);
    Subtree sub = Subtree::full(t);
    NodeMeasure nm = flow_measure(sub);
    const double c = 2.0, eps = 0.5;
    // when a node has (c, 1-eps)-fertile ancestry, nu <= c^-(1-eps)n
    for (int n = 1; n <= t.height(); ++n)
      for (uint32_t k = 0; k < t.level_size(n); ++k) {
        if (double(fertile_ancestors(sub, {n, k}, c)) >= (1 - eps) * n) {
          CHECK(nm.node(n, k) <= std::pow(c, -(1 - eps) * n) * (1 + 1e-9));
        }
      }
  }
}

TEST_CASE("dot output") {
  LevelTree b = full_kary(2, 2);
  std::string dot = to_dot(Subtree::full(b));
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("\"0_0\" -> \"1_1\"") != std::string::npos);
}
