#include "sumdim/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace sumdim {

namespace {
constexpr double kTol = 1e-12;

size_t ceil_count(double x) {
  return static_cast<size_t>(std::ceil(x - kTol));
}
}  // namespace

LevelTree LevelTree::from_parent_lists(std::vector<std::vector<uint32_t>> parents) {
  if (parents.empty() || !parents[0].empty())
    throw std::invalid_argument("LevelTree: parents[0] must exist and be empty");
  LevelTree t;
  t.parents_ = std::move(parents);
  const int N = t.height();
  t.child_begin_.resize(N);
  for (int n = 0; n < N; ++n) {
    const size_t up = t.level_size(n);
    const auto& par = t.parents_[n + 1];
    if (par.empty()) throw std::invalid_argument("LevelTree: empty level above a non-leaf");
    std::vector<uint32_t> begin(up + 1, 0);
    uint32_t prev = 0;
    for (size_t k = 0; k < par.size(); ++k) {
      if (par[k] >= up) throw std::invalid_argument("LevelTree: parent index out of range");
      if (par[k] < prev) throw std::invalid_argument("LevelTree: parents must be grouped");
      prev = par[k];
      begin[par[k] + 1]++;
    }
    for (size_t k = 0; k < up; ++k) {
      if (begin[k + 1] == 0)
        throw std::invalid_argument("LevelTree: node without children at level " +
                                    std::to_string(n));
      begin[k + 1] += begin[k];
    }
    t.child_begin_[n] = std::move(begin);
  }
  return t;
}

size_t LevelTree::node_count() const {
  size_t total = 0;
  for (int n = 0; n <= height(); ++n) total += level_size(n);
  return total;
}

void LevelTree::attach_payload(std::vector<std::vector<IndexPair>> payload) {
  if (static_cast<int>(payload.size()) != height() + 1)
    throw std::invalid_argument("payload level count mismatch");
  for (int n = 0; n <= height(); ++n)
    if (payload[n].size() != level_size(n))
      throw std::invalid_argument("payload size mismatch at level " + std::to_string(n));
  payload_ = std::move(payload);
}

Subtree Subtree::full(const LevelTree& base) {
  Subtree s;
  s.base_ = &base;
  s.keep_.resize(base.height() + 1);
  for (int n = 0; n <= base.height(); ++n)
    s.keep_[n].assign(base.level_size(n), 1);
  return s;
}

Subtree Subtree::from_leaf_mask(const LevelTree& base, std::vector<uint8_t> leaf_keep) {
  const int N = base.height();
  if (leaf_keep.size() != base.level_size(N))
    throw std::invalid_argument("leaf mask size mismatch");
  Subtree s;
  s.base_ = &base;
  s.keep_.resize(N + 1);
  s.keep_[N] = std::move(leaf_keep);
  bool any = false;
  for (uint8_t v : s.keep_[N]) any |= (v != 0);
  if (!any) throw std::invalid_argument("subtree must keep at least one leaf");
  for (int n = N - 1; n >= 0; --n) {
    s.keep_[n].assign(base.level_size(n), 0);
    const auto& par = s.keep_[n + 1];
    for (uint32_t k = 0; k < par.size(); ++k)
      if (par[k]) s.keep_[n][base.parent(n + 1, k)] = 1;
  }
  return s;
}

size_t Subtree::kept_count(int n) const {
  return std::count(keep_[n].begin(), keep_[n].end(), uint8_t(1));
}

size_t Subtree::kept_node_count() const {
  size_t total = 0;
  for (int n = 0; n <= height(); ++n) total += kept_count(n);
  return total;
}

uint32_t Subtree::kept_child_count(int n, uint32_t k) const {
  auto [b, e] = base_->children(n, k);
  uint32_t cnt = 0;
  for (uint32_t c = b; c < e; ++c) cnt += keep_[n + 1][c];
  return cnt;
}

std::vector<uint32_t> Subtree::kept_leaves() const {
  std::vector<uint32_t> out;
  const auto& mask = keep_[height()];
  for (uint32_t k = 0; k < mask.size(); ++k)
    if (mask[k]) out.push_back(k);
  return out;
}

double ContentTable::induced(int n, uint32_t k) const {
  return value(n, k) * std::pow(rbase, double(n) * gamma);
}

ContentTable tree_content_table(const Subtree& sub, double rbase, double gamma) {
  if (rbase < 2 || gamma <= 0)
    throw std::invalid_argument("tree_content: need rbase >= 2, gamma > 0");
  const LevelTree& base = sub.base();
  const int N = base.height();
  ContentTable table;
  table.rbase = rbase;
  table.gamma = gamma;
  table.height = N;
  table.leaf_value = std::pow(rbase, -double(N) * gamma);
  table.values.resize(std::max(N, 1));
  if (N == 0) {
    table.values[0].assign(1, 1.0);  // a height-0 tree: the root cut costs 1
    return table;
  }
  for (int n = N - 1; n >= 0; --n) {
    const double node_cost = std::pow(rbase, -double(n) * gamma);
    table.values[n].assign(base.level_size(n), 0.0);
    const std::vector<double>* below = (n + 1 < N) ? &table.values[n + 1] : nullptr;
    const auto& mask_below = sub.level_mask(n + 1);
    for (uint32_t k = 0; k < base.level_size(n); ++k) {
      if (!sub.kept(n, k)) continue;
      auto [b, e] = base.children(n, k);
      double sum = 0;
      for (uint32_t c = b; c < e; ++c) {
        if (!mask_below[c]) continue;
        sum += below ? (*below)[c] : table.leaf_value;
      }
      table.values[n][k] = std::min(node_cost, sum);
    }
  }
  return table;
}

double tree_content(const Subtree& sub, double rbase, double gamma) {
  return tree_content_table(sub, rbase, gamma).root();
}

std::vector<NodeId> minimal_cut(const Subtree& sub, double rbase, double gamma) {
  ContentTable table = tree_content_table(sub, rbase, gamma);
  const LevelTree& base = sub.base();
  const int N = base.height();
  std::vector<NodeId> cut;
  std::vector<NodeId> stack{{0, 0}};
  while (!stack.empty()) {
    NodeId node = stack.back();
    stack.pop_back();
    const double node_cost = std::pow(rbase, -double(node.level) * gamma);
    if (node.level == N || node_cost <= table.value(node.level, node.index) + kTol) {
      cut.push_back(node);
      continue;
    }
    auto [b, e] = base.children(node.level, node.index);
    for (uint32_t c = e; c-- > b;)
      if (sub.kept(node.level + 1, c)) stack.push_back({node.level + 1, c});
  }
  return cut;
}

int fertile_ancestors(const Subtree& sub, NodeId node, double c) {
  const LevelTree& base = sub.base();
  int count = 0;
  int n = node.level;
  uint32_t k = node.index;
  while (n > 0) {
    k = base.parent(n, k);
    --n;
    if (double(sub.kept_child_count(n, k)) >= c - kTol) ++count;
  }
  return count;
}

namespace {

struct DichotomyParams {
  double A = 0;
  double B = 0;
  size_t many = 0;  // ceil(r^gamma3)
  double child_cap = 0;  // r^gamma5
};

DichotomyParams dichotomy_params(double rbase, double gamma3, double gamma4,
                                 double gamma5) {
  DichotomyParams p;
  const double logr2 = std::log(2.0) / std::log(rbase);
  p.A = gamma5 - gamma4 + logr2;
  p.B = gamma4 - gamma3 - logr2;
  if (!(p.B > 0))
    throw std::invalid_argument("dichotomy: gamma4 - gamma3 - log_r 2 must be > 0");
  p.many = ceil_count(std::pow(rbase, gamma3));
  p.child_cap = std::pow(rbase, gamma5);
  return p;
}

// Selects `quota` children from `ranked` (sorted by content desc). Whole tie
// classes are taken while they fit; the boundary class contributes evenly
// spaced members so uniform trees keep a spatially spread selection.
std::vector<uint32_t> select_quota(
    const std::vector<std::pair<double, uint32_t>>& ranked, size_t quota) {
  std::vector<uint32_t> out;
  out.reserve(quota);
  size_t k = 0;
  while (k < ranked.size() && out.size() < quota) {
    size_t e = k;
    while (e < ranked.size() && ranked[e].first >= ranked[k].first - kTol) ++e;
    const size_t class_size = e - k;
    const size_t need = quota - out.size();
    if (class_size <= need) {
      for (size_t j = k; j < e; ++j) out.push_back(ranked[j].second);
    } else {
      for (size_t j = 0; j < need; ++j) {
        size_t pick = (need == 1) ? 0 : (j * (class_size - 1)) / (need - 1);
        out.push_back(ranked[k + pick].second);
      }
    }
    k = e;
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

DichotomyResult dichotomy_split_at(const Subtree& sub, const ContentTable& table,
                                   NodeId node, double gamma3, double gamma4,
                                   double gamma5) {
  const LevelTree& base = sub.base();
  const DichotomyParams p = dichotomy_params(table.rbase, gamma3, gamma4, gamma5);
  auto [b, e] = base.children(node.level, node.index);
  std::vector<std::pair<double, uint32_t>> ranked;  // (induced content, index)
  for (uint32_t c = b; c < e; ++c)
    if (sub.kept(node.level + 1, c))
      ranked.emplace_back(table.induced(node.level + 1, c), c);
  if (double(ranked.size()) > p.child_cap * (1 + kTol) + kTol)
    throw std::invalid_argument("dichotomy: child bound r^gamma5 violated (" +
                                std::to_string(ranked.size()) + " children)");
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& l, const auto& r) { return l.first > r.first; });
  const double H = table.induced(node.level, node.index);
  DichotomyResult res;
  // Case I: at least ceil(r^gamma3) children above H * r^-A.
  const double thresh1 = H * std::pow(table.rbase, -p.A);
  size_t qualifying = 0;
  while (qualifying < ranked.size() && ranked[qualifying].first >= thresh1 - kTol)
    ++qualifying;
  if (qualifying >= p.many) {
    res.tag = DichotomyCase::kManyChildren;
    std::vector<std::pair<double, uint32_t>> pool(ranked.begin(),
                                                  ranked.begin() + qualifying);
    res.children = select_quota(pool, p.many);
    return res;
  }
  // Case II: one child above H * r^B.
  const double thresh2 = H * std::pow(table.rbase, p.B);
  if (!ranked.empty() && ranked.front().first >= thresh2 - kTol) {
    res.tag = DichotomyCase::kOneChild;
    res.children = {ranked.front().second};
    return res;
  }
  throw std::logic_error("dichotomy: neither case holds (content DP bug)");
}

DichotomyResult dichotomy_split(const Subtree& sub, double rbase, double gamma3,
                                double gamma4, double gamma5) {
  ContentTable table = tree_content_table(sub, rbase, gamma4);
  return dichotomy_split_at(sub, table, {0, 0}, gamma3, gamma4, gamma5);
}

Subtree regular_subtree(const Subtree& sub, double rbase, double gamma3,
                        double gamma4, double gamma5) {
  const LevelTree& base = sub.base();
  const int N = base.height();
  const DichotomyParams p = dichotomy_params(rbase, gamma3, gamma4, gamma5);
  // child bound must hold everywhere before the recursion starts
  for (int n = 0; n < N; ++n)
    for (uint32_t k = 0; k < base.level_size(n); ++k)
      if (sub.kept(n, k) &&
          double(sub.kept_child_count(n, k)) > p.child_cap * (1 + kTol) + kTol)
        throw std::invalid_argument("regular_subtree: child bound violated at level " +
                                    std::to_string(n));
  ContentTable table = tree_content_table(sub, rbase, gamma4);

  std::vector<std::vector<uint8_t>> keep(N + 1);
  for (int n = 0; n <= N; ++n) keep[n].assign(base.level_size(n), 0);
  keep[0][0] = 1;
  std::vector<NodeId> stack{{0, 0}};
  while (!stack.empty()) {
    NodeId node = stack.back();
    stack.pop_back();
    if (node.level == N) continue;
    DichotomyResult d = dichotomy_split_at(sub, table, node, gamma3, gamma4, gamma5);
    for (uint32_t c : d.children) {
      keep[node.level + 1][c] = 1;
      stack.push_back({node.level + 1, c});
    }
  }
  return Subtree::from_leaf_mask(base, std::move(keep[N]));
}

int64_t thinning_threshold(double eps, double gamma3, double gamma4,
                           double gamma5, double rbase, double V) {
  if (V <= 0) throw std::invalid_argument("thinning_threshold: V must be > 0");
  const double logr2 = std::log(2.0) / std::log(rbase);
  const double A = gamma5 - gamma4 + logr2;
  const double B = gamma4 - gamma3 - logr2;
  if (!(B > (1 - eps) * (gamma5 - gamma3) + kTol))
    throw std::invalid_argument("thinning_threshold: base too small for eps ladder");
  const double logV = std::log(V) / std::log(rbase);
  auto holds = [&](int64_t n) {
    return (double(n) * B + logV) / (double(n) * (A + B)) > (1 - eps) + kTol;
  };
  // coefficient B - (1-eps)(A+B) is positive, so the condition is monotone;
  // start from the closed-form crossing and settle the strict boundary
  const double coef = B - (1 - eps) * (A + B);
  int64_t guess = std::max<int64_t>(1, static_cast<int64_t>(std::floor(-logV / coef)) - 2);
  int64_t n0 = guess;
  while (!holds(n0)) ++n0;
  while (n0 > 1 && holds(n0 - 1)) --n0;
  for (int64_t n = n0; n < n0 + 64; ++n)
    if (!holds(n)) throw std::logic_error("thinning_threshold: monotonicity failed");
  return n0;
}

NodeMeasure flow_measure(const Subtree& sub) {
  const LevelTree& base = sub.base();
  const int N = base.height();
  NodeMeasure m;
  m.mass.resize(N + 1);
  for (int n = 0; n <= N; ++n) m.mass[n].assign(base.level_size(n), 0.0);
  m.mass[0][0] = 1.0;
  for (int n = 0; n < N; ++n) {
    for (uint32_t k = 0; k < base.level_size(n); ++k) {
      if (!sub.kept(n, k) || m.mass[n][k] == 0) continue;
      const uint32_t cnt = sub.kept_child_count(n, k);
      const double share = m.mass[n][k] / double(cnt);
      auto [b, e] = base.children(n, k);
      for (uint32_t c = b; c < e; ++c)
        if (sub.kept(n + 1, c)) m.mass[n + 1][c] = share;
    }
  }
  return m;
}

std::vector<double> NodeMeasure::leaf_masses(const Subtree& sub) const {
  std::vector<double> out;
  for (uint32_t k : sub.kept_leaves()) out.push_back(mass[sub.height()][k]);
  return out;
}

std::string to_dot(const Subtree& sub) {
  const LevelTree& base = sub.base();
  if (sub.kept_node_count() > 500)
    throw std::invalid_argument("to_dot: tree too large (> 500 nodes)");
  std::ostringstream os;
  os << "digraph tree {\n  rankdir=TB;\n";
  for (int n = 1; n <= base.height(); ++n)
    for (uint32_t k = 0; k < base.level_size(n); ++k)
      if (sub.kept(n, k))
        os << "  \"" << (n - 1) << "_" << base.parent(n, k) << "\" -> \"" << n
           << "_" << k << "\";\n";
  os << "}\n";
  return os.str();
}

}  // namespace sumdim
