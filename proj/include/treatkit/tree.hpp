#pragma once

#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "treatkit/data.hpp"
#include "treatkit/errors.hpp"
#include "treatkit/numeric.hpp"

namespace treatkit {

// Leaf of a treatment-assignment tree.
struct PolicyLeaf {
  int arm = 0;
};

// Leaf of an effect-explanation tree: per-outcome effect estimates with
// confidence bounds, plus estimation-half arm counts.
struct ExplanationLeaf {
  std::vector<double> effects;
  std::vector<double> ci_low;
  std::vector<double> ci_high;
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
  std::size_t n_estimation = 0;
  bool pruned = false;
};

// Leaf of a guidance tree: index of a constituent policy.
struct GuidanceLeaf {
  int policy = 0;
};

// Binary axis-aligned tree. Routing is strict: x[feature] < threshold goes
// left, ties go right. nodes[0] is the root.
template <typename LeafT>
struct Tree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    LeafT leaf{};

    bool is_leaf() const { return feature < 0; }
  };

  std::vector<Node> nodes;

  static Tree single_leaf(LeafT leaf) {
    Tree t;
    t.nodes.push_back(Node{-1, 0.0, -1, -1, std::move(leaf)});
    return t;
  }

  bool empty() const { return nodes.empty(); }

  int leaf_index_for(std::span<const double> x) const {
    int idx = 0;
    while (!nodes[idx].is_leaf()) {
      const auto& n = nodes[idx];
      idx = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    }
    return idx;
  }

  const LeafT& leaf_for(std::span<const double> x) const {
    return nodes[leaf_index_for(x)].leaf;
  }

  int depth() const { return depth_below(0); }

  std::size_t leaf_count() const {
    std::size_t c = 0;
    for (const auto& n : nodes)
      if (n.is_leaf()) ++c;
    return c;
  }

  // Largest feature index referenced by any internal node, or -1.
  int max_feature_index() const {
    int m = -1;
    for (const auto& n : nodes)
      if (!n.is_leaf() && n.feature > m) m = n.feature;
    return m;
  }

 private:
  int depth_below(int idx) const {
    const auto& n = nodes[idx];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_below(n.left), depth_below(n.right));
  }
};

using PolicyTree = Tree<PolicyLeaf>;
using ExplanationTree = Tree<ExplanationLeaf>;

inline int apply_policy(const PolicyTree& policy, std::span<const double> x) {
  return policy.leaf_for(x).arm;
}

// Uniform entry point for anything usable as a policy: trees, rule lists,
// guidance ensembles, or plain callables in tests.
inline int policy_assign(const PolicyTree& policy, std::span<const double> x) {
  return apply_policy(policy, x);
}

template <typename F>
  requires std::is_invocable_r_v<int, const F&, std::span<const double>>
int policy_assign(const F& fn, std::span<const double> x) {
  return fn(x);
}

enum class CmpOp { Lt, Ge };

struct Clause {
  int feature = 0;
  CmpOp op = CmpOp::Lt;
  double threshold = 0.0;
};

// Conjunction of clauses describing one root-to-leaf path.
struct Predicate {
  std::vector<Clause> clauses;

  bool matches(std::span<const double> x) const {
    for (const auto& c : clauses) {
      const double v = x[static_cast<std::size_t>(c.feature)];
      if (c.op == CmpOp::Lt ? !(v < c.threshold) : !(v >= c.threshold)) return false;
    }
    return true;
  }

  // Rendered with per-feature bounds merged into ranges.
  std::string to_string(const std::vector<std::string>& feature_names) const {
    if (clauses.empty()) return "(all rows)";
    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<int> order;
    std::vector<double> lo(feature_names.size(), -inf), hi(feature_names.size(), inf);
    for (const auto& c : clauses) {
      const auto f = static_cast<std::size_t>(c.feature);
      if (lo[f] == -inf && hi[f] == inf) order.push_back(c.feature);
      if (c.op == CmpOp::Ge)
        lo[f] = std::max(lo[f], c.threshold);
      else
        hi[f] = std::min(hi[f], c.threshold);
    }
    std::string out;
    for (int f : order) {
      if (!out.empty()) out += " and ";
      const auto& name = feature_names[static_cast<std::size_t>(f)];
      const auto fi = static_cast<std::size_t>(f);
      if (lo[fi] != -inf && hi[fi] != inf)
        out += format_double(lo[fi]) + " <= " + name + " < " + format_double(hi[fi]);
      else if (lo[fi] != -inf)
        out += name + " >= " + format_double(lo[fi]);
      else
        out += name + " < " + format_double(hi[fi]);
    }
    return out;
  }
};

// Per-arm observed statistics inside a segment.
struct ArmStat {
  std::size_t count = 0;
  double mean_outcome = 0.0;  // scalarized; 0 when count == 0
};

// Rows reached by one leaf, the path predicate, and per-arm outcome means.
struct Segment {
  std::vector<std::size_t> rows;
  Predicate predicate;
  std::vector<ArmStat> arm_stats;  // indexed by arm
  int leaf_node = -1;              // node index in the source tree
};

// One segment per leaf, in left-to-right leaf order; segments partition the
// table's rows.
template <typename LeafT>
std::vector<Segment> unroll_tree(const Tree<LeafT>& tree, const ExperimentTable& table,
                                 const ScalarizationWeights& weights) {
  if (tree.empty()) throw DimensionError("unroll: empty tree");
  if (tree.max_feature_index() >= static_cast<int>(table.n_features()))
    throw DimensionError("unroll: tree uses feature " +
                         std::to_string(tree.max_feature_index()) + " but table has " +
                         std::to_string(table.n_features()) + " features");

  // Leaves in depth-first order, each with its path predicate.
  std::vector<Segment> segments;
  std::vector<int> leaf_slot(tree.nodes.size(), -1);
  struct Frame {
    int node;
    Predicate path;
  };
  std::vector<Frame> stack{{0, {}}};
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    const auto& n = tree.nodes[static_cast<std::size_t>(f.node)];
    if (n.is_leaf()) {
      leaf_slot[static_cast<std::size_t>(f.node)] = static_cast<int>(segments.size());
      Segment s;
      s.predicate = std::move(f.path);
      s.leaf_node = f.node;
      segments.push_back(std::move(s));
      continue;
    }
    Predicate right = f.path;
    right.clauses.push_back({n.feature, CmpOp::Ge, n.threshold});
    Predicate left = std::move(f.path);
    left.clauses.push_back({n.feature, CmpOp::Lt, n.threshold});
    stack.push_back({n.right, std::move(right)});
    stack.push_back({n.left, std::move(left)});
  }

  const int arms = table.max_arm() + 1;
  std::vector<std::vector<double>> sums(segments.size(),
                                        std::vector<double>(static_cast<std::size_t>(arms), 0.0));
  for (auto& s : segments) s.arm_stats.assign(static_cast<std::size_t>(arms), ArmStat{});
  for (std::size_t i = 0; i < table.n_rows(); ++i) {
    const int leaf = tree.leaf_index_for(table.features.row(i));
    auto& seg = segments[static_cast<std::size_t>(leaf_slot[static_cast<std::size_t>(leaf)])];
    seg.rows.push_back(i);
    const auto arm = static_cast<std::size_t>(table.treatment[i]);
    seg.arm_stats[arm].count += 1;
    sums[static_cast<std::size_t>(leaf_slot[static_cast<std::size_t>(leaf)])][arm] +=
        scalarize(table.outcomes.row(i), weights);
  }
  for (std::size_t s = 0; s < segments.size(); ++s)
    for (std::size_t a = 0; a < segments[s].arm_stats.size(); ++a)
      if (segments[s].arm_stats[a].count > 0)
        segments[s].arm_stats[a].mean_outcome =
            sums[s][a] / static_cast<double>(segments[s].arm_stats[a].count);
  return segments;
}

template <typename LeafT>
std::vector<Segment> unroll_tree(const Tree<LeafT>& tree, const ExperimentTable& table) {
  return unroll_tree(tree, table, ScalarizationWeights::ones(table.n_outcomes()));
}

}  // namespace treatkit
