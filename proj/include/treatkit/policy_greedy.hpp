#pragma once

#include <numeric>
#include <span>
#include <vector>

#include "treatkit/data.hpp"
#include "treatkit/split_engine.hpp"
#include "treatkit/tree.hpp"

namespace treatkit {

struct GreedyPolicyConfig {
  int max_depth = 2;
  std::size_t min_leaf = 1;
  std::size_t threshold_cap = 256;
};

namespace detail {

// Per-arm value sums; a segment is worth the best single arm's sum. A split
// is eligible only when the children's best sums strictly beat the parent's.
struct ArmValueCriterion {
  const Matrix& values;  // N x (K+1) scalarized per-arm values

  struct Stats {
    std::size_t n = 0;
    std::vector<double> arm_sums;
  };

  static double best_value(const Stats& s) {
    double best = s.arm_sums[0];
    for (std::size_t a = 1; a < s.arm_sums.size(); ++a)
      if (s.arm_sums[a] > best) best = s.arm_sums[a];
    return best;
  }
  static int best_arm(const Stats& s) {
    int best = 0;
    for (std::size_t a = 1; a < s.arm_sums.size(); ++a)
      if (s.arm_sums[a] > s.arm_sums[static_cast<std::size_t>(best)])
        best = static_cast<int>(a);
    return best;
  }

  Stats empty() const { return {0, std::vector<double>(values.cols(), 0.0)}; }
  void add(Stats& s, std::size_t row) const {
    s.n += 1;
    for (std::size_t a = 0; a < values.cols(); ++a) s.arm_sums[a] += values(row, a);
  }
  Stats subtract(const Stats& parent, const Stats& left) const {
    Stats r{parent.n - left.n, parent.arm_sums};
    for (std::size_t a = 0; a < r.arm_sums.size(); ++a) r.arm_sums[a] -= left.arm_sums[a];
    return r;
  }
  std::optional<double> split_score(const Stats& l, const Stats& r, const Stats& p) const {
    const double combined = best_value(l) + best_value(r);
    if (!(combined > best_value(p))) return std::nullopt;
    return combined;
  }
};

}  // namespace detail

// Greedy policy search over a scalarized per-arm value matrix; each leaf is
// labeled with the arm whose value sum is largest there (ties to the lowest
// arm index).
inline PolicyTree greedy_tree_search_values(const Matrix& X, const Matrix& arm_values,
                                            const GreedyPolicyConfig& cfg) {
  if (arm_values.rows() != X.rows())
    throw DimensionError("greedy search: value rows " + std::to_string(arm_values.rows()) +
                         " != feature rows " + std::to_string(X.rows()));
  if (X.rows() == 0) throw ValidationError("greedy search: empty table");
  if (cfg.max_depth < 0) throw ConfigError("greedy search: max_depth must be >= 0");

  detail::ArmValueCriterion crit{arm_values};
  SplitLimits lim{cfg.max_depth, cfg.min_leaf, cfg.threshold_cap};
  std::vector<std::size_t> rows(X.rows());
  std::iota(rows.begin(), rows.end(), 0);
  auto grown = grow_breadth_first(X, std::move(rows), lim, crit);
  return finalize_tree<PolicyTree>(grown, [&](const std::vector<std::size_t>& rs) {
    auto stats = crit.empty();
    for (std::size_t r : rs) crit.add(stats, r);
    return PolicyLeaf{detail::ArmValueCriterion::best_arm(stats)};
  });
}

inline PolicyTree greedy_tree_search(const ExperimentTable& table,
                                     const PotentialPredictionMatrix& preds,
                                     const ScalarizationWeights& weights,
                                     const GreedyPolicyConfig& cfg) {
  table.validate();
  preds.validate();
  if (preds.n_rows() != table.n_rows())
    throw DimensionError("greedy search: prediction rows " + std::to_string(preds.n_rows()) +
                         " != table rows " + std::to_string(table.n_rows()));
  return greedy_tree_search_values(table.features, scalarize_predictions(preds, weights), cfg);
}

struct DistillPolicyConfig {
  int max_depth = 3;
  std::size_t min_leaf = 1;
  std::size_t threshold_cap = 256;
};

namespace detail {

// Gini impurity decrease over arm labels, scaled by node size: a node's
// weighted impurity is n - sum_c count_c^2 / n.
struct GiniCriterion {
  std::span<const int> labels;
  std::size_t n_classes;

  struct Stats {
    std::size_t n = 0;
    std::vector<std::size_t> counts;
  };

  static double weighted_impurity(const Stats& s) {
    double sq = 0.0;
    for (std::size_t c : s.counts) sq += static_cast<double>(c) * static_cast<double>(c);
    return static_cast<double>(s.n) - sq / static_cast<double>(s.n);
  }
  static int majority(const Stats& s) {
    int best = 0;
    for (std::size_t c = 1; c < s.counts.size(); ++c)
      if (s.counts[c] > s.counts[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
    return best;
  }

  Stats empty() const { return {0, std::vector<std::size_t>(n_classes, 0)}; }
  void add(Stats& s, std::size_t row) const {
    s.n += 1;
    s.counts[static_cast<std::size_t>(labels[row])] += 1;
  }
  Stats subtract(const Stats& parent, const Stats& left) const {
    Stats r{parent.n - left.n, parent.counts};
    for (std::size_t c = 0; c < r.counts.size(); ++c) r.counts[c] -= left.counts[c];
    return r;
  }
  std::optional<double> split_score(const Stats& l, const Stats& r, const Stats& p) const {
    const double gain = weighted_impurity(p) - weighted_impurity(l) - weighted_impurity(r);
    if (!(gain > 0.0)) return std::nullopt;
    return gain;
  }
};

}  // namespace detail

// CART classification tree on prediction-implied arm labels; each leaf assigns
// its majority arm (ties to the lowest index).
inline PolicyTree distill_policy(const ExperimentTable& table, std::span<const int> labels,
                                 const DistillPolicyConfig& cfg) {
  table.validate();
  if (labels.size() != table.n_rows())
    throw DimensionError("distill policy: label length " + std::to_string(labels.size()) +
                         " != table rows " + std::to_string(table.n_rows()));
  if (cfg.max_depth < 0) throw ConfigError("distill policy: max_depth must be >= 0");
  int max_label = 0;
  for (int l : labels) {
    if (l < 0) throw ValidationError("distill policy: negative arm label");
    max_label = std::max(max_label, l);
  }

  detail::GiniCriterion crit{labels, static_cast<std::size_t>(max_label) + 1};
  SplitLimits lim{cfg.max_depth, cfg.min_leaf, cfg.threshold_cap};
  std::vector<std::size_t> rows(table.n_rows());
  std::iota(rows.begin(), rows.end(), 0);
  auto grown = grow_breadth_first(table.features, std::move(rows), lim, crit);
  return finalize_tree<PolicyTree>(grown, [&](const std::vector<std::size_t>& rs) {
    auto stats = crit.empty();
    for (std::size_t r : rs) crit.add(stats, r);
    return PolicyLeaf{detail::GiniCriterion::majority(stats)};
  });
}

}  // namespace treatkit
