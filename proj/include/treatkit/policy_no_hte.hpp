#pragma once

#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "treatkit/data.hpp"
#include "treatkit/split_engine.hpp"
#include "treatkit/tree.hpp"

namespace treatkit {

// Difference of scalarized-outcome means, arm j minus control, within a
// segment. Empty intersection with either group is an ineligible-arm signal.
inline std::optional<double> segment_ate(const ExperimentTable& table,
                                         std::span<const std::size_t> rows, int arm,
                                         const ScalarizationWeights& weights) {
  if (arm < 0 || arm > table.max_arm())
    throw ConfigError("segment_ate: arm " + std::to_string(arm) + " out of range");
  std::size_t n_arm = 0, n_ctl = 0;
  double sum_arm = 0.0, sum_ctl = 0.0;
  for (std::size_t r : rows) {
    const double y = scalarize(table.outcomes.row(r), weights);
    if (table.treatment[r] == arm) {
      ++n_arm;
      sum_arm += y;
    }
    if (table.treatment[r] == 0) {
      ++n_ctl;
      sum_ctl += y;
    }
  }
  if (n_arm == 0 || n_ctl == 0) return std::nullopt;
  return sum_arm / static_cast<double>(n_arm) - sum_ctl / static_cast<double>(n_ctl);
}

// Per-arm average treatment effects of one segment; arms without both a
// treated and a control presence are flagged ineligible and skipped by the
// metric.
struct SegmentAte {
  std::vector<double> per_arm;  // A_j, zero when ineligible
  std::vector<bool> eligible;
  bool metric_defined = false;
  double metric = 0.0;  // max over eligible arms
  int best_arm = 0;     // argmax over eligible arms, ties to the lowest index
};

namespace detail {

struct ArmAggregate {
  std::vector<std::size_t> counts;
  std::vector<double> sums;  // scalarized outcome sums
};

inline SegmentAte segment_ate_from_aggregate(const ArmAggregate& agg, std::size_t floor) {
  const std::size_t arms = agg.counts.size();
  SegmentAte out;
  out.per_arm.assign(arms, 0.0);
  out.eligible.assign(arms, false);
  for (std::size_t j = 0; j < arms; ++j) {
    if (agg.counts[j] < floor || agg.counts[0] < floor) continue;
    out.eligible[j] = true;
    out.per_arm[j] = agg.sums[j] / static_cast<double>(agg.counts[j]) -
                     agg.sums[0] / static_cast<double>(agg.counts[0]);
    if (!out.metric_defined || out.per_arm[j] > out.metric) {
      out.metric_defined = true;
      out.metric = out.per_arm[j];
      out.best_arm = static_cast<int>(j);
    }
  }
  return out;
}

// Split criterion on segment ATEs. The greedy rule demands both children
// improve on the parent and ranks by the worse child; the relaxed rule
// demands one improving child and ranks by the better one.
struct SegmentAteCriterion {
  std::span<const int> treatment;
  std::span<const double> scalar_y;
  std::size_t arms;
  std::size_t min_arm_per_child;
  bool relaxed = false;

  struct Stats {
    std::size_t n = 0;
    ArmAggregate agg;
  };

  Stats empty() const {
    return {0, {std::vector<std::size_t>(arms, 0), std::vector<double>(arms, 0.0)}};
  }
  void add(Stats& s, std::size_t row) const {
    s.n += 1;
    const auto a = static_cast<std::size_t>(treatment[row]);
    s.agg.counts[a] += 1;
    s.agg.sums[a] += scalar_y[row];
  }
  Stats subtract(const Stats& parent, const Stats& left) const {
    Stats r{parent.n - left.n, parent.agg};
    for (std::size_t a = 0; a < arms; ++a) {
      r.agg.counts[a] -= left.agg.counts[a];
      r.agg.sums[a] -= left.agg.sums[a];
    }
    return r;
  }
  std::optional<double> split_score(const Stats& l, const Stats& r, const Stats& p) const {
    const auto al = segment_ate_from_aggregate(l.agg, min_arm_per_child);
    const auto ar = segment_ate_from_aggregate(r.agg, min_arm_per_child);
    const auto ap = segment_ate_from_aggregate(p.agg, min_arm_per_child);
    if (!ap.metric_defined) return std::nullopt;
    if (relaxed) {
      if (!al.metric_defined && !ar.metric_defined) return std::nullopt;
      double best;
      if (al.metric_defined && ar.metric_defined)
        best = std::max(al.metric, ar.metric);
      else
        best = al.metric_defined ? al.metric : ar.metric;
      if (!(best > ap.metric)) return std::nullopt;
      return best;
    }
    if (!al.metric_defined || !ar.metric_defined) return std::nullopt;
    const double worst = std::min(al.metric, ar.metric);
    if (!(worst > ap.metric)) return std::nullopt;
    return worst;
  }
};

inline ArmAggregate aggregate_rows(const ExperimentTable& table, std::span<const double> scalar_y,
                                   std::span<const std::size_t> rows, std::size_t arms) {
  ArmAggregate agg{std::vector<std::size_t>(arms, 0), std::vector<double>(arms, 0.0)};
  for (std::size_t r : rows) {
    const auto a = static_cast<std::size_t>(table.treatment[r]);
    agg.counts[a] += 1;
    agg.sums[a] += scalar_y[r];
  }
  return agg;
}

// Leaves of a grown structure in left-to-right order, with path predicates.
inline std::vector<std::pair<std::size_t, Predicate>> grown_leaves(
    const std::vector<GrowthNode>& grown) {
  std::vector<std::pair<std::size_t, Predicate>> leaves;
  struct Frame {
    std::size_t node;
    Predicate path;
  };
  std::vector<Frame> stack{{0, {}}};
  while (!stack.empty()) {
    Frame f = std::move(stack.back());
    stack.pop_back();
    const auto& n = grown[f.node];
    if (n.feature < 0) {
      leaves.emplace_back(f.node, std::move(f.path));
      continue;
    }
    Predicate right = f.path;
    right.clauses.push_back({n.feature, CmpOp::Ge, n.threshold});
    Predicate left = std::move(f.path);
    left.clauses.push_back({n.feature, CmpOp::Lt, n.threshold});
    stack.push_back({static_cast<std::size_t>(n.right), std::move(right)});
    stack.push_back({static_cast<std::size_t>(n.left), std::move(left)});
  }
  return leaves;
}

}  // namespace detail

struct NoHteConfig {
  int max_depth = 2;
  std::size_t min_arm_per_child = 25;  // per-arm floor for the split metric
  int iterations = 1;                  // iterative variant only
  int default_arm = 0;                 // iterative variant: arm for unmatched rows
  std::size_t threshold_cap = 256;
};

struct NoHteGreedyFit {
  PolicyTree policy;
  std::vector<Segment> segments;
  std::vector<SegmentAte> ates;  // nonempty-intersection view, one per segment
};

namespace detail {
inline void require_overlap(const ExperimentTable& table) {
  if (table.arm_count(0) == 0)
    throw InsufficientOverlapError("no-hte: table has no control rows");
  if (table.max_arm() == 0)
    throw InsufficientOverlapError("no-hte: table has no treated rows");
}
}  // namespace detail

// Splits only when both children beat the parent's segment-ATE metric; each
// leaf assigns the arm with the highest segment ATE there. With no eligible
// split anywhere this degenerates to the single best arm on the whole table.
inline NoHteGreedyFit fit_no_hte_greedy(const ExperimentTable& table,
                                        const ScalarizationWeights& weights,
                                        const NoHteConfig& cfg) {
  table.validate();
  detail::require_overlap(table);
  if (cfg.max_depth < 0) throw ConfigError("no-hte: max_depth must be >= 0");

  const auto scalar_y = scalarize_outcomes(table, weights);
  const std::size_t arms = static_cast<std::size_t>(table.max_arm()) + 1;
  detail::SegmentAteCriterion crit{table.treatment, scalar_y, arms, cfg.min_arm_per_child, false};
  SplitLimits lim{cfg.max_depth, 1, cfg.threshold_cap};
  std::vector<std::size_t> rows(table.n_rows());
  std::iota(rows.begin(), rows.end(), 0);
  auto grown = grow_breadth_first(table.features, std::move(rows), lim, crit);

  NoHteGreedyFit fit;
  fit.policy = finalize_tree<PolicyTree>(grown, [&](const std::vector<std::size_t>& rs) {
    const auto agg = detail::aggregate_rows(table, scalar_y, rs, arms);
    const auto view = detail::segment_ate_from_aggregate(agg, 1);
    return PolicyLeaf{view.metric_defined ? view.best_arm : 0};
  });
  fit.segments = unroll_tree(fit.policy, table, weights);
  fit.ates.reserve(fit.segments.size());
  for (const auto& seg : fit.segments) {
    const auto agg = detail::aggregate_rows(table, scalar_y, seg.rows, arms);
    fit.ates.push_back(detail::segment_ate_from_aggregate(agg, 1));
  }
  return fit;
}

// One harvested segment of the iterative variant.
struct PolicySegmentRule {
  Predicate predicate;
  int action = 0;
  SegmentAte ate;                 // nonempty-intersection view at harvest time
  double harvest_metric = 0.0;    // floored metric that won the round
  std::vector<std::size_t> rows;  // rows removed at harvest time
  int round = 0;
};

// Ordered rule list applied first-match; rows matching no rule get the
// default arm.
struct SegmentPolicy {
  std::vector<PolicySegmentRule> rules;
  int default_arm = 0;

  int assign(std::span<const double> x) const {
    for (const auto& rule : rules)
      if (rule.predicate.matches(x)) return rule.action;
    return default_arm;
  }
  int operator()(std::span<const double> x) const { return assign(x); }
};

struct NoHteIterativeFit {
  SegmentPolicy policy;
  int rounds_run = 0;  // rounds that harvested a segment
};

// Repeatedly grows a tree under the relaxed one-child-improves rule, harvests
// the leaf with the best metric, removes its rows, and records it as the next
// first-match rule. Stops early when no split is accepted or overlap is gone.
inline NoHteIterativeFit fit_no_hte_iterative(const ExperimentTable& table,
                                              const ScalarizationWeights& weights,
                                              const NoHteConfig& cfg) {
  table.validate();
  detail::require_overlap(table);
  if (cfg.max_depth < 0) throw ConfigError("no-hte: max_depth must be >= 0");
  if (cfg.iterations < 1) throw ConfigError("no-hte: iterations must be >= 1");
  if (cfg.default_arm < 0 || cfg.default_arm > table.max_arm())
    throw ConfigError("no-hte: default arm " + std::to_string(cfg.default_arm) +
                      " out of range");

  const auto scalar_y = scalarize_outcomes(table, weights);
  const std::size_t arms = static_cast<std::size_t>(table.max_arm()) + 1;
  detail::SegmentAteCriterion crit{table.treatment, scalar_y, arms, cfg.min_arm_per_child, true};
  SplitLimits lim{cfg.max_depth, 1, cfg.threshold_cap};

  NoHteIterativeFit fit;
  fit.policy.default_arm = cfg.default_arm;
  std::vector<std::size_t> remaining(table.n_rows());
  std::iota(remaining.begin(), remaining.end(), 0);

  for (int round = 0; round < cfg.iterations; ++round) {
    if (remaining.empty()) break;
    std::size_t ctl = 0, treated = 0;
    for (std::size_t r : remaining) {
      if (table.treatment[r] == 0) ++ctl;
      else ++treated;
    }
    if (ctl == 0 || treated == 0) break;

    auto grown = grow_breadth_first(table.features, remaining, lim, crit);
    if (grown.size() == 1) break;  // no accepted split this round

    const auto leaves = detail::grown_leaves(grown);
    int best = -1;
    double best_metric = 0.0;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
      const auto& leaf_rows = grown[leaves[li].first].rows;
      const auto agg = detail::aggregate_rows(table, scalar_y, leaf_rows, arms);
      const auto view = detail::segment_ate_from_aggregate(agg, cfg.min_arm_per_child);
      if (!view.metric_defined) continue;
      if (best < 0 || view.metric > best_metric) {
        best = static_cast<int>(li);
        best_metric = view.metric;
      }
    }
    if (best < 0) break;

    const auto& harvest_rows = grown[leaves[static_cast<std::size_t>(best)].first].rows;
    const auto agg = detail::aggregate_rows(table, scalar_y, harvest_rows, arms);
    PolicySegmentRule rule;
    rule.predicate = leaves[static_cast<std::size_t>(best)].second;
    rule.ate = detail::segment_ate_from_aggregate(agg, 1);
    rule.action = rule.ate.metric_defined ? rule.ate.best_arm : cfg.default_arm;
    rule.harvest_metric = best_metric;
    rule.rows = harvest_rows;
    rule.round = round;
    fit.policy.rules.push_back(std::move(rule));
    fit.rounds_run += 1;

    std::vector<std::size_t> next;
    next.reserve(remaining.size() - harvest_rows.size());
    std::size_t hi = 0;
    for (std::size_t r : remaining) {
      if (hi < harvest_rows.size() && harvest_rows[hi] == r) {
        ++hi;
        continue;
      }
      next.push_back(r);
    }
    remaining = std::move(next);
  }
  return fit;
}

}  // namespace treatkit
