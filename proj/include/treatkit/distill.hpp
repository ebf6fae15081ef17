#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "treatkit/data.hpp"
#include "treatkit/numeric.hpp"
#include "treatkit/split_engine.hpp"
#include "treatkit/tree.hpp"

namespace treatkit {

// Predicted treatment effects for one contrast (arm k vs control), per row
// and outcome.
struct EffectMatrix {
  Matrix values;  // N x J
  int contrast_arm = 1;
};

inline EffectMatrix pairwise_effects(const PotentialPredictionMatrix& preds, int contrast_arm) {
  if (contrast_arm < 1 || contrast_arm >= static_cast<int>(preds.arm_count()))
    throw ConfigError("pairwise_effects: contrast arm " + std::to_string(contrast_arm) +
                      " must lie in [1, " + std::to_string(preds.arm_count() - 1) + "]");
  EffectMatrix out;
  out.contrast_arm = contrast_arm;
  out.values = Matrix(preds.n_rows(), preds.outcome_count());
  const auto k = static_cast<std::size_t>(contrast_arm);
  for (std::size_t i = 0; i < preds.n_rows(); ++i)
    for (std::size_t j = 0; j < preds.outcome_count(); ++j)
      out.values(i, j) = preds.values(i, k, j) - preds.values(i, 0, j);
  return out;
}

// Normal-approximation interval around the sample mean (sd uses n-1).
inline std::pair<double, double> leaf_confidence_interval(std::span<const double> samples,
                                                          double level = 0.95) {
  if (samples.size() < 2)
    throw ValidationError("confidence interval: undefined variance with " +
                          std::to_string(samples.size()) + " sample(s)");
  const double m = mean(samples);
  const double sd = std::sqrt(variance_sample(samples));
  const double z = normal_quantile((1.0 + level) / 2.0);
  const double half = z * sd / std::sqrt(static_cast<double>(samples.size()));
  return {m - half, m + half};
}

struct MtdtConfig {
  int max_depth = 3;
  std::size_t n_min = 10;  // per-arm floor per surviving leaf, estimation half
  bool honest = true;
  std::uint64_t seed = 0;
  std::size_t min_leaf = 1;  // structure-half row floor per child
  double ci_level = 0.95;
  // Squares the weighted residual sum across outcomes instead of summing
  // per-outcome squared residuals (lets opposite-sign residuals cancel).
  bool literal_loss = false;
  std::size_t threshold_cap = 256;
};

struct MtdtFit {
  ExplanationTree tree;
  int contrast_arm = 1;
  std::vector<std::size_t> structure_rows;
  std::vector<std::size_t> estimation_rows;
};

namespace detail {

// Weighted multitask SSE gain: sum_j c_j * (S_l^2/n_l + S_r^2/n_r - S^2/n).
struct MtdtCriterion {
  const Matrix& effects;
  std::span<const double> weights;

  struct Stats {
    std::size_t n = 0;
    std::vector<double> sums;
  };

  Stats empty() const { return {0, std::vector<double>(effects.cols(), 0.0)}; }
  void add(Stats& s, std::size_t row) const {
    s.n += 1;
    for (std::size_t j = 0; j < effects.cols(); ++j) s.sums[j] += effects(row, j);
  }
  Stats subtract(const Stats& parent, const Stats& left) const {
    Stats r{parent.n - left.n, parent.sums};
    for (std::size_t j = 0; j < r.sums.size(); ++j) r.sums[j] -= left.sums[j];
    return r;
  }
  std::optional<double> split_score(const Stats& l, const Stats& r, const Stats& p) const {
    double gain = 0.0;
    for (std::size_t j = 0; j < weights.size(); ++j) {
      gain += weights[j] * (l.sums[j] * l.sums[j] / static_cast<double>(l.n) +
                            r.sums[j] * r.sums[j] / static_cast<double>(r.n) -
                            p.sums[j] * p.sums[j] / static_cast<double>(p.n));
    }
    if (!(gain > 0.0)) return std::nullopt;
    return gain;
  }
};

// Single-task variant on the weighted residual sum.
struct MtdtLiteralCriterion {
  std::span<const double> z;  // per-row weighted effect sum

  struct Stats {
    std::size_t n = 0;
    double sum = 0.0;
  };

  Stats empty() const { return {}; }
  void add(Stats& s, std::size_t row) const {
    s.n += 1;
    s.sum += z[row];
  }
  Stats subtract(const Stats& parent, const Stats& left) const {
    return {parent.n - left.n, parent.sum - left.sum};
  }
  std::optional<double> split_score(const Stats& l, const Stats& r, const Stats& p) const {
    const double gain = l.sum * l.sum / static_cast<double>(l.n) +
                        r.sum * r.sum / static_cast<double>(r.n) -
                        p.sum * p.sum / static_cast<double>(p.n);
    if (!(gain > 0.0)) return std::nullopt;
    return gain;
  }
};

struct MtdtWorkNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int parent = -1;
  int depth = 0;
  bool alive = true;
  bool pruned = false;
  std::vector<std::size_t> est_rows;
};

}  // namespace detail

// Distills per-row predicted effects into a multitask tree. Splits are chosen
// on the structure half; leaf estimates, intervals, and overlap counts come
// from the estimation half. Leaves that end up with fewer than n_min treated
// or control estimation rows are removed by collapsing their parent, bottom-up.
inline MtdtFit fit_mtdt(const ExperimentTable& table, const EffectMatrix& effects,
                        const ScalarizationWeights& weights, const MtdtConfig& cfg) {
  table.validate();
  const std::size_t n = table.n_rows();
  if (effects.values.rows() != n)
    throw DimensionError("mtdt: effect rows " + std::to_string(effects.values.rows()) +
                         " != table rows " + std::to_string(n));
  if (effects.values.cols() != weights.weights.size())
    throw DimensionError("mtdt: effect outcomes " + std::to_string(effects.values.cols()) +
                         " != weight length " + std::to_string(weights.weights.size()));
  if (cfg.n_min < 1) throw ConfigError("mtdt: n_min must be >= 1");
  if (cfg.n_min > n / 2)
    throw ConfigError("mtdt: n_min " + std::to_string(cfg.n_min) + " exceeds half of " +
                      std::to_string(n) + " rows");
  const int k = effects.contrast_arm;
  if (table.arm_count(k) == 0 || table.arm_count(0) == 0)
    throw InsufficientOverlapError("mtdt: need both arm " + std::to_string(k) +
                                   " and control rows");

  MtdtFit fit;
  fit.contrast_arm = k;
  if (cfg.honest) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t half = n / 2;
    fit.structure_rows.assign(order.begin(), order.begin() + half);
    fit.estimation_rows.assign(order.begin() + half, order.end());
    std::sort(fit.structure_rows.begin(), fit.structure_rows.end());
    std::sort(fit.estimation_rows.begin(), fit.estimation_rows.end());
  } else {
    fit.structure_rows.resize(n);
    std::iota(fit.structure_rows.begin(), fit.structure_rows.end(), 0);
    fit.estimation_rows = fit.structure_rows;
  }

  std::size_t est_treated = 0, est_control = 0;
  for (std::size_t r : fit.estimation_rows) {
    if (table.treatment[r] == k) ++est_treated;
    if (table.treatment[r] == 0) ++est_control;
  }
  if (est_treated < cfg.n_min || est_control < cfg.n_min)
    throw InsufficientOverlapError(
        "mtdt: estimation half has " + std::to_string(est_treated) + " arm-" + std::to_string(k) +
        " and " + std::to_string(est_control) + " control rows; need " +
        std::to_string(cfg.n_min) + " of each");

  // Structure growth.
  SplitLimits lim{cfg.max_depth, cfg.min_leaf, cfg.threshold_cap};
  std::vector<GrowthNode> grown;
  if (cfg.literal_loss) {
    std::vector<double> z(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < effects.values.cols(); ++j)
        z[i] += weights.weights[j] * effects.values(i, j);
    detail::MtdtLiteralCriterion crit{z};
    grown = grow_breadth_first(table.features, fit.structure_rows, lim, crit);
  } else {
    detail::MtdtCriterion crit{effects.values, weights.weights};
    grown = grow_breadth_first(table.features, fit.structure_rows, lim, crit);
  }

  // Route estimation rows down the grown structure.
  std::vector<detail::MtdtWorkNode> work(grown.size());
  for (std::size_t i = 0; i < grown.size(); ++i) {
    work[i].feature = grown[i].feature;
    work[i].threshold = grown[i].threshold;
    work[i].left = grown[i].left;
    work[i].right = grown[i].right;
    work[i].depth = grown[i].depth;
    if (grown[i].left >= 0) {
      work[static_cast<std::size_t>(grown[i].left)].parent = static_cast<int>(i);
      work[static_cast<std::size_t>(grown[i].right)].parent = static_cast<int>(i);
    }
  }
  work[0].est_rows = fit.estimation_rows;
  for (std::size_t i = 0; i < work.size(); ++i) {
    if (work[i].feature < 0) continue;
    auto& left = work[static_cast<std::size_t>(work[i].left)];
    auto& right = work[static_cast<std::size_t>(work[i].right)];
    for (std::size_t r : work[i].est_rows) {
      if (table.features(r, static_cast<std::size_t>(work[i].feature)) < work[i].threshold)
        left.est_rows.push_back(r);
      else
        right.est_rows.push_back(r);
    }
  }

  // Overlap pruning: collapse the parent of the deepest violating leaf until
  // every leaf holds n_min treated and control estimation rows.
  auto violates = [&](const detail::MtdtWorkNode& node) {
    std::size_t treated = 0, control = 0;
    for (std::size_t r : node.est_rows) {
      if (table.treatment[r] == k) ++treated;
      if (table.treatment[r] == 0) ++control;
    }
    return treated < cfg.n_min || control < cfg.n_min;
  };
  for (;;) {
    int worst = -1;
    for (std::size_t i = 0; i < work.size(); ++i) {
      if (!work[i].alive || work[i].feature >= 0) continue;
      if (!violates(work[i])) continue;
      if (worst < 0 || work[i].depth > work[static_cast<std::size_t>(worst)].depth)
        worst = static_cast<int>(i);
    }
    if (worst < 0) break;
    const int parent = work[static_cast<std::size_t>(worst)].parent;
    // Root complies by the estimation-half check above, so parent exists.
    auto& p = work[static_cast<std::size_t>(parent)];
    std::vector<int> doomed{p.left, p.right};
    while (!doomed.empty()) {
      const auto idx = static_cast<std::size_t>(doomed.back());
      doomed.pop_back();
      work[idx].alive = false;
      if (work[idx].feature >= 0) {
        doomed.push_back(work[idx].left);
        doomed.push_back(work[idx].right);
      }
    }
    p.feature = -1;
    p.left = p.right = -1;
    p.pruned = true;
  }

  // Emit the surviving tree in depth-first order with estimation-half leaves.
  const std::size_t n_out = effects.values.cols();
  ExplanationTree out;
  std::function<int(int)> emit = [&](int old) -> int {
    const auto& w = work[static_cast<std::size_t>(old)];
    const int id = static_cast<int>(out.nodes.size());
    out.nodes.emplace_back();
    if (w.feature < 0) {
      ExplanationLeaf leaf;
      leaf.pruned = w.pruned;
      leaf.n_estimation = w.est_rows.size();
      for (std::size_t r : w.est_rows) {
        if (table.treatment[r] == k) ++leaf.n_treated;
        if (table.treatment[r] == 0) ++leaf.n_control;
      }
      leaf.effects.resize(n_out);
      leaf.ci_low.resize(n_out);
      leaf.ci_high.resize(n_out);
      std::vector<double> column(w.est_rows.size());
      for (std::size_t j = 0; j < n_out; ++j) {
        for (std::size_t i = 0; i < w.est_rows.size(); ++i)
          column[i] = effects.values(w.est_rows[i], j);
        leaf.effects[j] = mean(column);
        const auto ci = leaf_confidence_interval(column, cfg.ci_level);
        leaf.ci_low[j] = ci.first;
        leaf.ci_high[j] = ci.second;
      }
      out.nodes[static_cast<std::size_t>(id)].leaf = std::move(leaf);
      return id;
    }
    out.nodes[static_cast<std::size_t>(id)].feature = w.feature;
    out.nodes[static_cast<std::size_t>(id)].threshold = w.threshold;
    const int l = emit(w.left);
    const int r = emit(w.right);
    out.nodes[static_cast<std::size_t>(id)].left = l;
    out.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  };
  emit(0);
  fit.tree = std::move(out);
  return fit;
}

// One report row per leaf segment.
struct ReportSegment {
  Segment segment;
  std::vector<double> effects;
  std::vector<double> ci_low;
  std::vector<double> ci_high;
  std::size_t n_treated = 0;
  std::size_t n_control = 0;
  double scalarized_effect = 0.0;
  bool pruned = false;
};

// Unrolls an explanation tree over a table, ordered by scalarized effect
// ascending.
inline std::vector<ReportSegment> segment_report(const ExplanationTree& tree,
                                                 const ExperimentTable& table,
                                                 const ScalarizationWeights& weights) {
  auto segments = unroll_tree(tree, table, weights);
  std::vector<ReportSegment> report;
  report.reserve(segments.size());
  for (auto& seg : segments) {
    const auto& leaf = tree.nodes[static_cast<std::size_t>(seg.leaf_node)].leaf;
    ReportSegment row;
    row.effects = leaf.effects;
    row.ci_low = leaf.ci_low;
    row.ci_high = leaf.ci_high;
    row.n_treated = leaf.n_treated;
    row.n_control = leaf.n_control;
    row.pruned = leaf.pruned;
    row.scalarized_effect = scalarize(leaf.effects, weights);
    row.segment = std::move(seg);
    report.push_back(std::move(row));
  }
  std::stable_sort(report.begin(), report.end(), [](const ReportSegment& a, const ReportSegment& b) {
    return a.scalarized_effect < b.scalarized_effect;
  });
  return report;
}

}  // namespace treatkit
