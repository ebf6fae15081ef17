#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "treatkit/data.hpp"
#include "treatkit/policy_greedy.hpp"
#include "treatkit/split_engine.hpp"
#include "treatkit/tree.hpp"

namespace treatkit {

// Shallow tree whose leaves route to one of Q constituent policies.
struct GuidanceTree {
  Tree<GuidanceLeaf> tree;
  std::vector<PolicyTree> policies;
  std::vector<std::string> policy_names;  // optional labels for rendering

  int policy_index_for(std::span<const double> x) const { return tree.leaf_for(x).policy; }
  int assign(std::span<const double> x) const {
    return apply_policy(policies[static_cast<std::size_t>(policy_index_for(x))], x);
  }
  int operator()(std::span<const double> x) const { return assign(x); }
  bool is_degenerate() const { return tree.nodes.size() == 1; }
};

inline int apply_ensemble(const GuidanceTree& gt, std::span<const double> x) {
  return gt.assign(x);
}

namespace detail {

inline std::vector<double> resolve_propensities(
    const ExperimentTable& table, std::optional<std::span<const double>> propensities) {
  std::vector<double> p;
  if (propensities) {
    if (propensities->size() != table.n_rows())
      throw DimensionError("ope: propensity length " + std::to_string(propensities->size()) +
                           " != table rows " + std::to_string(table.n_rows()));
    p.assign(propensities->begin(), propensities->end());
  } else if (table.propensity) {
    p = *table.propensity;
  } else {
    // Uniform assignment over the observed arms.
    p.assign(table.n_rows(), 1.0 / static_cast<double>(table.max_arm() + 1));
  }
  for (std::size_t i = 0; i < p.size(); ++i)
    if (!(p[i] > 0.0))
      throw ValidationError("ope: propensity at row " + std::to_string(i + 1) +
                            " must be positive");
  return p;
}

}  // namespace detail

// Inverse-propensity-scored policy value: the mean over all N rows of
// Y_i / p_i restricted to rows whose observed arm matches the policy.
template <typename P>
double ope_ips(const P& policy, const ExperimentTable& table, const ScalarizationWeights& weights,
               std::optional<std::span<const double>> propensities = std::nullopt) {
  table.validate();
  const auto p = detail::resolve_propensities(table, propensities);
  double total = 0.0;
  for (std::size_t i = 0; i < table.n_rows(); ++i) {
    if (policy_assign(policy, table.features.row(i)) != table.treatment[i]) continue;
    total += scalarize(table.outcomes.row(i), weights) / p[i];
  }
  return total / static_cast<double>(table.n_rows());
}

// One exploration row: the uniformly drawn constituent policy and the per-arm
// outcome vector, with the chosen arm's entry revealed from the observation
// when it matches the logged arm.
struct ExploreRecord {
  int policy_index = 0;
  std::vector<double> outcomes;  // length K+1, scalarized
};

struct GuideExploreConfig {
  int guide_depth = 1;
  std::uint64_t seed = 0;
  std::size_t min_leaf = 1;
  std::size_t threshold_cap = 256;
};

struct GuideExploreFit {
  GuidanceTree guidance;
  std::vector<ExploreRecord> records;
};

// Offline uniform-exploration ensembling: build per-row outcome vectors from
// a random constituent's assignment, grow a value tree over them, then label
// each leaf with the constituent whose assignments collect the largest summed
// outcome there (ties to the lowest policy index).
inline GuideExploreFit guide_uniform_explore(const ExperimentTable& table,
                                             const PotentialPredictionMatrix& preds,
                                             const std::vector<PolicyTree>& policies,
                                             const ScalarizationWeights& weights,
                                             const GuideExploreConfig& cfg) {
  table.validate();
  preds.validate();
  const std::size_t q_count = policies.size();
  if (q_count < 2) throw ConfigError("guide explore: need at least 2 policies");
  if (preds.n_rows() != table.n_rows())
    throw DimensionError("guide explore: prediction rows " + std::to_string(preds.n_rows()) +
                         " != table rows " + std::to_string(table.n_rows()));
  const std::size_t arms = preds.arm_count();
  if (static_cast<std::size_t>(table.max_arm()) >= arms)
    throw DimensionError("guide explore: table arm " + std::to_string(table.max_arm()) +
                         " outside prediction arm range");

  const std::size_t n = table.n_rows();
  // Constituent assignments, reused for reveal and leaf labeling.
  Matrix assigned(n, q_count);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t q = 0; q < q_count; ++q) {
      const int arm = apply_policy(policies[q], table.features.row(i));
      if (arm < 0 || static_cast<std::size_t>(arm) >= arms)
        throw DimensionError("guide explore: policy " + std::to_string(q + 1) +
                             " assigns arm " + std::to_string(arm) +
                             " outside prediction arm range");
      assigned(i, q) = static_cast<double>(arm);
    }

  GuideExploreFit fit;
  fit.records.resize(n);
  Matrix values(n, arms);
  std::mt19937_64 rng(cfg.seed);
  std::uniform_int_distribution<std::size_t> pick(0, q_count - 1);
  for (std::size_t i = 0; i < n; ++i) {
    auto& rec = fit.records[i];
    rec.policy_index = static_cast<int>(pick(rng));
    rec.outcomes.resize(arms);
    for (std::size_t a = 0; a < arms; ++a)
      rec.outcomes[a] = scalarize(preds.values.cell(i, a), weights);
    const auto chosen_arm =
        static_cast<std::size_t>(assigned(i, static_cast<std::size_t>(rec.policy_index)));
    if (static_cast<int>(chosen_arm) == table.treatment[i])
      rec.outcomes[chosen_arm] = scalarize(table.outcomes.row(i), weights);
    for (std::size_t a = 0; a < arms; ++a) values(i, a) = rec.outcomes[a];
  }

  GreedyPolicyConfig grow_cfg{cfg.guide_depth, cfg.min_leaf, cfg.threshold_cap};
  detail::ArmValueCriterion crit{values};
  SplitLimits lim{grow_cfg.max_depth, grow_cfg.min_leaf, grow_cfg.threshold_cap};
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  auto grown = grow_breadth_first(table.features, std::move(rows), lim, crit);

  fit.guidance.policies = policies;
  fit.guidance.tree =
      finalize_tree<Tree<GuidanceLeaf>>(grown, [&](const std::vector<std::size_t>& rs) {
        int best_q = 0;
        double best_v = 0.0;
        for (std::size_t q = 0; q < q_count; ++q) {
          double v = 0.0;
          for (std::size_t r : rs)
            v += values(r, static_cast<std::size_t>(assigned(r, q)));
          if (q == 0 || v > best_v) {
            best_q = static_cast<int>(q);
            best_v = v;
          }
        }
        return GuidanceLeaf{best_q};
      });
  return fit;
}

struct GuideOpeConfig {
  int guide_depth = 1;
  std::size_t threshold_cap = 256;
};

// Ensemble by off-policy evaluation: exhaustively scores every
// (feature, threshold, left policy, right policy) composite plus every single
// policy by IPS value, and returns the maximizer. Ties keep the earlier
// candidate, so a dominant single policy yields a no-split tree. Depths
// beyond 1 refine each side greedily with the same search.
inline GuidanceTree guide_ope(const ExperimentTable& table,
                              const std::vector<PolicyTree>& policies,
                              const ScalarizationWeights& weights, const GuideOpeConfig& cfg,
                              std::optional<std::span<const double>> propensities = std::nullopt) {
  table.validate();
  const std::size_t q_count = policies.size();
  if (q_count < 2) throw ConfigError("guide ope: need at least 2 policies");
  if (cfg.guide_depth < 1) throw ConfigError("guide ope: guide_depth must be >= 1");
  const auto p = detail::resolve_propensities(table, propensities);

  const std::size_t n = table.n_rows();
  // Per-row IPS contribution of each constituent.
  Matrix contrib(n, q_count);
  for (std::size_t i = 0; i < n; ++i) {
    const double y = scalarize(table.outcomes.row(i), weights) / p[i];
    for (std::size_t q = 0; q < q_count; ++q) {
      const int arm = apply_policy(policies[q], table.features.row(i));
      contrib(i, q) = arm == table.treatment[i] ? y : 0.0;
    }
  }

  GuidanceTree out;
  out.policies = policies;

  std::function<int(std::vector<std::size_t>, int)> build =
      [&](std::vector<std::size_t> rows, int depth) -> int {
    std::vector<double> totals(q_count, 0.0);
    for (std::size_t r : rows)
      for (std::size_t q = 0; q < q_count; ++q) totals[q] += contrib(r, q);
    std::size_t best_single = 0;
    for (std::size_t q = 1; q < q_count; ++q)
      if (totals[q] > totals[best_single]) best_single = q;

    struct Split {
      bool found = false;
      int feature = -1;
      double threshold = 0.0;
      std::size_t left_policy = 0, right_policy = 0;
    };
    Split best;
    double best_score = totals[best_single];

    if (depth >= 1 && rows.size() >= 2) {
      for (std::size_t f = 0; f < table.features.cols(); ++f) {
        std::vector<std::pair<double, std::size_t>> vals;
        vals.reserve(rows.size());
        for (std::size_t r : rows) vals.emplace_back(table.features(r, f), r);
        std::sort(vals.begin(), vals.end());
        std::vector<std::size_t> boundaries;
        for (std::size_t i = 0; i + 1 < vals.size(); ++i)
          if (vals[i].first != vals[i + 1].first) boundaries.push_back(i);
        const auto selected = detail::select_boundaries(boundaries, cfg.threshold_cap);

        std::vector<double> prefix(q_count, 0.0);
        std::size_t next = 0;
        for (std::size_t i = 0; i < vals.size() && next < selected.size(); ++i) {
          for (std::size_t q = 0; q < q_count; ++q) prefix[q] += contrib(vals[i].second, q);
          if (i != selected[next]) continue;
          ++next;
          for (std::size_t k = 0; k < q_count; ++k) {
            for (std::size_t q = 0; q < q_count; ++q) {
              if (k == q) continue;
              const double score = prefix[k] + (totals[q] - prefix[q]);
              if (score > best_score) {
                best_score = score;
                best.found = true;
                best.feature = static_cast<int>(f);
                best.threshold = (vals[i].first + vals[i + 1].first) / 2.0;
                best.left_policy = k;
                best.right_policy = q;
              }
            }
          }
        }
      }
    }

    const int id = static_cast<int>(out.tree.nodes.size());
    out.tree.nodes.emplace_back();
    if (!best.found) {
      out.tree.nodes[static_cast<std::size_t>(id)].leaf =
          GuidanceLeaf{static_cast<int>(best_single)};
      return id;
    }
    out.tree.nodes[static_cast<std::size_t>(id)].feature = best.feature;
    out.tree.nodes[static_cast<std::size_t>(id)].threshold = best.threshold;
    std::vector<std::size_t> left_rows, right_rows;
    for (std::size_t r : rows) {
      if (table.features(r, static_cast<std::size_t>(best.feature)) < best.threshold)
        left_rows.push_back(r);
      else
        right_rows.push_back(r);
    }
    int l, r;
    if (depth > 1) {
      l = build(std::move(left_rows), depth - 1);
      r = build(std::move(right_rows), depth - 1);
    } else {
      l = static_cast<int>(out.tree.nodes.size());
      out.tree.nodes.emplace_back();
      out.tree.nodes[static_cast<std::size_t>(l)].leaf =
          GuidanceLeaf{static_cast<int>(best.left_policy)};
      r = static_cast<int>(out.tree.nodes.size());
      out.tree.nodes.emplace_back();
      out.tree.nodes[static_cast<std::size_t>(r)].leaf =
          GuidanceLeaf{static_cast<int>(best.right_policy)};
    }
    out.tree.nodes[static_cast<std::size_t>(id)].left = l;
    out.tree.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  };

  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  build(std::move(rows), cfg.guide_depth);
  return out;
}

}  // namespace treatkit
