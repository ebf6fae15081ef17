#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "treatkit/errors.hpp"
#include "treatkit/matrix.hpp"
#include "treatkit/parallel.hpp"

namespace treatkit {

struct SplitLimits {
  int max_depth = 0;
  std::size_t min_leaf = 1;
  std::size_t threshold_cap = 256;  // candidate thresholds per feature per node
};

// Node of a grown (untyped) tree; leaves keep their row sets so callers can
// compute leaf payloads. Row vectors stay in ascending order.
struct GrowthNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int depth = 0;
  std::vector<std::size_t> rows;
};

namespace detail {

struct BestSplit {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;
};

// Candidate thresholds are midpoints between consecutive distinct sorted
// values; when their count exceeds the cap, an evenly spaced subset is kept.
inline std::vector<std::size_t> select_boundaries(const std::vector<std::size_t>& boundaries,
                                                  std::size_t cap) {
  if (boundaries.size() <= cap) return boundaries;
  std::vector<std::size_t> picked;
  picked.reserve(cap);
  for (std::size_t j = 0; j < cap; ++j) {
    const std::size_t idx = (j + 1) * boundaries.size() / (cap + 1);
    if (picked.empty() || boundaries[idx] != picked.back()) picked.push_back(boundaries[idx]);
  }
  return picked;
}

// Best eligible split for one feature, scanning thresholds in ascending order
// and keeping the first maximum.
template <typename Crit>
BestSplit best_split_for_feature(const Matrix& X, std::span<const std::size_t> rows, int feature,
                                 const typename Crit::Stats& parent, const Crit& crit,
                                 const SplitLimits& lim) {
  BestSplit best;
  const std::size_t n = rows.size();
  if (n < 2 * lim.min_leaf) return best;

  std::vector<std::pair<double, std::size_t>> vals;
  vals.reserve(n);
  for (std::size_t r : rows) vals.emplace_back(X(r, static_cast<std::size_t>(feature)), r);
  std::sort(vals.begin(), vals.end());

  std::vector<std::size_t> boundaries;  // position i: threshold between i and i+1
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (vals[i].first != vals[i + 1].first) boundaries.push_back(i);
  if (boundaries.empty()) return best;
  const auto selected = select_boundaries(boundaries, lim.threshold_cap);

  typename Crit::Stats left = crit.empty();
  std::size_t next = 0;
  for (std::size_t i = 0; i < n && next < selected.size(); ++i) {
    crit.add(left, vals[i].second);
    if (i != selected[next]) continue;
    ++next;
    const std::size_t n_left = i + 1;
    if (n_left < lim.min_leaf || n - n_left < lim.min_leaf) continue;
    const typename Crit::Stats right = crit.subtract(parent, left);
    const auto score = crit.split_score(left, right, parent);
    if (!score) continue;
    if (!best.found || *score > best.score) {
      best.found = true;
      best.feature = feature;
      best.threshold = (vals[i].first + vals[i + 1].first) / 2.0;
      best.score = *score;
    }
  }
  return best;
}

template <typename Crit>
BestSplit best_split(const Matrix& X, std::span<const std::size_t> rows, const Crit& crit,
                     const SplitLimits& lim) {
  typename Crit::Stats parent = crit.empty();
  for (std::size_t r : rows) crit.add(parent, r);

  std::vector<BestSplit> per_feature(X.cols());
  parallel_for(X.cols(), [&](std::size_t f) {
    per_feature[f] =
        best_split_for_feature(X, rows, static_cast<int>(f), parent, crit, lim);
  });

  BestSplit best;
  for (const auto& cand : per_feature) {
    if (!cand.found) continue;
    if (!best.found || cand.score > best.score) best = cand;
  }
  return best;
}

}  // namespace detail

// Grows a tree level by level: every node on the frontier is split by the
// criterion's best eligible candidate, or kept as a leaf when none exists.
template <typename Crit>
std::vector<GrowthNode> grow_breadth_first(const Matrix& X, std::vector<std::size_t> rows,
                                           const SplitLimits& lim, const Crit& crit) {
  if (rows.empty()) throw ValidationError("tree growth: no rows");
  if (lim.max_depth < 0) throw ConfigError("tree growth: max_depth must be >= 0");

  std::vector<GrowthNode> nodes;
  nodes.push_back(GrowthNode{-1, 0.0, -1, -1, 0, std::move(rows)});
  std::vector<std::size_t> frontier{0};

  for (int level = 0; level < lim.max_depth && !frontier.empty(); ++level) {
    std::vector<std::size_t> next_frontier;
    for (std::size_t idx : frontier) {
      const auto best = detail::best_split(X, nodes[idx].rows, crit, lim);
      if (!best.found) continue;
      std::vector<std::size_t> left_rows, right_rows;
      for (std::size_t r : nodes[idx].rows) {
        if (X(r, static_cast<std::size_t>(best.feature)) < best.threshold)
          left_rows.push_back(r);
        else
          right_rows.push_back(r);
      }
      const int left_id = static_cast<int>(nodes.size());
      const int right_id = left_id + 1;
      const int depth = nodes[idx].depth + 1;
      nodes[idx].feature = best.feature;
      nodes[idx].threshold = best.threshold;
      nodes[idx].left = left_id;
      nodes[idx].right = right_id;
      nodes.push_back(GrowthNode{-1, 0.0, -1, -1, depth, std::move(left_rows)});
      nodes.push_back(GrowthNode{-1, 0.0, -1, -1, depth, std::move(right_rows)});
      next_frontier.push_back(static_cast<std::size_t>(left_id));
      next_frontier.push_back(static_cast<std::size_t>(right_id));
    }
    frontier = std::move(next_frontier);
  }
  return nodes;
}

// Copies a grown structure into a typed tree, filling each leaf via
// make_leaf(rows). Node order is preserved.
template <typename TreeT, typename MakeLeaf>
TreeT finalize_tree(const std::vector<GrowthNode>& grown, MakeLeaf&& make_leaf) {
  TreeT out;
  out.nodes.resize(grown.size());
  for (std::size_t i = 0; i < grown.size(); ++i) {
    auto& n = out.nodes[i];
    n.feature = grown[i].feature;
    n.threshold = grown[i].threshold;
    n.left = grown[i].left;
    n.right = grown[i].right;
    if (grown[i].feature < 0) n.leaf = make_leaf(grown[i].rows);
  }
  return out;
}

}  // namespace treatkit
