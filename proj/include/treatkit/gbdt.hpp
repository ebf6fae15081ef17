#pragma once

#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "treatkit/matrix.hpp"
#include "treatkit/split_engine.hpp"
#include "treatkit/tree.hpp"

namespace treatkit {

struct RegressionLeaf {
  double value = 0.0;
};

using RegressionTreeNodes = Tree<RegressionLeaf>;

namespace detail {

// Squared-error split criterion; the gain drops the constant sum-of-squares
// term, leaving sum^2/n bookkeeping only.
struct SseCriterion {
  std::span<const double> y;

  struct Stats {
    std::size_t n = 0;
    double sum = 0.0;
  };

  Stats empty() const { return {}; }
  void add(Stats& s, std::size_t row) const {
    s.n += 1;
    s.sum += y[row];
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

}  // namespace detail

// Plain SSE-greedy regression tree with mean leaves.
struct RegressionTree {
  RegressionTreeNodes tree;

  static RegressionTree fit(const Matrix& X, std::span<const double> y,
                            std::span<const std::size_t> rows, int max_depth,
                            std::size_t min_leaf = 1, std::size_t threshold_cap = 256) {
    detail::SseCriterion crit{y};
    SplitLimits lim{max_depth, min_leaf, threshold_cap};
    auto grown = grow_breadth_first(X, {rows.begin(), rows.end()}, lim, crit);
    RegressionTree out;
    out.tree = finalize_tree<RegressionTreeNodes>(grown, [&](const std::vector<std::size_t>& rs) {
      double sum = 0.0;
      for (std::size_t r : rs) sum += y[r];
      return RegressionLeaf{sum / static_cast<double>(rs.size())};
    });
    return out;
  }

  static RegressionTree fit(const Matrix& X, std::span<const double> y, int max_depth,
                            std::size_t min_leaf = 1) {
    std::vector<std::size_t> rows(X.rows());
    std::iota(rows.begin(), rows.end(), 0);
    return fit(X, y, rows, max_depth, min_leaf);
  }

  double predict(std::span<const double> x) const { return tree.leaf_for(x).value; }
};

struct GbdtConfig {
  int n_trees = 100;
  int max_depth = 3;
  double learning_rate = 0.1;
  std::size_t min_leaf = 1;
  std::uint64_t seed = 0;  // reserved; the exact greedy fit consumes no randomness
};

// Least-squares gradient boosting: mean base value plus shrunken residual trees.
struct GbdtRegressor {
  double base = 0.0;
  double learning_rate = 0.1;
  std::vector<RegressionTree> trees;

  static GbdtRegressor fit(const Matrix& X, std::span<const double> y, const GbdtConfig& cfg) {
    if (X.rows() != y.size())
      throw DimensionError("gbdt: X rows " + std::to_string(X.rows()) + " != target length " +
                           std::to_string(y.size()));
    if (X.rows() == 0) throw ValidationError("gbdt: no training rows");
    if (cfg.n_trees < 0 || cfg.max_depth < 0 || !(cfg.learning_rate > 0.0))
      throw ConfigError("gbdt: invalid boosting configuration");

    GbdtRegressor model;
    model.learning_rate = cfg.learning_rate;
    double base = 0.0;
    for (double v : y) base += v;
    model.base = base / static_cast<double>(y.size());

    std::vector<std::size_t> rows(X.rows());
    std::iota(rows.begin(), rows.end(), 0);
    std::vector<double> residual(y.size());
    std::vector<double> pred(y.size(), model.base);
    for (int t = 0; t < cfg.n_trees; ++t) {
      for (std::size_t i = 0; i < y.size(); ++i) residual[i] = y[i] - pred[i];
      auto tree = RegressionTree::fit(X, residual, rows, cfg.max_depth, cfg.min_leaf);
      for (std::size_t i = 0; i < y.size(); ++i)
        pred[i] += cfg.learning_rate * tree.predict(X.row(i));
      model.trees.push_back(std::move(tree));
    }
    return model;
  }

  double predict(std::span<const double> x) const {
    double v = base;
    for (const auto& t : trees) v += learning_rate * t.predict(x);
    return v;
  }
};

}  // namespace treatkit
