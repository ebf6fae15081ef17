#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "treatkit/errors.hpp"
#include "treatkit/matrix.hpp"
#include "treatkit/numeric.hpp"

namespace treatkit {

// Linear weights combining J outcomes into one scalar.
struct ScalarizationWeights {
  std::vector<double> weights;

  static ScalarizationWeights ones(std::size_t j) {
    return ScalarizationWeights{std::vector<double>(j, 1.0)};
  }
};

inline double scalarize(std::span<const double> outcomes, const ScalarizationWeights& w) {
  if (outcomes.size() != w.weights.size())
    throw DimensionError("scalarize: outcome length " + std::to_string(outcomes.size()) +
                         " != weight length " + std::to_string(w.weights.size()));
  double s = 0.0;
  for (std::size_t j = 0; j < outcomes.size(); ++j) s += w.weights[j] * outcomes[j];
  return s;
}

// One experiment: N rows of features, an assigned arm (0 = control), J observed
// outcomes, and an optional assignment propensity per row.
struct ExperimentTable {
  Matrix features;                                // N x P
  std::vector<int> treatment;                     // per-row arm index
  Matrix outcomes;                                // N x J
  std::optional<std::vector<double>> propensity;  // each in (0, 1]
  std::vector<std::string> feature_names;         // length P, distinct

  std::size_t n_rows() const { return features.rows(); }
  std::size_t n_features() const { return features.cols(); }
  std::size_t n_outcomes() const { return outcomes.cols(); }

  int max_arm() const {
    int k = 0;
    for (int w : treatment) k = std::max(k, w);
    return k;
  }

  std::size_t arm_count(int arm) const {
    return static_cast<std::size_t>(std::count(treatment.begin(), treatment.end(), arm));
  }

  void validate() const {
    const std::size_t n = features.rows();
    if (n < 1) throw ValidationError("table: need at least one row");
    if (treatment.size() != n)
      throw ValidationError("table: treatment length " + std::to_string(treatment.size()) +
                            " != row count " + std::to_string(n));
    if (outcomes.rows() != n)
      throw ValidationError("table: outcome rows " + std::to_string(outcomes.rows()) +
                            " != row count " + std::to_string(n));
    if (outcomes.cols() < 1) throw ValidationError("table: need at least one outcome column");
    if (feature_names.size() != features.cols())
      throw ValidationError("table: feature_names length " +
                            std::to_string(feature_names.size()) + " != feature count " +
                            std::to_string(features.cols()));
    std::set<std::string> seen;
    for (const auto& name : feature_names)
      if (!seen.insert(name).second)
        throw ValidationError("table: duplicate feature name '" + name + "'");
    for (double x : features.flat())
      if (!std::isfinite(x)) throw ValidationError("table: non-finite feature value");
    for (double y : outcomes.flat())
      if (!std::isfinite(y)) throw ValidationError("table: non-finite outcome value");
    for (std::size_t i = 0; i < n; ++i)
      if (treatment[i] < 0)
        throw ValidationError("table: negative arm index at row " + std::to_string(i + 1));
    if (propensity) {
      if (propensity->size() != n)
        throw ValidationError("table: propensity length " + std::to_string(propensity->size()) +
                              " != row count " + std::to_string(n));
      for (std::size_t i = 0; i < n; ++i) {
        const double p = (*propensity)[i];
        if (!std::isfinite(p) || p <= 0.0 || p > 1.0)
          throw ValidationError("table: propensity at row " + std::to_string(i + 1) +
                                " must lie in (0,1]");
      }
    }
  }

  ExperimentTable subset(std::span<const std::size_t> rows) const {
    ExperimentTable out;
    out.features = Matrix(rows.size(), features.cols());
    out.outcomes = Matrix(rows.size(), outcomes.cols());
    out.treatment.resize(rows.size());
    out.feature_names = feature_names;
    if (propensity) out.propensity = std::vector<double>(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::size_t r = rows[i];
      for (std::size_t c = 0; c < features.cols(); ++c) out.features(i, c) = features(r, c);
      for (std::size_t c = 0; c < outcomes.cols(); ++c) out.outcomes(i, c) = outcomes(r, c);
      out.treatment[i] = treatment[r];
      if (propensity) (*out.propensity)[i] = (*propensity)[r];
    }
    return out;
  }
};

// Predicted potential outcomes for every (row, arm, outcome) cell.
struct PotentialPredictionMatrix {
  Array3 values;  // N x (K+1) x J

  std::size_t n_rows() const { return values.rows(); }
  std::size_t arm_count() const { return values.arms(); }
  std::size_t outcome_count() const { return values.outcomes(); }

  void validate() const {
    if (values.arms() < 1) throw ValidationError("predictions: need at least one arm");
    if (values.outcomes() < 1) throw ValidationError("predictions: need at least one outcome");
    for (double v : values.flat())
      if (!std::isfinite(v)) throw ValidationError("predictions: non-finite value");
  }
};

// Scalarized observed outcome per row.
inline std::vector<double> scalarize_outcomes(const ExperimentTable& table,
                                              const ScalarizationWeights& w) {
  std::vector<double> out(table.n_rows());
  for (std::size_t i = 0; i < table.n_rows(); ++i) out[i] = scalarize(table.outcomes.row(i), w);
  return out;
}

// Scalarized predicted outcome per (row, arm).
inline Matrix scalarize_predictions(const PotentialPredictionMatrix& preds,
                                    const ScalarizationWeights& w) {
  Matrix out(preds.n_rows(), preds.arm_count());
  for (std::size_t i = 0; i < preds.n_rows(); ++i)
    for (std::size_t a = 0; a < preds.arm_count(); ++a)
      out(i, a) = scalarize(preds.values.cell(i, a), w);
  return out;
}

// Disjoint train/validation/test views of one source table.
struct SplitBundle {
  ExperimentTable train, validation, test;
  std::vector<std::size_t> train_index, validation_index, test_index;  // rows in the source
};

// Seeded uniform three-way partition. Test size is round(N * test_frac); the
// validation size is round(remaining * val_frac_of_rest).
inline SplitBundle split_three_way(const ExperimentTable& table, double test_frac = 0.4,
                                   double val_frac_of_rest = 0.3, std::uint64_t seed = 0) {
  if (!(test_frac > 0.0 && test_frac < 1.0))
    throw ConfigError("split: test_frac must lie in (0,1)");
  if (!(val_frac_of_rest > 0.0 && val_frac_of_rest < 1.0))
    throw ConfigError("split: val_frac_of_rest must lie in (0,1)");
  const std::size_t n = table.n_rows();
  const auto n_test = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * test_frac));
  const std::size_t rest = n - std::min(n, n_test);
  const auto n_val = static_cast<std::size_t>(
      std::llround(static_cast<double>(rest) * val_frac_of_rest));
  if (n_test == 0 || n_val == 0 || rest <= n_val)
    throw ConfigError("split: every part must be nonempty (n=" + std::to_string(n) + ")");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  SplitBundle out;
  out.test_index.assign(order.begin(), order.begin() + n_test);
  out.validation_index.assign(order.begin() + n_test, order.begin() + n_test + n_val);
  out.train_index.assign(order.begin() + n_test + n_val, order.end());
  std::sort(out.test_index.begin(), out.test_index.end());
  std::sort(out.validation_index.begin(), out.validation_index.end());
  std::sort(out.train_index.begin(), out.train_index.end());
  out.train = table.subset(out.train_index);
  out.validation = table.subset(out.validation_index);
  out.test = table.subset(out.test_index);
  return out;
}

}  // namespace treatkit
