#pragma once

#include <span>
#include <string>
#include <vector>

#include "treatkit/data.hpp"
#include "treatkit/gbdt.hpp"
#include "treatkit/parallel.hpp"

namespace treatkit {

struct TLearnerConfig {
  GbdtConfig gbdt;
  std::size_t min_arm_rows = 20;
};

// One boosted regressor per (arm, outcome) pair, each trained only on the
// rows observed under its own arm.
struct TLearnerModel {
  std::size_t arm_count = 0;
  std::size_t outcome_count = 0;
  std::size_t feature_count = 0;
  std::vector<std::vector<GbdtRegressor>> regressors;  // [arm][outcome]
};

inline TLearnerModel fit_tlearner(const ExperimentTable& train, const TLearnerConfig& cfg = {}) {
  train.validate();
  const std::size_t arms = static_cast<std::size_t>(train.max_arm()) + 1;
  const std::size_t n_out = train.n_outcomes();

  std::vector<std::vector<std::size_t>> arm_rows(arms);
  for (std::size_t i = 0; i < train.n_rows(); ++i)
    arm_rows[static_cast<std::size_t>(train.treatment[i])].push_back(i);
  for (std::size_t k = 0; k < arms; ++k)
    if (arm_rows[k].size() < cfg.min_arm_rows)
      throw InsufficientOverlapError("t-learner: arm " + std::to_string(k) + " has " +
                                     std::to_string(arm_rows[k].size()) + " rows; need at least " +
                                     std::to_string(cfg.min_arm_rows));

  TLearnerModel model;
  model.arm_count = arms;
  model.outcome_count = n_out;
  model.feature_count = train.n_features();
  model.regressors.assign(arms, std::vector<GbdtRegressor>(n_out));

  parallel_for(arms * n_out, [&](std::size_t slot) {
    const std::size_t k = slot / n_out;
    const std::size_t j = slot % n_out;
    const auto& rows = arm_rows[k];
    Matrix x(rows.size(), train.n_features());
    std::vector<double> y(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      for (std::size_t c = 0; c < train.n_features(); ++c)
        x(i, c) = train.features(rows[i], c);
      y[i] = train.outcomes(rows[i], j);
    }
    model.regressors[k][j] = GbdtRegressor::fit(x, y, cfg.gbdt);
  });
  return model;
}

// Full potential-outcome prediction grid; reads only the feature matrix.
inline PotentialPredictionMatrix predict_potential(const TLearnerModel& model, const Matrix& X) {
  if (X.rows() > 0 && X.cols() != model.feature_count)
    throw DimensionError("predict: feature count " + std::to_string(X.cols()) +
                         " != model feature count " + std::to_string(model.feature_count));
  PotentialPredictionMatrix out;
  out.values = Array3(X.rows(), model.arm_count, model.outcome_count);
  parallel_for(X.rows(), [&](std::size_t i) {
    for (std::size_t k = 0; k < model.arm_count; ++k)
      for (std::size_t j = 0; j < model.outcome_count; ++j)
        out.values(i, k, j) = model.regressors[k][j].predict(X.row(i));
  });
  return out;
}

// Row labels of the prediction-implied policy: the arm with the highest
// scalarized predicted outcome, ties toward the lowest arm index.
inline std::vector<int> naive_hte_policy(const PotentialPredictionMatrix& preds,
                                         const ScalarizationWeights& weights) {
  std::vector<int> labels(preds.n_rows());
  for (std::size_t i = 0; i < preds.n_rows(); ++i) {
    int best = 0;
    double best_v = scalarize(preds.values.cell(i, 0), weights);
    for (std::size_t k = 1; k < preds.arm_count(); ++k) {
      const double v = scalarize(preds.values.cell(i, k), weights);
      if (v > best_v) {
        best = static_cast<int>(k);
        best_v = v;
      }
    }
    labels[i] = best;
  }
  return labels;
}

}  // namespace treatkit
