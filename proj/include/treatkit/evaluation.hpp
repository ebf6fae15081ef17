#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "treatkit/data.hpp"
#include "treatkit/matrix.hpp"
#include "treatkit/numeric.hpp"
#include "treatkit/tree.hpp"

namespace treatkit {

// True potential outcomes for every (row, arm, outcome) cell; available for
// synthetic and semi-synthetic data only.
struct OracleOutcomes {
  Array3 potential;  // N x (K+1) x J

  void validate() const {
    for (double v : potential.flat())
      if (!std::isfinite(v)) throw ValidationError("oracle: non-finite potential outcome");
  }
};

namespace detail {

template <typename P>
int checked_arm(const P& policy, std::span<const double> x, std::size_t arms) {
  const int arm = policy_assign(policy, x);
  if (arm < 0 || static_cast<std::size_t>(arm) >= arms)
    throw DimensionError("policy assigned arm " + std::to_string(arm) + " but oracle has " +
                         std::to_string(arms) + " arms");
  return arm;
}

}  // namespace detail

// Summed gap between each row's best potential outcome and the outcome under
// the policy's assignment.
template <typename P>
double regret(const P& policy, const Matrix& features, const OracleOutcomes& oracle,
              const ScalarizationWeights& weights) {
  if (features.rows() != oracle.potential.rows())
    throw DimensionError("regret: feature rows " + std::to_string(features.rows()) +
                         " != oracle rows " + std::to_string(oracle.potential.rows()));
  const std::size_t arms = oracle.potential.arms();
  double total = 0.0;
  std::vector<double> scal(arms);
  for (std::size_t i = 0; i < features.rows(); ++i) {
    for (std::size_t a = 0; a < arms; ++a)
      scal[a] = scalarize(oracle.potential.cell(i, a), weights);
    double best = scal[0];
    for (std::size_t a = 1; a < arms; ++a)
      if (scal[a] > best) best = scal[a];
    const int arm = detail::checked_arm(policy, features.row(i), arms);
    total += best - scal[static_cast<std::size_t>(arm)];
  }
  return total;
}

template <typename P>
double regret_per_capita(const P& policy, const Matrix& features, const OracleOutcomes& oracle,
                         const ScalarizationWeights& weights) {
  return regret(policy, features, oracle, weights) / static_cast<double>(features.rows());
}

// Mean scalarized potential outcome under the policy's assignments.
template <typename P>
double true_policy_value(const P& policy, const Matrix& features, const OracleOutcomes& oracle,
                         const ScalarizationWeights& weights) {
  if (features.rows() != oracle.potential.rows())
    throw DimensionError("policy value: feature rows " + std::to_string(features.rows()) +
                         " != oracle rows " + std::to_string(oracle.potential.rows()));
  const std::size_t arms = oracle.potential.arms();
  double total = 0.0;
  for (std::size_t i = 0; i < features.rows(); ++i) {
    const int arm = detail::checked_arm(policy, features.row(i), arms);
    total += scalarize(oracle.potential.cell(i, static_cast<std::size_t>(arm)), weights);
  }
  return total / static_cast<double>(features.rows());
}

// Root-mean-square error between predicted and true per-row effects.
inline double pehe(std::span<const double> predicted_effects,
                   std::span<const double> true_effects) {
  if (predicted_effects.size() != true_effects.size())
    throw DimensionError("pehe: predicted length " + std::to_string(predicted_effects.size()) +
                         " != true length " + std::to_string(true_effects.size()));
  double s = 0.0;
  for (std::size_t i = 0; i < predicted_effects.size(); ++i) {
    const double d = predicted_effects[i] - true_effects[i];
    s += d * d;
  }
  return std::sqrt(s / static_cast<double>(predicted_effects.size()));
}

// Within: size-weighted mean of per-segment population variances of the
// per-row effects. Between: population variance of the segment means.
inline std::pair<double, double> subgroup_variances(
    const std::vector<std::vector<std::size_t>>& segment_rows,
    std::span<const double> effects) {
  if (segment_rows.empty()) throw ValidationError("subgroup variances: no segments");
  std::vector<bool> seen(effects.size(), false);
  std::size_t covered = 0;
  for (const auto& rows : segment_rows) {
    if (rows.empty()) throw ValidationError("subgroup variances: empty segment");
    for (std::size_t r : rows) {
      if (r >= effects.size() || seen[r])
        throw ValidationError("subgroup variances: segments must partition the rows");
      seen[r] = true;
      ++covered;
    }
  }
  if (covered != effects.size())
    throw ValidationError("subgroup variances: segments must partition the rows");

  std::vector<double> seg_means;
  seg_means.reserve(segment_rows.size());
  double within = 0.0;
  std::vector<double> buf;
  for (const auto& rows : segment_rows) {
    buf.clear();
    for (std::size_t r : rows) buf.push_back(effects[r]);
    seg_means.push_back(mean(buf));
    within += static_cast<double>(rows.size()) * variance_population(buf);
  }
  within /= static_cast<double>(effects.size());
  const double between = variance_population(seg_means);
  return {within, between};
}

inline std::pair<double, double> subgroup_variances(const std::vector<Segment>& segments,
                                                    std::span<const double> effects) {
  std::vector<std::vector<std::size_t>> rows;
  rows.reserve(segments.size());
  for (const auto& s : segments) rows.push_back(s.rows);
  return subgroup_variances(rows, effects);
}

}  // namespace treatkit
