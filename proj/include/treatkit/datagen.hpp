#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "treatkit/data.hpp"
#include "treatkit/evaluation.hpp"
#include "treatkit/parallel.hpp"

namespace treatkit {

// Named synthetic experiment family. Each generator fixes its own feature and
// arm structure; n, noise, and seed are free.
struct SyntheticSpec {
  std::string generator = "synthetic-a";
  std::size_t n = 10000;
  double noise_sd = 0.01;
  std::uint64_t seed = 0;
};

// Two standard-normal features, one outcome, two arms assigned by a fair
// coin. Baseline x0/2 + x1, treatment effect x0/2, so the oracle action is
// decided by the sign of x0 (up to noise).
inline std::pair<ExperimentTable, OracleOutcomes> gen_synthetic_a(std::size_t n,
                                                                  std::uint64_t seed,
                                                                  double noise_sd = 0.01) {
  if (n < 2) throw ConfigError("synthetic-a: need n >= 2");
  if (noise_sd < 0.0) throw ConfigError("synthetic-a: noise_sd must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  ExperimentTable table;
  table.features = Matrix(n, 2);
  table.outcomes = Matrix(n, 1);
  table.treatment.resize(n);
  table.propensity = std::vector<double>(n, 0.5);
  table.feature_names = {"feature0", "feature1"};
  OracleOutcomes oracle;
  oracle.potential = Array3(n, 2, 1);

  for (std::size_t i = 0; i < n; ++i) {
    const double x0 = stdnorm(rng);
    const double x1 = stdnorm(rng);
    table.features(i, 0) = x0;
    table.features(i, 1) = x1;
    const double eta = x0 / 2.0 + x1;
    const double kappa = x0 / 2.0;
    for (int w = 0; w <= 1; ++w) {
      const double eps = noise_sd > 0.0 ? noise_sd * stdnorm(rng) : 0.0;
      oracle.potential(i, static_cast<std::size_t>(w), 0) =
          eta + (static_cast<double>(w) - 0.5) * kappa + eps;
    }
    const int w = coin(rng) ? 1 : 0;
    table.treatment[i] = w;
    table.outcomes(i, 0) = oracle.potential(i, static_cast<std::size_t>(w), 0);
  }
  return {std::move(table), std::move(oracle)};
}

// Stylized trial where the drug only helps patients who start it soon after
// symptom onset: the effect crosses zero at 4.5 days and two lab values shade
// the baseline. One outcome, two arms, fair-coin assignment.
inline std::pair<ExperimentTable, OracleOutcomes> gen_covid_like(std::size_t n,
                                                                 std::uint64_t seed,
                                                                 double noise_sd = 0.01) {
  if (n < 2) throw ConfigError("covid-like: need n >= 2");
  if (noise_sd < 0.0) throw ConfigError("covid-like: noise_sd must be >= 0");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> stdnorm(0.0, 1.0);
  std::uniform_real_distribution<double> udays(0.0, 14.0);
  std::bernoulli_distribution coin(0.5);

  ExperimentTable table;
  table.features = Matrix(n, 3);
  table.outcomes = Matrix(n, 1);
  table.treatment.resize(n);
  table.propensity = std::vector<double>(n, 0.5);
  table.feature_names = {"days_to_trial", "ast_level", "ldh_level"};
  OracleOutcomes oracle;
  oracle.potential = Array3(n, 2, 1);

  auto sigmoid = [](double z) { return 1.0 / (1.0 + std::exp(-z)); };
  for (std::size_t i = 0; i < n; ++i) {
    const double days = udays(rng);
    const double ast = 40.0 + 15.0 * stdnorm(rng);
    const double ldh = 250.0 + 80.0 * stdnorm(rng);
    table.features(i, 0) = days;
    table.features(i, 1) = ast;
    table.features(i, 2) = ldh;
    const double eta = 0.5 - 0.05 * days / 14.0 + 0.02 * sigmoid((ast - 40.0) / 15.0);
    const double kappa =
        0.02 - 0.04 * sigmoid(1.5 * (days - 4.5)) + 0.004 * std::tanh((ldh - 250.0) / 160.0);
    for (int w = 0; w <= 1; ++w) {
      const double eps = noise_sd > 0.0 ? noise_sd * stdnorm(rng) : 0.0;
      oracle.potential(i, static_cast<std::size_t>(w), 0) =
          eta + (static_cast<double>(w) - 0.5) * kappa + eps;
    }
    const int w = coin(rng) ? 1 : 0;
    table.treatment[i] = w;
    table.outcomes(i, 0) = oracle.potential(i, static_cast<std::size_t>(w), 0);
  }
  return {std::move(table), std::move(oracle)};
}

inline std::pair<ExperimentTable, OracleOutcomes> generate(const SyntheticSpec& spec) {
  if (spec.generator == "synthetic-a") return gen_synthetic_a(spec.n, spec.seed, spec.noise_sd);
  if (spec.generator == "covid-like") return gen_covid_like(spec.n, spec.seed, spec.noise_sd);
  throw ConfigError("unknown generator '" + spec.generator + "'");
}

// Semi-synthetic potential outcomes for randomized data: each row's potential
// under another arm is the mean outcome of its k nearest rows of that arm by
// Euclidean feature distance (ties to the lower row index); the own-arm entry
// is the observed outcome. The scan is exact.
inline OracleOutcomes knn_potential_outcomes(const ExperimentTable& table,
                                             std::size_t k_neighbors = 5,
                                             bool standardize = false) {
  table.validate();
  if (k_neighbors < 1) throw ConfigError("knn: k_neighbors must be >= 1");
  const std::size_t n = table.n_rows();
  const std::size_t arms = static_cast<std::size_t>(table.max_arm()) + 1;
  const std::size_t n_out = table.n_outcomes();

  std::vector<std::vector<std::size_t>> arm_rows(arms);
  for (std::size_t i = 0; i < n; ++i)
    arm_rows[static_cast<std::size_t>(table.treatment[i])].push_back(i);
  for (std::size_t k = 0; k < arms; ++k)
    if (arm_rows[k].size() < k_neighbors)
      throw InsufficientOverlapError("knn: arm " + std::to_string(k) + " has " +
                                     std::to_string(arm_rows[k].size()) +
                                     " rows; need at least " + std::to_string(k_neighbors));

  std::vector<double> scale(table.n_features(), 1.0);
  if (standardize) {
    std::vector<double> col(n);
    for (std::size_t f = 0; f < table.n_features(); ++f) {
      for (std::size_t i = 0; i < n; ++i) col[i] = table.features(i, f);
      const double sd = std::sqrt(variance_population(col));
      if (sd > 0.0) scale[f] = 1.0 / sd;
    }
  }

  OracleOutcomes oracle;
  oracle.potential = Array3(n, arms, n_out);
  parallel_for(n, [&](std::size_t i) {
    const auto xi = table.features.row(i);
    for (std::size_t k = 0; k < arms; ++k) {
      if (static_cast<int>(k) == table.treatment[i]) {
        for (std::size_t j = 0; j < n_out; ++j)
          oracle.potential(i, k, j) = table.outcomes(i, j);
        continue;
      }
      std::vector<std::pair<double, std::size_t>> dist;
      dist.reserve(arm_rows[k].size());
      for (std::size_t r : arm_rows[k]) {
        double d2 = 0.0;
        for (std::size_t f = 0; f < table.n_features(); ++f) {
          const double d = (xi[f] - table.features(r, f)) * scale[f];
          d2 += d * d;
        }
        dist.emplace_back(d2, r);
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_neighbors),
                        dist.end());
      for (std::size_t j = 0; j < n_out; ++j) {
        double sum = 0.0;
        for (std::size_t m = 0; m < k_neighbors; ++m) sum += table.outcomes(dist[m].second, j);
        oracle.potential(i, k, j) = sum / static_cast<double>(k_neighbors);
      }
    }
  });
  return oracle;
}

}  // namespace treatkit
