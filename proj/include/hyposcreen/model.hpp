#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "json.hpp"

#include "hyposcreen/matrix.hpp"

namespace hyposcreen {

// Logistic function with the argument clamped so the result stays strictly
// inside (0, 1) in double precision.
inline double sigmoid(double z) {
  if (z > 35.0) z = 35.0;
  if (z < -35.0) z = -35.0;
  return 1.0 / (1.0 + std::exp(-z));
}

// log(1 + exp(z)) without overflow.
inline double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Throws SingleClass unless both 0 and 1 occur.
void require_both_classes(std::span<const int> labels);

// ---------------------------------------------------------------------------
// L2-penalized logistic regression
// ---------------------------------------------------------------------------

struct LogisticModel {
  std::vector<double> weights;
  double intercept = 0.0;
  double l2_strength = 0.0;
  bool converged = false;
  std::size_t iterations = 0;

  double raw_score(std::span<const double> row) const;
  double predict(std::span<const double> row) const { return sigmoid(raw_score(row)); }

  friend bool operator==(const LogisticModel&, const LogisticModel&) = default;
};

// Objective: sum_i [softplus(z_i) - y_i z_i] + (l2/2) |w|^2, z_i = w.x_i + b.
// The intercept is not penalized.
double logistic_objective(const Matrix& x, std::span<const int> y, double l2,
                          std::span<const double> weights, double intercept);

// Gradient of logistic_objective; weights first, intercept last.
std::vector<double> logistic_gradient(const Matrix& x, std::span<const int> y, double l2,
                                      std::span<const double> weights, double intercept);

// Damped Newton with Armijo backtracking. Stops when the gradient infinity
// norm drops below tol. Non-convergence returns the best iterate with
// converged = false.
LogisticModel fit_logistic(const Matrix& x, std::span<const int> y, double l2_strength,
                           double tol = 1e-8, std::size_t max_iter = 100);

// ---------------------------------------------------------------------------
// Quantile binning
// ---------------------------------------------------------------------------

inline constexpr std::size_t kMaxBins = 255;

// Value v falls in bin b where b = number of thresholds strictly below v, so a
// split "bin <= b" is the same as "v <= thresholds[b]".
struct BinMapper {
  std::vector<std::vector<double>> thresholds;

  std::size_t feature_count() const { return thresholds.size(); }
  std::size_t bin_count(std::size_t feature) const { return thresholds[feature].size() + 1; }
  std::uint8_t bin(std::size_t feature, double value) const;
  void bin_row(std::span<const double> row, std::uint8_t* out) const;

  // Feature-major binned copy: out[f * rows + r].
  std::vector<std::uint8_t> transform(const Matrix& x) const;

  friend bool operator==(const BinMapper&, const BinMapper&) = default;
};

BinMapper quantile_bin(const Matrix& x, std::size_t max_bins = kMaxBins);

// ---------------------------------------------------------------------------
// Histogram gradient boosting
// ---------------------------------------------------------------------------

struct BoostParams {
  std::size_t n_trees = 200;
  double learning_rate = 0.1;
  std::size_t max_leaves = 31;
  std::size_t max_depth = 0;  // 0 = unbounded
  std::size_t min_samples_leaf = 20;
  double l2_leaf = 1.0;
  std::size_t max_bins = kMaxBins;
  double feature_fraction = 1.0;       // per-tree column subsample
  std::size_t early_stopping_rounds = 0;  // 0 = off
  double validation_fraction = 0.1;    // held out only when early stopping

  friend bool operator==(const BoostParams&, const BoostParams&) = default;
};

nlohmann::json to_json(const BoostParams& p);
BoostParams boost_params_from_json(const nlohmann::json& j);

struct TreeNode {
  int feature = -1;  // -1 for leaves
  std::uint8_t bin_threshold = 0;
  double threshold = 0.0;  // raw-value equivalent of bin_threshold
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf value before learning-rate scaling
  double cover = 0.0;  // training rows reaching the node

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  // Leaf index reached by a raw row, or by a row already binned with the
  // model's mapper.
  std::size_t leaf_for(const BinMapper& bins, std::span<const double> row) const;
  std::size_t leaf_for_binned(const std::uint8_t* row_bins) const;
  friend bool operator==(const Tree&, const Tree&) = default;
};

struct BoostedModel {
  BinMapper bin_mapper;
  std::vector<Tree> trees;
  double base_score = 0.0;
  double learning_rate = 0.1;
  std::size_t feature_count = 0;
  BoostParams params;
  std::uint64_t seed = 0;
  std::vector<double> train_loss;  // mean log-loss before round 1, then after each round

  double raw_score(std::span<const double> row) const;
  double predict(std::span<const double> row) const { return sigmoid(raw_score(row)); }

  friend bool operator==(const BoostedModel&, const BoostedModel&) = default;
};

struct HistBin {
  double grad = 0.0;
  double hess = 0.0;
  std::uint32_t count = 0;
};

// Gradient/hessian histogram of one feature over the given rows.
std::vector<HistBin> build_histogram(std::span<const std::uint8_t> feature_bins,
                                     std::span<const std::uint32_t> rows,
                                     std::span<const double> grad, std::span<const double> hess,
                                     std::size_t n_bins);

// parent - child, bin by bin.
std::vector<HistBin> subtract_histogram(std::span<const HistBin> parent,
                                        std::span<const HistBin> child);

// Half the reduction in the regularized second-order loss from a split.
inline double split_gain(double gl, double hl, double gr, double hr, double l2) {
  const double g = gl + gr;
  const double h = hl + hr;
  return 0.5 * (gl * gl / (hl + l2) + gr * gr / (hr + l2) - g * g / (h + l2));
}

BoostedModel fit_histgbm(const Matrix& x, std::span<const int> y, const BoostParams& params,
                         std::uint64_t seed);

std::vector<double> predict_proba(const LogisticModel& model, const Matrix& rows);
std::vector<double> predict_proba(const BoostedModel& model, const Matrix& rows);

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

inline constexpr int kModelSchemaVersion = 1;

nlohmann::json to_json(const LogisticModel& m);
LogisticModel logistic_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BoostedModel& m);
BoostedModel boosted_from_json(const nlohmann::json& j);

}  // namespace hyposcreen
