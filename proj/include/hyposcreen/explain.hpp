#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hyposcreen/matrix.hpp"
#include "hyposcreen/model.hpp"

namespace hyposcreen {

// Local accuracy: base_value + sum(values) equals the model's raw score.
struct ShapAttribution {
  std::vector<double> values;
  double base_value = 0.0;
  std::size_t row_id = 0;
};

// Cover-weighted mean leaf value of one tree (unscaled).
double tree_expectation(const Tree& tree);

// Expected raw score: base_score + learning_rate * sum of tree expectations.
double shap_base_value(const BoostedModel& model);

// Path-dependent TreeSHAP on the raw (log-odds) scale.
ShapAttribution tree_shap(const BoostedModel& model, std::span<const double> row, std::size_t row_id = 0);

inline constexpr std::size_t kMaxOracleFeatures = 15;

// Shapley values by enumerating all 2^d coalitions under the same
// cover-weighted value function. Exponential; verification only.
ShapAttribution exact_shapley_oracle(const BoostedModel& model, std::span<const double> row,
                                     std::size_t row_id = 0);

// Per-feature mean |SHAP| over the rows of x.
std::vector<double> mean_abs_shap(const BoostedModel& model, const Matrix& x);

struct Projection2D {
  Matrix components;                  // n_components x d, zero loadings on dropped columns
  Matrix coordinates;                 // n x n_components
  std::vector<double> explained;      // fraction of total standardized variance
  std::vector<std::size_t> dropped;   // constant columns left out of the fit
};

// Standardize columns, then take the leading eigenvectors of the correlation
// matrix by deflated power iteration. Each component's largest-magnitude
// loading is made positive.
Projection2D pca_project(const Matrix& x, std::size_t n_components = 2);

// Mean silhouette over all points for a two-label clustering. Points in a
// singleton cluster contribute 0.
double silhouette_score(const Matrix& points, std::span<const int> labels);

}  // namespace hyposcreen
