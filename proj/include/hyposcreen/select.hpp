#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "hyposcreen/matrix.hpp"
#include "hyposcreen/model.hpp"

namespace hyposcreen {

enum class SelectionMethod { LrCoef, BoostRfe, BoostRfa };

std::string_view to_string(SelectionMethod method);
std::optional<SelectionMethod> parse_selection_method(std::string_view text);

// Names best first with their scores (|coefficient| or mean |SHAP|).
struct FeatureRanking {
  SelectionMethod method = SelectionMethod::LrCoef;
  std::vector<std::string> names;
  std::vector<double> scores;

  // First n names (all of them when n exceeds the ranking).
  std::vector<std::string> top(std::size_t n) const;
};

nlohmann::json to_json(const FeatureRanking& ranking);

FeatureRanking rank_features_lr(const Matrix& scaled, std::span<const int> labels,
                                std::span<const std::string> names, double l2_strength = 1.0);

// Light booster used inside the elimination/addition loops.
BoostParams selection_booster_defaults();

struct BoostSelectOptions {
  std::size_t n_target = 30;
  std::size_t inner_folds = 3;
  double improvement_eps = 1e-4;
  BoostParams booster = selection_booster_defaults();
};

// Mean per-fold AUROC of the booster under stratified inner folds.
double inner_cv_auroc(const Matrix& x, std::span<const int> labels, const BoostParams& params,
                      std::size_t folds, std::uint64_t seed);

// Drops the least important feature while the inner-CV AUROC holds up. The
// result keeps at most n_target features, ordered by final importance.
FeatureRanking boost_rfe(const Matrix& x, std::span<const int> labels, std::span<const std::string> names,
                         const BoostSelectOptions& options, std::uint64_t seed);

// Walks the all-feature importance order, keeping a feature only when it
// lifts the inner-CV AUROC by more than improvement_eps.
FeatureRanking boost_rfa(const Matrix& x, std::span<const int> labels, std::span<const std::string> names,
                         const BoostSelectOptions& options, std::uint64_t seed);

}  // namespace hyposcreen
