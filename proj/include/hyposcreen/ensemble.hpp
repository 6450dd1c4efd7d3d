#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hyposcreen/config.hpp"
#include "hyposcreen/matrix.hpp"
#include "hyposcreen/model.hpp"
#include "hyposcreen/preprocess.hpp"
#include "hyposcreen/select.hpp"

namespace hyposcreen {

// Indices of the m highest AUROCs, descending, ties by lower index.
std::vector<std::size_t> select_top_models(std::span<const double> aurocs, std::size_t m);

struct BaseLearner {
  BoostedModel model;
  double validation_auroc = 0.0;
  std::size_t candidate_index = 0;
  friend bool operator==(const BaseLearner&, const BaseLearner&) = default;
};

struct StackingOptions {
  std::vector<BoostParams> grid;
  std::size_t m = 18;
  std::size_t inner_folds = 3;
  double meta_l2 = 1.0;
  bool smote = true;
  std::size_t smote_k = kDefaultSmoteNeighbors;
};

// What the stacking fit did with its rows, for leakage audits.
struct StackingTrace {
  std::vector<std::size_t> inner_fold;         // inner fold that scored each row for the meta layer
  std::vector<std::size_t> inner_synthetic;    // SMOTE rows added per inner training split
  std::size_t final_synthetic = 0;             // SMOTE rows added for the base-model refit
  std::vector<double> candidate_aurocs;        // out-of-fold AUROC per grid point
  std::vector<std::uint64_t> candidate_seeds;
};

struct StackingFit {
  std::vector<BaseLearner> base;  // sorted by validation AUROC
  LogisticModel meta;
  StackingTrace trace;
};

// Scores every grid point by inner-CV out-of-fold AUROC (SMOTE applied to each
// inner training split only), keeps the top m, fits the logistic meta layer on
// their out-of-fold probabilities, then refits the kept boosters on all rows.
StackingFit fit_stacking_ensemble(const Matrix& x, std::span<const int> labels, const StackingOptions& options,
                                  std::uint64_t seed);

// Meta-layer input: one probability column per base model.
Matrix meta_features(std::span<const BaseLearner> base, const Matrix& rows);

struct TrainedEnsemble {
  FittedScaler scaler;  // restricted to the selected features
  std::vector<std::string> selected_features;
  std::vector<BaseLearner> base;
  LogisticModel meta;
  nlohmann::json provenance;

  std::size_t m() const { return base.size(); }
  friend bool operator==(const TrainedEnsemble&, const TrainedEnsemble&) = default;
};

struct PipelineTrace {
  FeatureRanking ranking;
  StackingTrace stacking;
};

// scale -> select (on real rows) -> SMOTE + stacking.
TrainedEnsemble fit_pipeline(const Matrix& x, std::span<const std::string> names, std::span<const int> labels,
                             const PipelineConfig& config, std::uint64_t seed, PipelineTrace* trace = nullptr);

// Rows are matched to the selected features by name. Throws MissingFeature.
std::vector<double> ensemble_predict(const TrainedEnsemble& ensemble, const Matrix& rows,
                                     std::span<const std::string> names);

// The base model with the highest validation AUROC (first in storage order).
const BaseLearner& best_base_model(const TrainedEnsemble& ensemble);

inline constexpr int kEnsembleSchemaVersion = 1;

nlohmann::json to_json(const FittedScaler& scaler);
FittedScaler scaler_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainedEnsemble& ensemble);
TrainedEnsemble ensemble_from_json(const nlohmann::json& j);
void save_ensemble(const TrainedEnsemble& ensemble, const std::filesystem::path& path);
TrainedEnsemble load_ensemble(const std::filesystem::path& path);

}  // namespace hyposcreen
