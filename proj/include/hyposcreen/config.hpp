#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "hyposcreen/ingest.hpp"
#include "hyposcreen/model.hpp"
#include "hyposcreen/preprocess.hpp"
#include "hyposcreen/select.hpp"

namespace hyposcreen {

struct SelectionConfig {
  SelectionMethod method = SelectionMethod::LrCoef;
  std::size_t n = 30;
  double l2_strength = 1.0;
  std::size_t inner_folds = 3;
  double improvement_eps = 1e-4;
  BoostParams booster = selection_booster_defaults();
  friend bool operator==(const SelectionConfig&, const SelectionConfig&) = default;
};

struct SmoteConfig {
  bool enabled = true;
  std::size_t k_neighbors = 5;
  friend bool operator==(const SmoteConfig&, const SmoteConfig&) = default;
};

struct EnsembleConfig {
  std::vector<BoostParams> grid;
  std::size_t m = 18;
  std::size_t inner_folds = 3;
  double meta_l2 = 1.0;
  friend bool operator==(const EnsembleConfig&, const EnsembleConfig&) = default;
};

// 18 boosters: learning_rate {0.05, 0.1, 0.2} x max_leaves {7, 15, 31} x
// min_samples_leaf {10, 20}.
std::vector<BoostParams> default_candidate_grid();

struct PipelineConfig {
  std::vector<Expression> expressions{Expression::Smile, Expression::Disgust, Expression::Surprise};
  ScalerKind scaler = ScalerKind::MinMax;
  SelectionConfig selection;
  SmoteConfig smote;
  EnsembleConfig ensemble{default_candidate_grid()};
  std::size_t folds = 10;
  std::size_t bootstrap_seeds = 40;
  std::uint64_t seed = 42;
  double threshold = 0.5;
  std::size_t entropy_bins = 10;
  std::string landmark_map;  // empty = built-in MediaPipe indices
  double min_confidence = 0.0;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

// Throws DegenerateParams / SchemaViolation when an invariant fails.
void validate(const PipelineConfig& config);

nlohmann::json to_json(const PipelineConfig& config);

// Missing keys take their defaults; unknown keys are rejected.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);

// Stable hash of the canonical JSON form.
std::uint64_t config_hash(const PipelineConfig& config);

// True for integral JSON numbers >= 0, whether parsed or built in code
// (literals built in code are signed).
bool is_nonnegative_integer(const nlohmann::json& j);

// FNV-1a 64-bit.
std::uint64_t fnv1a(std::string_view bytes);

}  // namespace hyposcreen
