#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hyposcreen/matrix.hpp"

namespace hyposcreen {

struct Demographics {
  std::string cohort;
  std::optional<std::string> sex;
  std::optional<double> age;
  std::optional<std::string> ethnicity;
  std::optional<double> disease_duration;
  friend bool operator==(const Demographics&, const Demographics&) = default;
};

// Feature matrix plus binary labels (1 = PD) and per-row participant metadata.
struct LabeledDataset {
  std::vector<std::string> feature_names;
  Matrix features;
  std::vector<int> labels;
  std::vector<std::string> participant_ids;
  std::vector<Demographics> demographics;

  std::size_t size() const { return labels.size(); }
  std::size_t feature_count() const { return feature_names.size(); }

  LabeledDataset subset(std::span<const std::size_t> rows) const;

  // Keeps the named columns in the given order. Throws MissingFeature.
  LabeledDataset with_features(std::span<const std::string> names) const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

// Metadata columns that precede the feature columns in a feature table.
inline constexpr std::string_view kMetadataColumns[] = {
    "participant_id", "label", "cohort", "sex", "age", "ethnicity", "disease_duration"};

std::string write_feature_table(const LabeledDataset& data);
LabeledDataset parse_feature_table(std::string_view text);
LabeledDataset read_feature_table(const std::filesystem::path& path);

// Column indices for the named features, in the given order. Throws MissingFeature.
std::vector<std::size_t> column_indices(std::span<const std::string> available,
                                        std::span<const std::string> wanted);

}  // namespace hyposcreen
