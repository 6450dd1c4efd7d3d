#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hyposcreen/explain.hpp"
#include "hyposcreen/matrix.hpp"
#include "hyposcreen/metrics.hpp"

namespace hyposcreen {

// fpr,tpr,threshold; the +inf anchor threshold is written as "inf".
std::string roc_csv(const RocCurve& roc);

// Static line plot of the ROC polyline with the chance diagonal. Throws
// IoError on an empty curve.
std::string roc_svg(const RocCurve& roc);

// row_id,feature,shap_value,feature_value. feature_values holds the rows the
// attributions were computed for, in the same order.
std::string shap_csv(std::span<const ShapAttribution> attributions, std::span<const std::string> row_ids,
                     std::span<const std::string> feature_names, const Matrix& feature_values);

// row_id,pc1,pc2,label
std::string projection_csv(const Projection2D& projection, std::span<const std::string> row_ids,
                           std::span<const int> labels);

// participant_id,probability,predicted
std::string predictions_csv(std::span<const std::string> row_ids, std::span<const double> probabilities,
                            double threshold);

struct PredictionTable {
  std::vector<std::string> row_ids;
  std::vector<double> probabilities;
  std::vector<int> predicted;
};

PredictionTable parse_predictions_csv(std::string_view text);

// Writes text, creating parent directories. Throws IoError.
void write_report(const std::filesystem::path& path, std::string_view text);

}  // namespace hyposcreen
