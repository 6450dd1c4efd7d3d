#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace hyposcreen {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  double threshold = 0.5;

  std::size_t total() const { return tp + fp + tn + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp, fp += o.fp, tn += o.tn, fn += o.fn;
    return *this;
  }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// A metric whose denominator is zero is nullopt, which is not the same as 0.
struct ConfusionMetrics {
  ConfusionCounts counts;
  std::optional<double> accuracy;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::optional<double> ppv;
  std::optional<double> npv;
  friend bool operator==(const ConfusionMetrics&, const ConfusionMetrics&) = default;
};

ConfusionMetrics metrics_from_counts(const ConfusionCounts& counts);

// Positive call iff score >= threshold.
ConfusionMetrics confusion_metrics(std::span<const double> scores, std::span<const int> labels,
                                   double threshold = 0.5);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // +inf for the (0,0) anchor
  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct RocCurve {
  std::vector<RocPoint> points;
  double auroc = 0.0;
  friend bool operator==(const RocCurve&, const RocCurve&) = default;
};

// One operating point per distinct score, from (0,0) to (1,1); area by
// trapezoids, which equals the Mann-Whitney statistic with half credit for ties.
RocCurve roc_auroc(std::span<const double> scores, std::span<const int> labels);

inline double auroc(std::span<const double> scores, std::span<const int> labels) {
  return roc_auroc(scores, labels).auroc;
}

}  // namespace hyposcreen
