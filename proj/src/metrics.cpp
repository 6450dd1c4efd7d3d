#include "hyposcreen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "hyposcreen/error.hpp"
#include "hyposcreen/model.hpp"

namespace hyposcreen {

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

void check_aligned(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size())
    throw Error(ErrorCode::LengthMismatch, "score count differs from label count");
  if (scores.empty()) throw Error(ErrorCode::Empty, "no scores");
  for (double s : scores)
    if (std::isnan(s)) throw Error(ErrorCode::OutOfRange, "score is NaN");
}

}  // namespace

ConfusionMetrics metrics_from_counts(const ConfusionCounts& c) {
  ConfusionMetrics m;
  m.counts = c;
  m.accuracy = ratio(c.tp + c.tn, c.total());
  m.sensitivity = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  m.ppv = ratio(c.tp, c.tp + c.fp);
  m.npv = ratio(c.tn, c.tn + c.fn);
  return m;
}

ConfusionMetrics confusion_metrics(std::span<const double> scores, std::span<const int> labels,
                                   double threshold) {
  check_aligned(scores, labels);
  ConfusionCounts c;
  c.threshold = threshold;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool called = scores[i] >= threshold;
    if (labels[i] == 1) (called ? c.tp : c.fn)++;
    else (called ? c.fp : c.tn)++;
  }
  return metrics_from_counts(c);
}

RocCurve roc_auroc(std::span<const double> scores, std::span<const int> labels) {
  check_aligned(scores, labels);
  require_both_classes(labels);

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::size_t positives = 0;
  for (int y : labels) positives += y == 1;
  const std::size_t negatives = labels.size() - positives;
  const double p = static_cast<double>(positives);
  const double n = static_cast<double>(negatives);

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  // Twice the area in units of (positive, negative) pairs, kept exact in integers.
  std::size_t doubled_pairs = 0;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    const std::size_t tp_before = tp, fp_before = fp;
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? tp : fp)++;
    doubled_pairs += (fp - fp_before) * (tp + tp_before);
    curve.points.push_back({static_cast<double>(fp) / n, static_cast<double>(tp) / p, s});
  }
  curve.auroc = static_cast<double>(doubled_pairs) / (2.0 * p * n);
  return curve;
}

}  // namespace hyposcreen
