#include "hyposcreen/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hyposcreen/error.hpp"
#include "hyposcreen/kernels.hpp"
#include "hyposcreen/rng.hpp"

namespace hyposcreen {

std::string_view to_string(ScalerKind kind) {
  switch (kind) {
    case ScalerKind::MinMax: return "minmax";
    case ScalerKind::Standard: return "standard";
    case ScalerKind::None: return "none";
  }
  return "";
}

std::optional<ScalerKind> parse_scaler_kind(std::string_view text) {
  for (auto k : {ScalerKind::MinMax, ScalerKind::Standard, ScalerKind::None})
    if (to_string(k) == text) return k;
  return std::nullopt;
}

FittedScaler fit_scaler(ScalerKind kind, const Matrix& train, std::vector<std::string> feature_names) {
  if (train.rows() == 0) throw Error(ErrorCode::EmptyMatrix, "cannot fit a scaler on zero rows");
  if (feature_names.size() != train.cols())
    throw Error(ErrorCode::ColumnMismatch, "feature name count differs from matrix width");

  FittedScaler scaler;
  scaler.kind = kind;
  scaler.feature_names = std::move(feature_names);
  const std::size_t d = train.cols();
  scaler.first.assign(d, 0.0);
  scaler.second.assign(d, 0.0);
  if (kind == ScalerKind::None) return scaler;

  const double n = static_cast<double>(train.rows());
  for (std::size_t j = 0; j < d; ++j) {
    const auto col = train.column(j);
    if (kind == ScalerKind::MinMax) {
      const auto [mn, mx] = std::minmax_element(col.begin(), col.end());
      scaler.first[j] = *mn;
      scaler.second[j] = *mx;
    } else {
      // Sorted accumulation makes the result independent of row order.
      auto sorted = col;
      std::sort(sorted.begin(), sorted.end());
      double mean = 0.0;
      for (double v : sorted) mean += v;
      mean /= n;
      std::vector<double> sq(sorted.size());
      for (std::size_t i = 0; i < sorted.size(); ++i) sq[i] = (sorted[i] - mean) * (sorted[i] - mean);
      std::sort(sq.begin(), sq.end());
      double var = 0.0;
      for (double v : sq) var += v;
      scaler.first[j] = mean;
      scaler.second[j] = std::sqrt(var / n);
    }
  }
  return scaler;
}

Matrix apply_scaler(const FittedScaler& scaler, const Matrix& data,
                    std::span<const std::string> feature_names) {
  if (feature_names.size() != scaler.feature_names.size() ||
      !std::equal(feature_names.begin(), feature_names.end(), scaler.feature_names.begin()))
    throw Error(ErrorCode::ColumnMismatch, "columns differ from those the scaler was fitted on");
  if (data.cols() != scaler.feature_names.size() && data.rows() > 0)
    throw Error(ErrorCode::ColumnMismatch, "matrix width differs from scaler width");

  Matrix out = data;
  if (scaler.kind == ScalerKind::None) return out;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (scaler.kind == ScalerKind::MinMax) {
        const double range = scaler.second[j] - scaler.first[j];
        row[j] = range > 0.0 ? (row[j] - scaler.first[j]) / range : 0.0;
      } else {
        const double sd = scaler.second[j];
        row[j] = sd > 0.0 ? (row[j] - scaler.first[j]) / sd : 0.0;
      }
    }
  }
  return out;
}

std::vector<std::vector<std::size_t>> nearest_neighbors(const Matrix& points, std::size_t k) {
  const std::size_t n = points.rows();
  std::vector<std::vector<std::size_t>> out(n);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < n; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) dist.emplace_back(kernels::squared_distance(points.row(i), points.row(j)), j);
    const std::size_t take = std::min(k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(take), dist.end());
    for (std::size_t t = 0; t < take; ++t) out[i].push_back(dist[t].second);
  }
  return out;
}

SmoteResult smote_oversample(const Matrix& minority, std::size_t majority_count,
                             std::size_t k_neighbors, std::uint64_t seed) {
  const std::size_t m = minority.rows();
  if (m < 2) throw Error(ErrorCode::TooFewMinority, "SMOTE needs at least 2 minority rows");
  if (k_neighbors == 0) throw Error(ErrorCode::DegenerateParams, "SMOTE needs k_neighbors >= 1");
  const std::size_t k = std::min(k_neighbors, m - 1);

  SmoteResult result;
  result.synthetic = Matrix(0, minority.cols());
  if (majority_count <= m) return result;
  const std::size_t needed = majority_count - m;
  const auto neighbors = nearest_neighbors(minority, k);

  Rng rng(seed);
  std::vector<double> row(minority.cols());
  for (std::size_t s = 0; s < needed; ++s) {
    const std::size_t i = static_cast<std::size_t>(rng.below(m));
    const std::size_t nn = neighbors[i][static_cast<std::size_t>(rng.below(k))];
    const double gap = rng.uniform();
    const auto a = minority.row(i);
    const auto b = minority.row(nn);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] = a[j] + gap * (b[j] - a[j]);
    result.synthetic.append_row(row);
    result.seed_row.push_back(i);
    result.neighbor_row.push_back(nn);
    result.gap.push_back(gap);
  }
  return result;
}

BalancedData balance_with_smote(const Matrix& features, std::span<const int> labels,
                                std::size_t k_neighbors, std::uint64_t seed) {
  BalancedData out;
  out.features = features;
  out.labels.assign(labels.begin(), labels.end());
  out.synthetic.assign(labels.size(), false);

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  if (pos.size() == neg.size()) return out;
  const bool pos_minor = pos.size() < neg.size();
  const auto& minority_idx = pos_minor ? pos : neg;
  const std::size_t majority = pos_minor ? neg.size() : pos.size();

  const auto smote = smote_oversample(features.select_rows(minority_idx), majority, k_neighbors, seed);
  for (std::size_t s = 0; s < smote.synthetic.rows(); ++s) {
    out.features.append_row(smote.synthetic.row(s));
    out.labels.push_back(pos_minor ? 1 : 0);
    out.synthetic.push_back(true);
  }
  out.synthetic_count = smote.synthetic.rows();
  return out;
}

std::vector<std::size_t> FoldPlan::test_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::train_indices(std::size_t fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold) out.push_back(i);
  return out;
}

FoldPlan stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw Error(ErrorCode::DegenerateParams, "k-fold needs k >= 2");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(labels.size(), 0);

  std::size_t offset = 0;
  for (int cls : {0, 1}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(i);
    if (members.size() < k)
      throw Error(ErrorCode::ClassTooSmall, "class " + std::to_string(cls) + " has " +
                                                std::to_string(members.size()) + " samples, k = " +
                                                std::to_string(k));
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(cls)));
    rng.shuffle(std::span(members));
    for (std::size_t j = 0; j < members.size(); ++j) plan.assignments[members[j]] = (offset + j) % k;
    offset = (offset + members.size()) % k;
  }
  return plan;
}

}  // namespace hyposcreen
