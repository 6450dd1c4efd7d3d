#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hyposcreen/matrix.hpp"

namespace hyposcreen {

enum class ScalerKind { MinMax, Standard, None };

std::string_view to_string(ScalerKind kind);
std::optional<ScalerKind> parse_scaler_kind(std::string_view text);

// Per-feature parameters: (min, max) for MinMax, (mean, population sd) for Standard.
struct FittedScaler {
  ScalerKind kind = ScalerKind::None;
  std::vector<std::string> feature_names;
  std::vector<double> first;
  std::vector<double> second;

  friend bool operator==(const FittedScaler&, const FittedScaler&) = default;
};

FittedScaler fit_scaler(ScalerKind kind, const Matrix& train, std::vector<std::string> feature_names);

// Constant columns map to 0. Test values outside the training range are not clamped.
Matrix apply_scaler(const FittedScaler& scaler, const Matrix& data,
                    std::span<const std::string> feature_names);

struct SmoteResult {
  Matrix synthetic;
  std::vector<std::size_t> seed_row;      // minority row each synthetic grew from
  std::vector<std::size_t> neighbor_row;  // the neighbour it moved toward
  std::vector<double> gap;                // interpolation fraction in [0, 1)
};

inline constexpr std::size_t kDefaultSmoteNeighbors = 5;

// Indices of the k nearest other rows of `points` to row i (Euclidean), ties
// broken by lower row index.
std::vector<std::vector<std::size_t>> nearest_neighbors(const Matrix& points, std::size_t k);

// Emits majority_count - minority.rows() synthetic minority rows.
SmoteResult smote_oversample(const Matrix& minority, std::size_t majority_count,
                             std::size_t k_neighbors, std::uint64_t seed);

struct BalancedData {
  Matrix features;
  std::vector<int> labels;
  std::vector<bool> synthetic;  // provenance per row; real rows come first
  std::size_t synthetic_count = 0;
};

// Appends SMOTE rows for whichever class is smaller. Equal classes pass through.
BalancedData balance_with_smote(const Matrix& features, std::span<const int> labels,
                                std::size_t k_neighbors, std::uint64_t seed);

struct FoldPlan {
  std::size_t k = 0;
  std::vector<std::size_t> assignments;
  std::uint64_t seed = 0;

  std::vector<std::size_t> test_indices(std::size_t fold) const;
  std::vector<std::size_t> train_indices(std::size_t fold) const;
};

// Seeded per-class shuffle followed by round-robin fold assignment.
FoldPlan stratified_kfold(std::span<const int> labels, std::size_t k, std::uint64_t seed);

}  // namespace hyposcreen
