#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hyposcreen {

// Every failure the library reports carries one of these codes. The CLI maps
// the category of the code onto its exit status.
enum class ErrorCode {
  // ingest
  MissingFile,
  SchemaViolation,
  DuplicateEntry,
  MissingColumn,
  NonNumericCell,
  OutOfRange,
  EmptyFile,
  RaggedFrame,
  // featurize
  EmptySeries,
  DegenerateDomain,
  LengthMismatch,
  DegenerateIrisDistance,
  IndexOutOfRange,
  IncompleteExpression,
  // preprocess
  EmptyMatrix,
  ColumnMismatch,
  TooFewMinority,
  ClassTooSmall,
  // model / select / ensemble
  SingleClass,
  NonConvergence,
  DegenerateParams,
  WidthMismatch,
  MTooLarge,
  MissingFeature,
  // evaluate
  Empty,
  // stats
  ZeroPooledVariance,
  DegenerateMargins,
  ConstantInput,
  TooShort,
  ZeroExpectedCell,
  UnknownColumn,
  EmptySubgroup,
  // explain
  TooManyFeatures,
  TooFewRows,
  SingleCluster,
  // cli
  BadShape,
  IoError,
  UsageError,
  InternalError,
};

enum class ErrorCategory { Usage, Data, Internal };

std::string_view error_code_name(ErrorCode code);
ErrorCategory error_category(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hyposcreen
