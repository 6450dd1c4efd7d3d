#include "hyposcreen/error.hpp"

namespace hyposcreen {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DuplicateEntry: return "DuplicateEntry";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonNumericCell: return "NonNumericCell";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::RaggedFrame: return "RaggedFrame";
    case ErrorCode::EmptySeries: return "EmptySeries";
    case ErrorCode::DegenerateDomain: return "DegenerateDomain";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::DegenerateIrisDistance: return "DegenerateIrisDistance";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::IncompleteExpression: return "IncompleteExpression";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::ColumnMismatch: return "ColumnMismatch";
    case ErrorCode::TooFewMinority: return "TooFewMinority";
    case ErrorCode::ClassTooSmall: return "ClassTooSmall";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::DegenerateParams: return "DegenerateParams";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::MTooLarge: return "MTooLarge";
    case ErrorCode::MissingFeature: return "MissingFeature";
    case ErrorCode::Empty: return "Empty";
    case ErrorCode::ZeroPooledVariance: return "ZeroPooledVariance";
    case ErrorCode::DegenerateMargins: return "DegenerateMargins";
    case ErrorCode::ConstantInput: return "ConstantInput";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::ZeroExpectedCell: return "ZeroExpectedCell";
    case ErrorCode::UnknownColumn: return "UnknownColumn";
    case ErrorCode::EmptySubgroup: return "EmptySubgroup";
    case ErrorCode::TooManyFeatures: return "TooManyFeatures";
    case ErrorCode::TooFewRows: return "TooFewRows";
    case ErrorCode::SingleCluster: return "SingleCluster";
    case ErrorCode::BadShape: return "BadShape";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UsageError: return "UsageError";
    case ErrorCode::InternalError: return "InternalError";
  }
  return "Unknown";
}

ErrorCategory error_category(ErrorCode code) {
  switch (code) {
    case ErrorCode::UsageError: return ErrorCategory::Usage;
    case ErrorCode::InternalError: return ErrorCategory::Internal;
    default: return ErrorCategory::Data;
  }
}

}  // namespace hyposcreen
