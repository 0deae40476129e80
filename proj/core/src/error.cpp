#include "stethofed/error.hpp"

namespace stethofed {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::IncompatibleRegistry: return "IncompatibleRegistry";
    case ErrorKind::BadRange: return "BadRange";
    case ErrorKind::GridTooSmall: return "GridTooSmall";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::EmptyClient: return "EmptyClient";
    case ErrorKind::EmptyUpdateSet: return "EmptyUpdateSet";
    case ErrorKind::UnknownToken: return "UnknownToken";
    case ErrorKind::BadRatio: return "BadRatio";
    case ErrorKind::EmptyGroup: return "EmptyGroup";
    case ErrorKind::BadRank: return "BadRank";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::DegenerateSplit: return "DegenerateSplit";
    case ErrorKind::DegenerateEmbedding: return "DegenerateEmbedding";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::Config: return "Config";
    case ErrorKind::Io: return "Io";
    case ErrorKind::Format: return "Format";
  }
  return "Unknown";
}

ErrorCategory error_category(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::BadRange:
    case ErrorKind::BadRatio:
    case ErrorKind::BadRank:
      return ErrorCategory::Config;
    case ErrorKind::Io:
    case ErrorKind::Format:
    case ErrorKind::UnknownToken:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::GridTooSmall:
    case ErrorKind::EmptyClient:
    case ErrorKind::EmptyGroup:
    case ErrorKind::TooFewPoints:
    case ErrorKind::DegenerateSplit:
      return ErrorCategory::Data;
    case ErrorKind::NonFinite:
    case ErrorKind::DegenerateEmbedding:
      return ErrorCategory::Numeric;
    case ErrorKind::IncompatibleRegistry:
    case ErrorKind::EmptyBatch:
    case ErrorKind::EmptyUpdateSet:
      return ErrorCategory::Internal;
  }
  return ErrorCategory::Internal;
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void raise(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace stethofed
