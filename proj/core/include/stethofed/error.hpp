#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stethofed {

// Failure categories raised by the library. The CLI maps each one onto a
// process exit code through error_category().
enum class ErrorKind {
  IncompatibleRegistry,
  BadRange,
  GridTooSmall,
  ShapeMismatch,
  EmptyBatch,
  EmptyClient,
  EmptyUpdateSet,
  UnknownToken,
  BadRatio,
  EmptyGroup,
  BadRank,
  TooFewPoints,
  DegenerateSplit,
  DegenerateEmbedding,
  NonFinite,
  Config,
  Io,
  Format,
};

enum class ErrorCategory { Config, Data, Numeric, Internal };

std::string_view to_string(ErrorKind kind);
ErrorCategory error_category(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& message);

}  // namespace stethofed
