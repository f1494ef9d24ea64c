#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace capmeter {

enum class ErrorCode {
  InvalidArgument,
  InvalidSpectrum,
  DivergentPartition,
  InsufficientHits,
  ConfigError,
  EmptyGroup,
  NonFinite,
  TrainingFailure,
  ParseError,
  InvariantViolation,
  DuplicateKey,
  EmptyTrainingSet,
  NonFiniteLoss,
  MixedTypes,
  InsufficientPoints,
  SolverFailure,
  OutOfRange,
  FitDiverged,
  DegenerateCurve,
  QuadratureFailure,
  UndefinedThreshold,
  LengthMismatch,
  AllTied,
  DegenerateDesign,
  NonFiniteState,
  EmptyHeldout,
  EmptyWindow,
  ScheduleExhaustsData,
  ChainFailure,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so callers
// (the CLI in particular) can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ParseError : public Error {
 public:
  ParseError(ErrorCode code, std::size_t line, std::size_t column, const std::string& reason)
      : Error(code, "line " + std::to_string(line) +
                        (column ? ", column " + std::to_string(column) : std::string()) + ": " +
                        reason),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  // 1-based; 0 when the problem is not tied to a single column.
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace capmeter
