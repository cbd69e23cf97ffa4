#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mcpeval {

enum class ErrorCode {
  MissingColumn,
  NonNumericFeature,
  UnknownLabelValue,
  EmptyDataset,
  InvalidDataset,
  DegenerateRequest,
  InsufficientClassMembers,
  SingleClassTraining,
  NonFiniteLoss,
  DimensionMismatch,
  EmptyClassCalibration,
  InvalidArgument,
  LengthMismatch,
  EmptyInput,
  MetricUndefined,
  InstanceNeverTested,
  ConfigError,
  ReportError,
  IoError,
  MalformedCsv,
  RepeatFailed,
};

const char* to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Carries the offending 1-based data row and 0-based column.
class NonNumericFeatureError : public Error {
 public:
  NonNumericFeatureError(std::size_t row, std::size_t column, const std::string& message)
      : Error(ErrorCode::NonNumericFeature, message), row_(row), column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::size_t column_;
};

// Repeat-level failure inside an experiment; wraps the underlying cause.
class RepeatError : public Error {
 public:
  RepeatError(std::size_t repeat, ErrorCode cause, const std::string& message)
      : Error(ErrorCode::RepeatFailed, message), repeat_(repeat), cause_(cause) {}

  std::size_t repeat() const noexcept { return repeat_; }
  ErrorCode cause() const noexcept { return cause_; }

 private:
  std::size_t repeat_;
  ErrorCode cause_;
};

}  // namespace mcpeval
