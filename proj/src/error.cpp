#include "mcpeval/error.hpp"

namespace mcpeval {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonNumericFeature: return "NonNumericFeature";
    case ErrorCode::UnknownLabelValue: return "UnknownLabelValue";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::InvalidDataset: return "InvalidDataset";
    case ErrorCode::DegenerateRequest: return "DegenerateRequest";
    case ErrorCode::InsufficientClassMembers: return "InsufficientClassMembers";
    case ErrorCode::SingleClassTraining: return "SingleClassTraining";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyClassCalibration: return "EmptyClassCalibration";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::MetricUndefined: return "MetricUndefined";
    case ErrorCode::InstanceNeverTested: return "InstanceNeverTested";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ReportError: return "ReportError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::RepeatFailed: return "RepeatFailed";
  }
  return "Unknown";
}

}  // namespace mcpeval
