#include "erpo/errors.hpp"

namespace erpo {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::TemperatureOrder: return "TemperatureOrder";
    case ErrorKind::DegenerateGroup: return "DegenerateGroup";
    case ErrorKind::RewardOrder: return "RewardOrder";
    case ErrorKind::UnknownKey: return "UnknownKey";
    case ErrorKind::EmptyMix: return "EmptyMix";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::TokenOutOfRange: return "TokenOutOfRange";
    case ErrorKind::NonpositiveTemperature: return "NonpositiveTemperature";
    case ErrorKind::GroupTooSmall: return "GroupTooSmall";
    case ErrorKind::NotAllCorrect: return "NotAllCorrect";
    case ErrorKind::UndefinedRatio: return "UndefinedRatio";
    case ErrorKind::EmptyBatch: return "EmptyBatch";
    case ErrorKind::UnknownPrompt: return "UnknownPrompt";
    case ErrorKind::DuplicateUpdate: return "DuplicateUpdate";
    case ErrorKind::CorruptSnapshot: return "CorruptSnapshot";
    case ErrorKind::EmptySample: return "EmptySample";
    case ErrorKind::IoFailure: return "IoFailure";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace erpo
