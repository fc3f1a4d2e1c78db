#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace erpo {

enum class ErrorKind {
  InvalidConfig,
  TemperatureOrder,
  DegenerateGroup,
  RewardOrder,
  UnknownKey,
  EmptyMix,
  InvalidArgument,
  TokenOutOfRange,
  NonpositiveTemperature,
  GroupTooSmall,
  NotAllCorrect,
  UndefinedRatio,
  EmptyBatch,
  UnknownPrompt,
  DuplicateUpdate,
  CorruptSnapshot,
  EmptySample,
  IoFailure,
  InvariantViolation,
};

std::string_view to_string(ErrorKind kind);

/// Exception carrying a machine-readable kind alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace erpo
