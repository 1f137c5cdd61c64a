#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mapnav {

enum class ErrorCode {
  // world
  RaggedGrid,
  IllegalChar,
  OpenBorder,
  InvalidWorld,
  GoalBlocked,
  Unreachable,
  NoValidEpisode,
  // tensor-core
  InvalidConfig,
  SequenceTooLong,
  TokenOutOfVocab,
  GraphConsumed,
  NonFiniteGradient,
  ShapeMismatch,
  // mapgen / policy
  IllegalChannelValue,
  ContextOverflow,
  NotAMapCode,
  ArityMismatch,
  MalformedPlan,
  // rft
  NonFinite,
  // harness
  DegenerateEpisode,
  EmptySet,
  IoError,
  ParseError,
  ConfigError,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for all library failures; `code()` is the
/// machine-checkable part, `what()` carries context for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mapnav
