#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace brdsgd {

enum class ErrorCode {
  InvalidArgument,
  DisconnectedHonestSubgraph,
  BetaOutOfRange,
  NoValidTrial,
  DimensionMismatch,
  InvalidWeights,
  TooFewInputs,
  VictimNotVisible,
  BadMagic,
  LengthMismatch,
  NonFiniteModel,
  GridMismatch,
  HypothesisViolated,
  DeltaZero,
  EmptyWindow,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so that
// callers (the CLI in particular) can report which module contract broke.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Divergence guard: reports the step whose update produced a non-finite model.
class NonFiniteModelError : public Error {
 public:
  NonFiniteModelError(std::int64_t step, int agent)
      : Error(ErrorCode::NonFiniteModel,
              "agent " + std::to_string(agent) + " produced a non-finite model at step " +
                  std::to_string(step)),
        step_(step),
        agent_(agent) {}

  std::int64_t step() const noexcept { return step_; }
  int agent() const noexcept { return agent_; }

 private:
  std::int64_t step_;
  int agent_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DisconnectedHonestSubgraph: return "DisconnectedHonestSubgraph";
    case ErrorCode::BetaOutOfRange: return "BetaOutOfRange";
    case ErrorCode::NoValidTrial: return "NoValidTrial";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::TooFewInputs: return "TooFewInputs";
    case ErrorCode::VictimNotVisible: return "VictimNotVisible";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonFiniteModel: return "NonFiniteModel";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::HypothesisViolated: return "HypothesisViolated";
    case ErrorCode::DeltaZero: return "DeltaZero";
    case ErrorCode::EmptyWindow: return "EmptyWindow";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace brdsgd
