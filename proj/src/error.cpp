#include "mapnav/error.hpp"

namespace mapnav {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::RaggedGrid: return "RaggedGrid";
    case ErrorCode::IllegalChar: return "IllegalChar";
    case ErrorCode::OpenBorder: return "OpenBorder";
    case ErrorCode::InvalidWorld: return "InvalidWorld";
    case ErrorCode::GoalBlocked: return "GoalBlocked";
    case ErrorCode::Unreachable: return "Unreachable";
    case ErrorCode::NoValidEpisode: return "NoValidEpisode";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::TokenOutOfVocab: return "TokenOutOfVocab";
    case ErrorCode::GraphConsumed: return "GraphConsumed";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IllegalChannelValue: return "IllegalChannelValue";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::NotAMapCode: return "NotAMapCode";
    case ErrorCode::ArityMismatch: return "ArityMismatch";
    case ErrorCode::MalformedPlan: return "MalformedPlan";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DegenerateEpisode: return "DegenerateEpisode";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace mapnav
