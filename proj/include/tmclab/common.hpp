#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace tmclab {

enum class ErrorCode {
    NonLayeredEdge,
    RowNotNormalized,
    NegativeProbability,
    UnknownState,
    LayerMismatch,
    TerminalState,
    DeadEnd,
    MaskedEdge,
    NotValidForTask,
    ThresholdKilledTrueEdge,
    DegenerateGroup,
    TreeTooLarge,
    ShapeMismatch,
    ConfigError,
    IoError,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::NonLayeredEdge: return "NonLayeredEdge";
        case ErrorCode::RowNotNormalized: return "RowNotNormalized";
        case ErrorCode::NegativeProbability: return "NegativeProbability";
        case ErrorCode::UnknownState: return "UnknownState";
        case ErrorCode::LayerMismatch: return "LayerMismatch";
        case ErrorCode::TerminalState: return "TerminalState";
        case ErrorCode::DeadEnd: return "DeadEnd";
        case ErrorCode::MaskedEdge: return "MaskedEdge";
        case ErrorCode::NotValidForTask: return "NotValidForTask";
        case ErrorCode::ThresholdKilledTrueEdge: return "ThresholdKilledTrueEdge";
        case ErrorCode::DegenerateGroup: return "DegenerateGroup";
        case ErrorCode::TreeTooLarge: return "TreeTooLarge";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

class TmcError : public std::runtime_error {
public:
    TmcError(ErrorCode code, const std::string& msg)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + msg), code_(code) {}
    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

using StateId = uint32_t;

} // namespace tmclab
