#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace psq {

enum class ErrorKind {
    InvalidArgument,
    InfiniteMoment,
    AtomOffGrid,
    StepMismatch,
    UnstableLoad,
    NotConverged,
    HorizonExceeded,
    InvalidConfig,
    Usage,
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::InfiniteMoment: return "InfiniteMoment";
        case ErrorKind::AtomOffGrid: return "AtomOffGrid";
        case ErrorKind::StepMismatch: return "StepMismatch";
        case ErrorKind::UnstableLoad: return "UnstableLoad";
        case ErrorKind::NotConverged: return "NotConverged";
        case ErrorKind::HorizonExceeded: return "HorizonExceeded";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::Usage: return "UsageError";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace psq
