#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace handrem {

enum class ErrorCode {
    InvalidPose,
    InvalidLimits,
    NotFound,
    WrongValveKind,
    InvalidProfile,
    OutOfReach,
    BusyWithAction,
    WrongMode,
    InvalidConfig,
    EmptyLog,
    CorruptLog,
    Protocol,
    Io,
};

std::string_view nameOf(ErrorCode code) noexcept;

/// Contract violation raised by the simulator core. The code is stable and
/// is what callers branch on; the message is for humans.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(nameOf(code)) + ": " + what), code_(code) {}

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

} // namespace handrem
