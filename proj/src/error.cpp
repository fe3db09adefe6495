#include "handrem/error.hpp"

namespace handrem {

std::string_view nameOf(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidPose: return "InvalidPose";
    case ErrorCode::InvalidLimits: return "InvalidLimits";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::WrongValveKind: return "WrongValveKind";
    case ErrorCode::InvalidProfile: return "InvalidProfile";
    case ErrorCode::OutOfReach: return "OutOfReach";
    case ErrorCode::BusyWithAction: return "BusyWithAction";
    case ErrorCode::WrongMode: return "WrongMode";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptyLog: return "EmptyLog";
    case ErrorCode::CorruptLog: return "CorruptLog";
    case ErrorCode::Protocol: return "Protocol";
    case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

} // namespace handrem
