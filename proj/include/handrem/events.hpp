#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace handrem {

enum class EventType {
    ActionSelected,
    ActionStarted,
    ActionDone,
    ActionAborted,
    NoTarget,
    OutOfReach,
    BusyWithAction,
    ReachLost,
    PhaseChanged,
    IllegalCommand,
    ValveToggled,
    ValveAdjusted,
    SensorReading,
    GoalSatisfied,
    ModeChanged,
};

std::string_view nameOf(EventType t) noexcept;
std::optional<EventType> eventTypeFrom(std::string_view s) noexcept;

/// Structured session event. `subject` names the object or command involved,
/// `detail` carries a short machine-readable qualifier (a status, a verdict,
/// a phase transition "A->B", a reason).
struct Event {
    EventType type;
    std::string subject;
    std::string detail;

    friend bool operator==(const Event&, const Event&) = default;
};

} // namespace handrem
