#include "handrem/events.hpp"

#include <array>
#include <utility>

namespace handrem {

namespace {

constexpr std::array<std::pair<EventType, std::string_view>, 15> kNames{{
    {EventType::ActionSelected, "ActionSelected"},
    {EventType::ActionStarted, "ActionStarted"},
    {EventType::ActionDone, "ActionDone"},
    {EventType::ActionAborted, "ActionAborted"},
    {EventType::NoTarget, "NoTarget"},
    {EventType::OutOfReach, "OutOfReach"},
    {EventType::BusyWithAction, "BusyWithAction"},
    {EventType::ReachLost, "ReachLost"},
    {EventType::PhaseChanged, "PhaseChanged"},
    {EventType::IllegalCommand, "IllegalCommand"},
    {EventType::ValveToggled, "ValveToggled"},
    {EventType::ValveAdjusted, "ValveAdjusted"},
    {EventType::SensorReading, "SensorReading"},
    {EventType::GoalSatisfied, "GoalSatisfied"},
    {EventType::ModeChanged, "ModeChanged"},
}};

} // namespace

std::string_view nameOf(EventType t) noexcept {
    for (const auto& [type, name] : kNames) {
        if (type == t) {
            return name;
        }
    }
    return "?";
}

std::optional<EventType> eventTypeFrom(std::string_view s) noexcept {
    for (const auto& [type, name] : kNames) {
        if (name == s) {
            return type;
        }
    }
    return std::nullopt;
}

} // namespace handrem
