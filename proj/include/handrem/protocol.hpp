#pragma once

#include "handrem/session.hpp"

#include <json.hpp>

#include <string>

namespace handrem {

inline constexpr const char* kProtocolVersion = "1";

/// Wire and log form of a command: `{role, seq, tick, type, body}`.
[[nodiscard]] nlohmann::json toJson(const Command& c);
/// Throws Error(Protocol) on unknown types or malformed bodies.
[[nodiscard]] Command commandFromJson(const nlohmann::json& j);

[[nodiscard]] nlohmann::json toJson(const Event& e);
[[nodiscard]] Event eventFromJson(const nlohmann::json& j);

[[nodiscard]] nlohmann::json toJson(const Pose5& p);
[[nodiscard]] Pose5 poseFromJson(const nlohmann::json& j);

[[nodiscard]] nlohmann::json toJson(const Snapshot& s);
[[nodiscard]] Snapshot snapshotFromJson(const nlohmann::json& j);

/// Server-originated envelope (role "SERVER").
[[nodiscard]] nlohmann::json serverMessage(std::string_view type, std::uint64_t seq, std::int64_t tick,
                                           nlohmann::json body);

/// Scenario header a client may see: hidden fields stripped, and for LOCAL
/// also the goal knowledge (gauge targets, must-check flags).
[[nodiscard]] nlohmann::json publicScenario(const Scenario& s, Role role);

} // namespace handrem
