#pragma once

#include "handrem/world.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>

namespace handrem {

enum class Visibility {
    Full,   ///< everything, including hidden crack flags (files, logs)
    Public, ///< hidden fields stripped (what a client may see)
};

/// Scenario document, `"version": 1`. Hidden per-pipe fields live under a
/// `"hidden"` object so they can be stripped mechanically.
[[nodiscard]] nlohmann::json toJson(const Scenario& s, Visibility vis = Visibility::Full);
[[nodiscard]] Scenario scenarioFromJson(const nlohmann::json& j);

/// Canonical text form: sorted keys, two-space indent, trailing newline.
[[nodiscard]] std::string dumpScenario(const Scenario& s);

void writeScenario(const Scenario& s, const std::filesystem::path& path);
[[nodiscard]] Scenario readScenario(const std::filesystem::path& path);

[[nodiscard]] nlohmann::json toJson(const Profile& p);
[[nodiscard]] Profile profileFromJson(const nlohmann::json& j);
/// "d,c,k" or "d=6,c=2,k=3".
[[nodiscard]] Profile parseProfile(const std::string& text);

} // namespace handrem
