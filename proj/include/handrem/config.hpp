#pragma once

#include "handrem/control.hpp"
#include "handrem/world.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>

namespace handrem {

struct LatencyLeg {
    double delayMs = 0.0;
    double jitterMs = 0.0; ///< uniform in [0, jitterMs]
    friend bool operator==(const LatencyLeg&, const LatencyLeg&) = default;
};

/// Injected transport delay. Uplink applies to commands, downlink to snapshots.
struct LatencyConfig {
    LatencyLeg uplink;
    LatencyLeg downlink;
    std::uint64_t seed = 1;
    friend bool operator==(const LatencyConfig&, const LatencyConfig&) = default;
};

struct Config {
    int version = 1;
    double tickRate = 50.0;
    ControlParams control;
    WorldParams world;
    LatencyConfig latency;
    int hashInterval = 50;
    double simTimeCap = 600.0;
    /// Distance from the robot's home point to the panel surface.
    double baseStandoff = 0.10;
    /// Half extents of the overview camera footprint on the panel.
    Vec2 overviewHalfExtent{1.0, 0.6};
    bool allowModeSwitch = false;
    int snapshotEvery = 1;
    int port = 7878;
    std::string logPath = "session.jsonl";

    [[nodiscard]] double dt() const { return 1.0 / tickRate; }
    /// Throws Error(InvalidConfig) on invalid values or combinations.
    void validate() const;

    friend bool operator==(const Config&, const Config&) = default;
};

[[nodiscard]] nlohmann::json toJson(const Config& c);
/// Keys absent from `j` keep the values of `base`; unknown keys are rejected.
[[nodiscard]] Config configFromJson(const nlohmann::json& j, const Config& base = {});
[[nodiscard]] Config loadConfig(const std::filesystem::path& path, const Config& base = {});

/// Stable content hash: independent of key order in the source file.
[[nodiscard]] std::uint64_t configHash(const Config& c);

} // namespace handrem
