#include "handrem/config.hpp"

#include "handrem/error.hpp"
#include "handrem/hash.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace handrem {

using nlohmann::json;

std::string toHex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t fromHex(std::string_view s) {
    if (s.empty() || s.size() > 16) {
        throw Error(ErrorCode::CorruptLog, "bad hex digest '" + std::string(s) + "'");
    }
    std::uint64_t v = 0;
    for (char c : s) {
        v <<= 4;
        if (c >= '0' && c <= '9') {
            v |= static_cast<std::uint64_t>(c - '0');
        } else if (c >= 'a' && c <= 'f') {
            v |= static_cast<std::uint64_t>(c - 'a' + 10);
        } else {
            throw Error(ErrorCode::CorruptLog, "bad hex digest '" + std::string(s) + "'");
        }
    }
    return v;
}

namespace {

json rangeJson(const Range& r) { return json::array({r.min, r.max}); }

json limitsJson(const WorkspaceLimits& l) {
    return {{"x", rangeJson(l.x)},
            {"y", rangeJson(l.y)},
            {"z", rangeJson(l.z)},
            {"yaw", rangeJson(l.yaw)},
            {"pitch", rangeJson(l.pitch)}};
}

/// Reads only the keys present; complains about the rest.
class Reader {
public:
    Reader(const json& j, std::string where) : j_(j), where_(std::move(where)) {
        if (!j_.is_object()) {
            throw Error(ErrorCode::InvalidConfig, where_ + " must be an object");
        }
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (!j_.contains(key)) {
            return;
        }
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw Error(ErrorCode::InvalidConfig, where_ + "." + key + " has the wrong type");
        }
    }

    void range(const char* key, Range& out) {
        seen_.insert(key);
        if (!j_.contains(key)) {
            return;
        }
        const auto& v = j_.at(key);
        if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
            throw Error(ErrorCode::InvalidConfig, where_ + "." + key + " must be [min, max]");
        }
        out = {v[0].get<double>(), v[1].get<double>()};
    }

    const json* child(const char* key) {
        seen_.insert(key);
        return j_.contains(key) ? &j_.at(key) : nullptr;
    }

    void finish() const {
        for (const auto& [k, v] : j_.items()) {
            if (!seen_.count(k)) {
                throw Error(ErrorCode::InvalidConfig, "unknown config key " + where_ + "." + k);
            }
        }
    }

private:
    const json& j_;
    std::string where_;
    std::set<std::string> seen_;
};

void readLeg(const json& j, LatencyLeg& leg, const std::string& where) {
    Reader r(j, where);
    r.get("delayMs", leg.delayMs);
    r.get("jitterMs", leg.jitterMs);
    r.finish();
}

bool finitePositive(double v) { return std::isfinite(v) && v > 0.0; }

} // namespace

void Config::validate() const {
    const auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidConfig, what); };
    if (version != 1) {
        fail("unsupported config version");
    }
    if (!finitePositive(tickRate) || tickRate > 10000.0) {
        fail("tickRate must be in (0, 10000]");
    }
    if (!control.limits.valid()) {
        fail("workspace limits need finite min < 0 < max per component");
    }
    for (double v : {control.autoTipSpeed, control.autoTipTurnRate, control.regRate, control.regGain,
                     control.regTolerance, control.manualRate, control.deflectionGain, control.maxWorkerSpeed,
                     control.selectCone, control.crouchTolerance, world.dwellRequired, world.touchRadius,
                     world.gaugeTolerance}) {
        if (!finitePositive(v)) {
            fail("control and world parameters must be finite and positive");
        }
    }
    if (!std::isfinite(control.graceTime) || control.graceTime < 0.0) {
        fail("graceTime must be >= 0");
    }
    if (!std::isfinite(control.guidanceThreshold) || control.guidanceThreshold < 0.0) {
        fail("guidanceThreshold must be >= 0");
    }
    if (control.regTolerance > world.gaugeTolerance) {
        fail("regTolerance must not exceed the goal tolerance");
    }
    for (const auto& leg : {latency.uplink, latency.downlink}) {
        if (!std::isfinite(leg.delayMs) || leg.delayMs < 0.0 || !std::isfinite(leg.jitterMs) || leg.jitterMs < 0.0) {
            fail("latency delays must be finite and >= 0");
        }
    }
    if (hashInterval < 1) {
        fail("hashInterval must be >= 1");
    }
    if (!finitePositive(simTimeCap)) {
        fail("simTimeCap must be positive");
    }
    if (!std::isfinite(baseStandoff) || baseStandoff < 0.0 || baseStandoff > control.limits.z.max) {
        fail("baseStandoff must lie within the forward reach of the tip");
    }
    if (!finitePositive(overviewHalfExtent.x) || !finitePositive(overviewHalfExtent.y)) {
        fail("overviewHalfExtent must be positive");
    }
    if (snapshotEvery < 1) {
        fail("snapshotEvery must be >= 1");
    }
    if (port < 0 || port > 65535) {
        fail("port must be in [0, 65535]");
    }
}

json toJson(const Config& c) {
    const auto& k = c.control;
    return {
        {"version", c.version},
        {"tickRate", c.tickRate},
        {"control",
         {{"limits", limitsJson(k.limits)},
          {"autoTipSpeed", k.autoTipSpeed},
          {"autoTipTurnRate", k.autoTipTurnRate},
          {"regRate", k.regRate},
          {"regGain", k.regGain},
          {"regTolerance", k.regTolerance},
          {"manualRate", k.manualRate},
          {"graceTime", k.graceTime},
          {"guidanceThreshold", k.guidanceThreshold},
          {"deflectionGain", k.deflectionGain},
          {"maxWorkerSpeed", k.maxWorkerSpeed},
          {"selectCone", k.selectCone},
          {"crouchTolerance", k.crouchTolerance}}},
        {"world",
         {{"dwellRequired", c.world.dwellRequired},
          {"touchRadius", c.world.touchRadius},
          {"gaugeTolerance", c.world.gaugeTolerance}}},
        {"latency",
         {{"uplink", {{"delayMs", c.latency.uplink.delayMs}, {"jitterMs", c.latency.uplink.jitterMs}}},
          {"downlink", {{"delayMs", c.latency.downlink.delayMs}, {"jitterMs", c.latency.downlink.jitterMs}}},
          {"seed", c.latency.seed}}},
        {"hashInterval", c.hashInterval},
        {"simTimeCap", c.simTimeCap},
        {"baseStandoff", c.baseStandoff},
        {"overviewHalfExtent", json::array({c.overviewHalfExtent.x, c.overviewHalfExtent.y})},
        {"allowModeSwitch", c.allowModeSwitch},
        {"snapshotEvery", c.snapshotEvery},
        {"port", c.port},
        {"logPath", c.logPath},
    };
}

Config configFromJson(const json& j, const Config& base) {
    Config c = base;
    Reader r(j, "config");
    r.get("version", c.version);
    r.get("tickRate", c.tickRate);
    if (const auto* jc = r.child("control")) {
        Reader rc(*jc, "control");
        if (const auto* jl = rc.child("limits")) {
            Reader rl(*jl, "control.limits");
            rl.range("x", c.control.limits.x);
            rl.range("y", c.control.limits.y);
            rl.range("z", c.control.limits.z);
            rl.range("yaw", c.control.limits.yaw);
            rl.range("pitch", c.control.limits.pitch);
            rl.finish();
        }
        rc.get("autoTipSpeed", c.control.autoTipSpeed);
        rc.get("autoTipTurnRate", c.control.autoTipTurnRate);
        rc.get("regRate", c.control.regRate);
        rc.get("regGain", c.control.regGain);
        rc.get("regTolerance", c.control.regTolerance);
        rc.get("manualRate", c.control.manualRate);
        rc.get("graceTime", c.control.graceTime);
        rc.get("guidanceThreshold", c.control.guidanceThreshold);
        rc.get("deflectionGain", c.control.deflectionGain);
        rc.get("maxWorkerSpeed", c.control.maxWorkerSpeed);
        rc.get("selectCone", c.control.selectCone);
        rc.get("crouchTolerance", c.control.crouchTolerance);
        rc.finish();
    }
    if (const auto* jw = r.child("world")) {
        Reader rw(*jw, "world");
        rw.get("dwellRequired", c.world.dwellRequired);
        rw.get("touchRadius", c.world.touchRadius);
        rw.get("gaugeTolerance", c.world.gaugeTolerance);
        rw.finish();
    }
    if (const auto* jl = r.child("latency")) {
        Reader rl(*jl, "latency");
        if (const auto* up = rl.child("uplink")) {
            readLeg(*up, c.latency.uplink, "latency.uplink");
        }
        if (const auto* down = rl.child("downlink")) {
            readLeg(*down, c.latency.downlink, "latency.downlink");
        }
        rl.get("seed", c.latency.seed);
        rl.finish();
    }
    r.get("hashInterval", c.hashInterval);
    r.get("simTimeCap", c.simTimeCap);
    r.get("baseStandoff", c.baseStandoff);
    if (const auto* jo = r.child("overviewHalfExtent")) {
        if (!jo->is_array() || jo->size() != 2) {
            throw Error(ErrorCode::InvalidConfig, "overviewHalfExtent must be [x, y]");
        }
        c.overviewHalfExtent = {(*jo)[0].get<double>(), (*jo)[1].get<double>()};
    }
    r.get("allowModeSwitch", c.allowModeSwitch);
    r.get("snapshotEvery", c.snapshotEvery);
    r.get("port", c.port);
    r.get("logPath", c.logPath);
    r.finish();
    c.validate();
    return c;
}

Config loadConfig(const std::filesystem::path& path, const Config& base) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::InvalidConfig, "cannot open config '" + path.string() + "'");
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
    }
    return configFromJson(j, base);
}

std::uint64_t configHash(const Config& c) {
    // nlohmann::json objects are key-sorted, so the dump is canonical
    return fnv1a(toJson(c).dump());
}

} // namespace handrem
