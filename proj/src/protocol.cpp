#include "handrem/protocol.hpp"

#include "handrem/error.hpp"
#include "handrem/scenario_io.hpp"

namespace handrem {

using nlohmann::json;

namespace {

[[noreturn]] void bad(const std::string& what) { throw Error(ErrorCode::Protocol, what); }

double num(const json& j, const char* key) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        bad(std::string("missing numeric field '") + key + "'");
    }
    return j.at(key).get<double>();
}

json optionalArray(const std::vector<std::optional<double>>& v) {
    json a = json::array();
    for (const auto& x : v) {
        a.push_back(x ? json(*x) : json(nullptr));
    }
    return a;
}

std::vector<std::optional<double>> optionalArrayFrom(const json& j) {
    std::vector<std::optional<double>> out;
    for (const auto& x : j) {
        out.push_back(x.is_null() ? std::nullopt : std::optional<double>(x.get<double>()));
    }
    return out;
}

template <typename E, std::size_t N>
E enumFrom(const json& j, const std::array<E, N>& values) {
    const auto s = j.get<std::string>();
    for (E v : values) {
        if (nameOf(v) == s) {
            return v;
        }
    }
    bad("unknown enum value '" + s + "'");
}

constexpr std::array kPhases{Phase::Exploration, Phase::Guidance, Phase::LocalSolve, Phase::Retraction};
constexpr std::array kKinds{ActionKind::Toggle, ActionKind::Regulate, ActionKind::Sense};
constexpr std::array kStatuses{ActionStatus::Pending, ActionStatus::Aiming,     ActionStatus::Acting,
                               ActionStatus::Retracting, ActionStatus::Done, ActionStatus::Aborted};
constexpr std::array kModes{Mode::NonAssisted, Mode::Assisted};
constexpr std::array kVerdicts{Verdict::Pass, Verdict::Crack};

} // namespace

json toJson(const Pose5& p) {
    return {{"x", p.x}, {"y", p.y}, {"z", p.z}, {"yaw", p.yaw}, {"pitch", p.pitch}};
}

Pose5 poseFromJson(const json& j) {
    if (!j.is_object()) {
        bad("pose must be an object");
    }
    return {num(j, "x"), num(j, "y"), num(j, "z"), num(j, "yaw"), num(j, "pitch")};
}

json toJson(const Command& c) {
    json body = std::visit(
        [](const auto& p) -> json {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, WandPose>) {
                return toJson(p.pose);
            } else if constexpr (std::is_same_v<T, Activate>) {
                return {{"on", p.on}};
            } else if constexpr (std::is_same_v<T, Select>) {
                return {{"target", p.target}};
            } else if constexpr (std::is_same_v<T, SetMode>) {
                return {{"mode", std::string(nameOf(p.mode))}};
            } else if constexpr (std::is_same_v<T, BaseMove>) {
                return {{"vx", p.velocity.x}, {"vy", p.velocity.y}, {"headingRate", p.headingRate}};
            } else if constexpr (std::is_same_v<T, ChatMsg>) {
                return {{"text", p.text}};
            } else {
                return {{"pan", p.pan}, {"tilt", p.tilt}};
            }
        },
        c.payload);
    return {{"role", std::string(nameOf(c.sender))},
            {"seq", c.seq},
            {"tick", c.sentTick},
            {"type", std::string(payloadType(c.payload))},
            {"body", std::move(body)}};
}

Command commandFromJson(const json& j) {
    if (!j.is_object()) {
        bad("message must be an object");
    }
    try {
        Command c;
        const auto role = roleFrom(j.at("role").get<std::string>());
        if (!role) {
            bad("unknown role");
        }
        c.sender = *role;
        c.seq = j.at("seq").get<std::uint64_t>();
        c.sentTick = j.value("tick", std::int64_t{0});
        const auto type = j.at("type").get<std::string>();
        const json& body = j.contains("body") ? j.at("body") : json::object();
        if (type == "WandPose") {
            c.payload = WandPose{poseFromJson(body)};
        } else if (type == "Activate") {
            c.payload = Activate{body.at("on").get<bool>()};
        } else if (type == "Select") {
            c.payload = Select{body.value("target", std::string{})};
        } else if (type == "SetMode") {
            const auto m = modeFrom(body.at("mode").get<std::string>());
            if (!m) {
                bad("unknown mode");
            }
            c.payload = SetMode{*m};
        } else if (type == "BaseMove") {
            c.payload = BaseMove{{num(body, "vx"), num(body, "vy")}, body.value("headingRate", 0.0)};
        } else if (type == "ChatMsg") {
            c.payload = ChatMsg{body.at("text").get<std::string>()};
        } else if (type == "CameraAim") {
            c.payload = CameraAim{num(body, "pan"), num(body, "tilt")};
        } else {
            bad("unknown command type '" + type + "'");
        }
        return c;
    } catch (const json::exception& e) {
        bad(std::string("malformed command: ") + e.what());
    }
}

json toJson(const Event& e) {
    json j = {{"type", std::string(nameOf(e.type))}};
    if (!e.subject.empty()) {
        j["subject"] = e.subject;
    }
    if (!e.detail.empty()) {
        j["detail"] = e.detail;
    }
    return j;
}

Event eventFromJson(const json& j) {
    try {
        const auto type = eventTypeFrom(j.at("type").get<std::string>());
        if (!type) {
            bad("unknown event type");
        }
        return {*type, j.value("subject", std::string{}), j.value("detail", std::string{})};
    } catch (const json::exception& e) {
        bad(std::string("malformed event: ") + e.what());
    }
}

json toJson(const Snapshot& s) {
    json j = {
        {"role", std::string(nameOf(s.role))},
        {"tick", s.tick},
        {"simTime", s.simTime},
        {"mode", std::string(nameOf(s.mode))},
        {"phase", std::string(nameOf(s.phase))},
        {"base", {{"x", s.base.x}, {"y", s.base.y}, {"z", s.base.z}, {"heading", s.base.heading}}},
        {"tipLocal", toJson(s.tipLocal)},
        {"tipWorld", toJson(s.tipWorld)},
        {"activate", s.activate},
        {"camera", {{"pan", s.camera.pan}, {"tilt", s.camera.tilt}}},
        {"valveStates", optionalArray(s.valveStates)},
        {"sensing",
         {{"pipe", s.sensingPipe ? json(*s.sensingPipe) : json(nullptr)},
          {"progress", s.sensingProgress},
          {"required", s.sensingRequired}}},
        {"goalSatisfied", s.goalSatisfied},
    };
    if (s.role == Role::Local) {
        j["gaugeValues"] = optionalArray(s.gaugeValues);
    } else {
        j["gaugeTargets"] = optionalArray(s.gaugeTargets);
    }
    json readings = json::object();
    for (const auto& [pipe, verdict] : s.readings) {
        readings[pipe] = std::string(nameOf(verdict));
    }
    j["readings"] = std::move(readings);
    j["touching"] = s.touching ? json(*s.touching) : json(nullptr);
    if (s.action) {
        j["action"] = {{"target", s.action->target},
                       {"kind", std::string(nameOf(s.action->kind))},
                       {"status", std::string(nameOf(s.action->status))},
                       {"abortReason", s.action->abortReason}};
    } else {
        j["action"] = nullptr;
    }
    json chat = json::array();
    for (const auto& line : s.chat) {
        chat.push_back({{"from", std::string(nameOf(line.from))}, {"tick", line.tick}, {"text", line.text}});
    }
    j["chat"] = std::move(chat);
    json events = json::array();
    for (const auto& e : s.events) {
        events.push_back(toJson(e));
    }
    j["events"] = std::move(events);
    return j;
}

Snapshot snapshotFromJson(const json& j) {
    try {
        Snapshot s;
        const auto role = roleFrom(j.at("role").get<std::string>());
        if (!role) {
            bad("unknown role");
        }
        s.role = *role;
        s.tick = j.at("tick").get<std::int64_t>();
        s.simTime = j.at("simTime").get<double>();
        s.mode = enumFrom(j.at("mode"), kModes);
        s.phase = enumFrom(j.at("phase"), kPhases);
        const auto& b = j.at("base");
        s.base = {num(b, "x"), num(b, "y"), num(b, "z"), num(b, "heading")};
        s.tipLocal = poseFromJson(j.at("tipLocal"));
        s.tipWorld = poseFromJson(j.at("tipWorld"));
        s.activate = j.at("activate").get<bool>();
        s.camera = {num(j.at("camera"), "pan"), num(j.at("camera"), "tilt")};
        s.valveStates = optionalArrayFrom(j.at("valveStates"));
        if (j.contains("gaugeValues")) {
            s.gaugeValues = optionalArrayFrom(j.at("gaugeValues"));
        }
        if (j.contains("gaugeTargets")) {
            s.gaugeTargets = optionalArrayFrom(j.at("gaugeTargets"));
        }
        const auto& sensing = j.at("sensing");
        if (!sensing.at("pipe").is_null()) {
            s.sensingPipe = sensing.at("pipe").get<std::string>();
        }
        s.sensingProgress = sensing.at("progress").get<double>();
        s.sensingRequired = sensing.at("required").get<double>();
        for (const auto& [pipe, verdict] : j.at("readings").items()) {
            s.readings[pipe] = enumFrom(verdict, kVerdicts);
        }
        if (!j.at("touching").is_null()) {
            s.touching = j.at("touching").get<std::string>();
        }
        if (!j.at("action").is_null()) {
            const auto& a = j.at("action");
            s.action = ActionView{a.at("target").get<std::string>(), enumFrom(a.at("kind"), kKinds),
                                  enumFrom(a.at("status"), kStatuses), a.value("abortReason", std::string{})};
        }
        for (const auto& line : j.at("chat")) {
            const auto from = roleFrom(line.at("from").get<std::string>());
            if (!from) {
                bad("unknown chat role");
            }
            s.chat.push_back({*from, line.at("tick").get<std::int64_t>(), line.at("text").get<std::string>()});
        }
        for (const auto& e : j.at("events")) {
            s.events.push_back(eventFromJson(e));
        }
        s.goalSatisfied = j.at("goalSatisfied").get<bool>();
        return s;
    } catch (const json::exception& e) {
        bad(std::string("malformed snapshot: ") + e.what());
    }
}

json serverMessage(std::string_view type, std::uint64_t seq, std::int64_t tick, json body) {
    return {{"role", "SERVER"}, {"seq", seq}, {"tick", tick}, {"type", std::string(type)}, {"body", std::move(body)}};
}

json publicScenario(const Scenario& s, Role role) {
    json j = toJson(s, Visibility::Public);
    if (role == Role::Local) {
        for (auto& g : j["gauges"]) {
            g.erase("target");
        }
        for (auto& p : j["pipes"]) {
            p.erase("mustCheck");
        }
        j.erase("requiredActionCount");
        j.erase("profile");
        // local workers know the plumbing, not the task
        j.erase("contributions");
    }
    j.erase("seed");
    return j;
}

} // namespace handrem
