#include "handrem/scenario_io.hpp"

#include "handrem/error.hpp"

#include <fstream>
#include <sstream>

namespace handrem {

using nlohmann::json;

namespace {

json point(Vec2 p) { return json::array({p.x, p.y}); }

Vec2 pointFrom(const json& j) {
    if (!j.is_array() || j.size() != 2) {
        throw Error(ErrorCode::InvalidProfile, "point must be a [x, y] array");
    }
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

ValveKind kindFrom(const std::string& s) {
    if (s == "DISCRETE") {
        return ValveKind::Discrete;
    }
    if (s == "CONTINUOUS") {
        return ValveKind::Continuous;
    }
    throw Error(ErrorCode::InvalidProfile, "unknown valve kind '" + s + "'");
}

} // namespace

json toJson(const Profile& p) { return {{"d", p.discrete}, {"c", p.continuous}, {"k", p.pipes}}; }

Profile profileFromJson(const json& j) {
    return {j.at("d").get<int>(), j.at("c").get<int>(), j.at("k").get<int>()};
}

Profile parseProfile(const std::string& text) {
    Profile p;
    std::stringstream in(text);
    std::string part;
    int positional = 0;
    int fields = 0;
    while (std::getline(in, part, ',')) {
        ++fields;
        int* slot = nullptr;
        std::string value = part;
        if (const auto eq = part.find('='); eq != std::string::npos) {
            const std::string key = part.substr(0, eq);
            value = part.substr(eq + 1);
            if (key == "d") {
                slot = &p.discrete;
            } else if (key == "c") {
                slot = &p.continuous;
            } else if (key == "k") {
                slot = &p.pipes;
            }
        } else {
            int* slots[] = {&p.discrete, &p.continuous, &p.pipes};
            if (positional < 3) {
                slot = slots[positional++];
            }
        }
        if (slot == nullptr) {
            throw Error(ErrorCode::InvalidProfile, "cannot parse profile '" + text + "'");
        }
        try {
            std::size_t used = 0;
            *slot = std::stoi(value, &used);
            if (used != value.size()) {
                throw std::invalid_argument(value);
            }
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidProfile, "cannot parse profile '" + text + "'");
        }
    }
    if (fields != 3) {
        throw Error(ErrorCode::InvalidProfile, "profile needs three counts: '" + text + "'");
    }
    return p;
}

json toJson(const Scenario& s, Visibility vis) {
    json valves = json::array();
    for (std::size_t v = 0; v < s.valves.size(); ++v) {
        const auto& valve = s.valves[v];
        json jv = {{"id", valve.id}, {"kind", std::string(nameOf(valve.kind))}, {"position", point(valve.position)}};
        if (vis == Visibility::Full) {
            jv["initialState"] = s.initialStates.at(v);
        }
        valves.push_back(std::move(jv));
    }
    json gauges = json::array();
    for (const auto& g : s.gauges) {
        gauges.push_back({{"id", g.id}, {"position", point(g.position)}, {"target", g.target}});
    }
    json pipes = json::array();
    for (const auto& p : s.pipes) {
        json jp = {{"id", p.id}, {"a", point(p.a)}, {"b", point(p.b)}, {"mustCheck", p.mustCheck}};
        if (vis == Visibility::Full) {
            jp["hidden"] = {{"cracked", p.cracked}};
        }
        pipes.push_back(std::move(jp));
    }
    json j = {
        {"version", s.version},
        {"seed", s.seed},
        {"profile", toJson(s.profile)},
        {"panel", {{"width", s.panel.width}, {"height", s.panel.height}}},
        {"valves", std::move(valves)},
        {"gauges", std::move(gauges)},
        {"contributions", s.contributions},
        {"pipes", std::move(pipes)},
        {"requiredActionCount", s.requiredActionCount},
    };
    return j;
}

Scenario scenarioFromJson(const json& j) {
    try {
        Scenario s;
        s.version = j.at("version").get<int>();
        if (s.version != 1) {
            throw Error(ErrorCode::InvalidProfile, "unsupported scenario version " + std::to_string(s.version));
        }
        s.seed = j.at("seed").get<std::uint64_t>();
        s.profile = profileFromJson(j.at("profile"));
        s.panel = {j.at("panel").at("width").get<double>(), j.at("panel").at("height").get<double>()};
        for (const auto& jv : j.at("valves")) {
            s.valves.push_back(
                {jv.at("id").get<std::string>(), kindFrom(jv.at("kind").get<std::string>()), pointFrom(jv.at("position"))});
            s.initialStates.push_back(jv.at("initialState").get<double>());
        }
        for (const auto& jg : j.at("gauges")) {
            s.gauges.push_back({jg.at("id").get<std::string>(), pointFrom(jg.at("position")), jg.at("target").get<double>()});
        }
        s.contributions = j.at("contributions").get<std::vector<std::vector<double>>>();
        for (const auto& jp : j.at("pipes")) {
            PipeSegment p{jp.at("id").get<std::string>(), pointFrom(jp.at("a")), pointFrom(jp.at("b")), false,
                          jp.at("mustCheck").get<bool>()};
            p.cracked = jp.at("hidden").at("cracked").get<bool>();
            s.pipes.push_back(std::move(p));
        }
        s.requiredActionCount = j.at("requiredActionCount").get<int>();
        s.validate();
        return s;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidProfile, std::string("malformed scenario: ") + e.what());
    }
}

std::string dumpScenario(const Scenario& s) { return toJson(s).dump(2) + "\n"; }

void writeScenario(const Scenario& s, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot open '" + path.string() + "' for writing");
    }
    out << dumpScenario(s);
}

Scenario readScenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
    }
    json j;
    try {
        j = json::parse(in);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidProfile, std::string("scenario is not valid JSON: ") + e.what());
    }
    return scenarioFromJson(j);
}

} // namespace handrem
