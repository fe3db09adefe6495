#include "handrem/session_log.hpp"

#include "handrem/error.hpp"
#include "handrem/hash.hpp"
#include "handrem/protocol.hpp"
#include "handrem/scenario_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

namespace handrem {

using nlohmann::json;

namespace {

[[noreturn]] void corrupt(const std::string& what, std::size_t line) {
    throw Error(ErrorCode::CorruptLog, "line " + std::to_string(line) + ": " + what);
}

} // namespace

void writeLog(const SessionLog& log, std::ostream& out) {
    json header = {{"type", "header"},
                   {"version", 1},
                   {"mode", std::string(nameOf(log.mode))},
                   {"configHash", toHex(configHash(log.config))},
                   {"seed", log.scenario.value("seed", std::uint64_t{0})},
                   {"config", toJson(log.config)},
                   {"scenario", log.scenario}};
    out << header.dump() << '\n';
    for (const auto& rec : log.records) {
        json cmds = json::array();
        for (const auto& c : rec.commands) {
            cmds.push_back(toJson(c));
        }
        json evs = json::array();
        for (const auto& e : rec.events) {
            evs.push_back(toJson(e));
        }
        json line = {{"type", "tick"}, {"tick", rec.tick}, {"commands", std::move(cmds)}, {"events", std::move(evs)}};
        if (rec.hash) {
            line["hash"] = toHex(*rec.hash);
        }
        out << line.dump() << '\n';
    }
    if (log.endTick) {
        json end = {{"type", "end"}, {"tick", *log.endTick}};
        if (log.endHash) {
            end["hash"] = toHex(*log.endHash);
        }
        out << end.dump() << '\n';
    }
}

void writeLog(const SessionLog& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot write log '" + path.string() + "'");
    }
    writeLog(log, out);
    if (!out) {
        throw Error(ErrorCode::Io, "write failed for '" + path.string() + "'");
    }
}

SessionLog readLog(std::istream& in) {
    SessionLog log;
    std::string text;
    std::size_t lineNo = 0;
    bool haveHeader = false;
    std::int64_t lastTick = 0;
    while (std::getline(in, text)) {
        ++lineNo;
        if (text.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        json j;
        try {
            j = json::parse(text);
        } catch (const json::exception&) {
            corrupt("not valid JSON", lineNo);
        }
        if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
            corrupt("record without a type", lineNo);
        }
        const auto type = j.at("type").get<std::string>();
        if (log.endTick) {
            corrupt("data after the end record", lineNo);
        }
        try {
            if (type == "header") {
                if (haveHeader) {
                    corrupt("duplicate header", lineNo);
                }
                if (j.at("version").get<int>() != 1) {
                    corrupt("unsupported log version", lineNo);
                }
                try {
                    log.config = configFromJson(j.at("config"), Config{});
                } catch (const Error& e) {
                    corrupt(std::string("bad config: ") + e.what(), lineNo);
                }
                if (fromHex(j.at("configHash").get<std::string>()) != configHash(log.config)) {
                    corrupt("config hash does not match the recorded config", lineNo);
                }
                const auto mode = modeFrom(j.at("mode").get<std::string>());
                if (!mode) {
                    corrupt("unknown mode", lineNo);
                }
                log.mode = *mode;
                log.scenario = j.at("scenario");
                haveHeader = true;
                continue;
            }
            if (!haveHeader) {
                corrupt("missing header", lineNo);
            }
            if (type == "tick") {
                TickRecord rec;
                rec.tick = j.at("tick").get<std::int64_t>();
                if (rec.tick <= lastTick) {
                    corrupt("ticks out of order", lineNo);
                }
                lastTick = rec.tick;
                for (const auto& c : j.at("commands")) {
                    rec.commands.push_back(commandFromJson(c));
                }
                for (const auto& e : j.at("events")) {
                    rec.events.push_back(eventFromJson(e));
                }
                if (j.contains("hash")) {
                    rec.hash = fromHex(j.at("hash").get<std::string>());
                }
                log.records.push_back(std::move(rec));
            } else if (type == "end") {
                log.endTick = j.at("tick").get<std::int64_t>();
                if (*log.endTick < lastTick) {
                    corrupt("end tick precedes recorded ticks", lineNo);
                }
                if (j.contains("hash")) {
                    log.endHash = fromHex(j.at("hash").get<std::string>());
                }
            } else {
                corrupt("unknown record type '" + type + "'", lineNo);
            }
        } catch (const json::exception& e) {
            corrupt(e.what(), lineNo);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::CorruptLog) {
                throw;
            }
            corrupt(e.what(), lineNo);
        }
    }
    if (!haveHeader) {
        throw Error(ErrorCode::EmptyLog, "log has no header");
    }
    return log;
}

SessionLog readLog(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot open log '" + path.string() + "'");
    }
    return readLog(in);
}

ReplayReport replay(const SessionLog& log) {
    ReplayReport report;
    std::shared_ptr<const Scenario> scenario;
    try {
        scenario = std::make_shared<const Scenario>(scenarioFromJson(log.scenario));
    } catch (const Error& e) {
        report.ok = false;
        report.message = std::string("scenario: ") + e.what();
        return report;
    }
    Session session(scenario, {log.config, log.mode, false});
    const std::int64_t last = log.endTick.value_or(log.records.empty() ? 0 : log.records.back().tick);
    auto rec = log.records.begin();
    const auto mismatch = [&](std::int64_t tick, std::uint64_t want, std::uint64_t got) {
        report.ok = false;
        report.firstMismatch = tick;
        report.message = "hash mismatch at tick " + std::to_string(tick) + ": recorded " + toHex(want) +
                         ", replayed " + toHex(got);
    };
    while (session.tick() < last) {
        const std::int64_t next = session.tick() + 1;
        if (rec != log.records.end() && rec->tick == next) {
            for (const auto& c : rec->commands) {
                session.inject(c);
            }
        }
        session.step();
        if (rec != log.records.end() && rec->tick == next) {
            if (rec->hash) {
                const auto got = session.stateHash();
                ++report.hashesChecked;
                if (got != *rec->hash) {
                    mismatch(next, *rec->hash, got);
                    return report;
                }
            }
            ++rec;
        }
    }
    if (rec != log.records.end()) {
        report.ok = false;
        report.message = "records beyond the end tick";
        return report;
    }
    if (log.endHash) {
        const auto got = session.stateHash();
        ++report.hashesChecked;
        if (got != *log.endHash) {
            mismatch(last, *log.endHash, got);
            return report;
        }
    }
    report.message = "replayed " + std::to_string(last) + " ticks, " + std::to_string(report.hashesChecked) +
                     " hashes match";
    return report;
}

} // namespace handrem
