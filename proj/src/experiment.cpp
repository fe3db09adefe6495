#include "handrem/experiment.hpp"

#include "handrem/error.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace handrem {

RunResult runHeadless(std::shared_ptr<const Scenario> scenario, Mode mode, const ExperimentOptions& options) {
    const Config& cfg = options.config;
    Session session(scenario, {cfg, mode, true});
    const std::uint64_t seed = scenario->seed;
    OperatorAgent op(*scenario, mode, cfg.control, cfg.tickRate, options.operatorParams, Rng::mix(seed ^ 0x0e7a));
    WorkerAgent worker(*scenario, cfg.control, cfg.tickRate, options.workerParams, Rng::mix(seed ^ 0x3047));

    const auto& down = cfg.latency.downlink;
    const bool instant = down.delayMs == 0.0 && down.jitterMs == 0.0;
    DelayQueue<Snapshot> toRemote(down, cfg.tickRate, cfg.latency.seed ^ 0x7e3);
    DelayQueue<Snapshot> toLocal(down, cfg.tickRate, cfg.latency.seed ^ 0x10c);

    const auto cap = static_cast<std::int64_t>(std::ceil(cfg.simTimeCap * cfg.tickRate - 1e-9));
    while (!session.goalReached() && session.tick() < cap) {
        const std::int64_t now = session.tick();
        std::vector<Snapshot> remote;
        std::vector<Snapshot> local;
        if (instant) {
            remote.push_back(session.snapshot(Role::Remote));
            local.push_back(session.snapshot(Role::Local));
        } else {
            toRemote.put(0, session.snapshot(Role::Remote), now);
            toLocal.put(0, session.snapshot(Role::Local), now);
            remote = toRemote.popDue(now);
            local = toLocal.popDue(now);
        }
        for (const auto& s : remote) {
            for (auto& c : op.step(s)) {
                session.submit(std::move(c));
            }
        }
        for (const auto& s : local) {
            for (auto& c : worker.step(s)) {
                session.submit(std::move(c));
            }
        }
        session.step();
    }
    session.finish();

    RunResult r;
    r.seed = seed;
    r.mode = mode;
    const Metrics m = metrics(session.log());
    r.completionTime = m.completionTime;
    r.msgRemote = m.msgRemote;
    r.msgLocal = m.msgLocal;
    r.actions = m.actions;
    r.dnf = !m.completionTime.has_value();
    if (options.keepLogs) {
        r.log = std::make_shared<const SessionLog>(session.log());
    }
    return r;
}

std::vector<RunResult> runExperiment(const std::vector<std::uint64_t>& seeds, const std::vector<Mode>& modes,
                                     const ExperimentOptions& options) {
    if (seeds.empty()) {
        throw Error(ErrorCode::InvalidConfig, "no seeds given");
    }
    std::vector<RunResult> runs;
    runs.reserve(seeds.size() * modes.size());
    for (std::uint64_t seed : seeds) {
        const auto scenario = std::make_shared<const Scenario>(generateScenario(seed, options.profile));
        for (Mode mode : modes) {
            runs.push_back(runHeadless(scenario, mode, options));
        }
    }
    return runs;
}

Summary summarize(const std::vector<RunResult>& runs) {
    Summary s;
    std::map<Mode, int> finished;
    std::map<std::uint64_t, std::map<Mode, const RunResult*>> bySeed;
    for (const auto& r : runs) {
        auto& m = s.modes[r.mode];
        ++m.runs;
        m.meanMsgRemote += r.msgRemote;
        m.meanMsgLocal += r.msgLocal;
        m.meanActions += r.actions;
        m.totalMessages += r.msgRemote + r.msgLocal;
        if (r.dnf || !r.completionTime) {
            ++m.dnf;
        } else {
            m.meanCompletion += *r.completionTime;
            ++finished[r.mode];
        }
        bySeed[r.seed][r.mode] = &r;
    }
    for (auto& [mode, m] : s.modes) {
        m.meanMsgRemote /= m.runs;
        m.meanMsgLocal /= m.runs;
        m.meanActions /= m.runs;
        if (finished[mode] > 0) {
            m.meanCompletion /= finished[mode];
        }
    }
    const auto a = s.modes.find(Mode::Assisted);
    const auto n = s.modes.find(Mode::NonAssisted);
    if (a != s.modes.end() && n != s.modes.end()) {
        if (finished[Mode::Assisted] > 0 && finished[Mode::NonAssisted] > 0 && n->second.meanCompletion > 0.0) {
            s.timeRatio = a->second.meanCompletion / n->second.meanCompletion;
        }
        if (n->second.totalMessages > 0) {
            s.messageRatio = static_cast<double>(a->second.totalMessages) / n->second.totalMessages;
        }
    }
    for (const auto& [seed, pair] : bySeed) {
        const auto ia = pair.find(Mode::Assisted);
        const auto in = pair.find(Mode::NonAssisted);
        if (ia == pair.end() || in == pair.end()) {
            continue;
        }
        const RunResult& ra = *ia->second;
        const RunResult& rn = *in->second;
        if (ra.dnf && rn.dnf) {
            continue;
        }
        ++s.pairedSeeds;
        if (!ra.dnf && (rn.dnf || *ra.completionTime < *rn.completionTime)) {
            ++s.assistedFaster;
        }
    }
    return s;
}

void writeRunsCsv(const std::vector<RunResult>& runs, std::ostream& out) {
    out << "seed,mode,completionTime,msgRemote,msgLocal,actions,dnf\n";
    char buf[64];
    for (const auto& r : runs) {
        out << r.seed << ',' << nameOf(r.mode) << ',';
        if (r.completionTime) {
            std::snprintf(buf, sizeof buf, "%.2f", *r.completionTime);
            out << buf;
        }
        out << ',' << r.msgRemote << ',' << r.msgLocal << ',' << r.actions << ',' << (r.dnf ? 1 : 0) << '\n';
    }
}

std::vector<RunResult> readRunsCsv(std::istream& in) {
    std::vector<RunResult> runs;
    std::string line;
    int lineNo = 0;
    const auto bad = [&](const std::string& what) {
        throw Error(ErrorCode::CorruptLog, "csv line " + std::to_string(lineNo) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineNo;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty() || (lineNo == 1 && line.rfind("seed,", 0) == 0)) {
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) {
            f.push_back(cell);
        }
        if (line.back() == ',') {
            f.emplace_back();
        }
        if (f.size() != 7) {
            bad("expected 7 fields");
        }
        RunResult r;
        try {
            std::size_t used = 0;
            r.seed = std::stoull(f[0], &used);
            const auto mode = modeFrom(f[1]);
            if (!mode) {
                bad("unknown mode '" + f[1] + "'");
            }
            r.mode = *mode;
            if (!f[2].empty()) {
                r.completionTime = std::stod(f[2]);
            }
            r.msgRemote = std::stoi(f[3]);
            r.msgLocal = std::stoi(f[4]);
            r.actions = std::stoi(f[5]);
            r.dnf = std::stoi(f[6]) != 0;
        } catch (const std::logic_error&) {
            bad("malformed number");
        }
        if (!r.dnf && !r.completionTime) {
            bad("finished run without a completion time");
        }
        runs.push_back(r);
    }
    return runs;
}

void writeAggregateCsv(const Summary& s, std::ostream& out) {
    out << "mode,runs,dnf,meanCompletionTime,meanMsgRemote,meanMsgLocal,meanActions,totalMessages\n";
    char buf[160];
    for (const auto& [mode, m] : s.modes) {
        std::snprintf(buf, sizeof buf, "%s,%d,%d,%.2f,%.2f,%.2f,%.2f,%d\n", std::string(nameOf(mode)).c_str(), m.runs,
                      m.dnf, m.meanCompletion, m.meanMsgRemote, m.meanMsgLocal, m.meanActions, m.totalMessages);
        out << buf;
    }
    if (s.timeRatio || s.messageRatio) {
        std::snprintf(buf, sizeof buf, "RATIO,,,%.4f,,,,%.4f\n", s.timeRatio.value_or(NAN),
                      s.messageRatio.value_or(NAN));
        out << buf;
    }
}

void printSummary(const Summary& s, std::ostream& out) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%-13s %5s %4s %10s %10s %10s %8s\n", "mode", "runs", "dnf", "time[s]", "msgRemote",
                  "msgLocal", "actions");
    out << buf;
    for (const auto& [mode, m] : s.modes) {
        std::snprintf(buf, sizeof buf, "%-13s %5d %4d %10.2f %10.2f %10.2f %8.2f\n", std::string(nameOf(mode)).c_str(),
                      m.runs, m.dnf, m.meanCompletion, m.meanMsgRemote, m.meanMsgLocal, m.meanActions);
        out << buf;
    }
    if (s.timeRatio) {
        std::snprintf(buf, sizeof buf, "time ratio assisted/non-assisted:    %.3f (%.1f%% faster)\n", *s.timeRatio,
                      100.0 * (1.0 - *s.timeRatio));
        out << buf;
    }
    if (s.messageRatio) {
        std::snprintf(buf, sizeof buf, "message ratio assisted/non-assisted: %.3f\n", *s.messageRatio);
        out << buf;
    }
    if (s.pairedSeeds > 0) {
        std::snprintf(buf, sizeof buf, "assisted faster on %d of %d paired seeds\n", s.assistedFaster, s.pairedSeeds);
        out << buf;
    }
}

} // namespace handrem
