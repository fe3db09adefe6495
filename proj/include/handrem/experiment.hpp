#pragma once

#include "handrem/agents.hpp"
#include "handrem/config.hpp"
#include "handrem/session.hpp"

#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace handrem {

struct ExperimentOptions {
    Config config;
    Profile profile;
    OperatorParams operatorParams;
    WorkerParams workerParams;
    bool keepLogs = false;
};

struct RunResult {
    std::uint64_t seed = 0;
    Mode mode = Mode::NonAssisted;
    std::optional<double> completionTime;
    int msgRemote = 0;
    int msgLocal = 0;
    int actions = 0;
    bool dnf = false;
    std::shared_ptr<const SessionLog> log; ///< only with keepLogs
};

/// One headless session of scripted agents over the in-process loopback,
/// capped at config.simTimeCap.
[[nodiscard]] RunResult runHeadless(std::shared_ptr<const Scenario> scenario, Mode mode,
                                    const ExperimentOptions& options);

/// Every seed in every mode; scenarios come from generateScenario(seed, profile).
[[nodiscard]] std::vector<RunResult> runExperiment(const std::vector<std::uint64_t>& seeds,
                                                   const std::vector<Mode>& modes, const ExperimentOptions& options);

struct ModeSummary {
    int runs = 0;
    int dnf = 0;
    double meanCompletion = 0.0; ///< over finished runs
    double meanMsgRemote = 0.0;
    double meanMsgLocal = 0.0;
    double meanActions = 0.0;
    int totalMessages = 0;
};

struct Summary {
    std::map<Mode, ModeSummary> modes;
    std::optional<double> timeRatio;    ///< assisted / non-assisted mean completion
    std::optional<double> messageRatio; ///< assisted / non-assisted total ChatMsg count
    int pairedSeeds = 0;                ///< seeds run in both modes, both finished
    int assistedFaster = 0;             ///< of those, seeds where assisted finished first
};

[[nodiscard]] Summary summarize(const std::vector<RunResult>& runs);

/// Per-run CSV: seed,mode,completionTime,msgRemote,msgLocal,actions,dnf
void writeRunsCsv(const std::vector<RunResult>& runs, std::ostream& out);
/// Throws Error(CorruptLog) on malformed rows.
[[nodiscard]] std::vector<RunResult> readRunsCsv(std::istream& in);
/// One row per mode plus a ratio row.
void writeAggregateCsv(const Summary& s, std::ostream& out);
void printSummary(const Summary& s, std::ostream& out);

} // namespace handrem
