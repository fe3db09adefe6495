// handrem: scenario generation, live sessions, headless experiments, replay.

#include "handrem/config.hpp"
#include "handrem/error.hpp"
#include "handrem/experiment.hpp"
#include "handrem/scenario_io.hpp"
#include "handrem/server.hpp"
#include "handrem/session_log.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace handrem;

namespace {

constexpr int kUsage = 2;
constexpr int kIntegrity = 3;

int exitCodeFor(ErrorCode code) {
    switch (code) {
    case ErrorCode::CorruptLog:
    case ErrorCode::EmptyLog:
    case ErrorCode::Protocol: return kIntegrity;
    default: return kUsage;
    }
}

std::vector<std::uint64_t> parseSeeds(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto dots = part.find("..");
        try {
            if (dots == std::string::npos) {
                seeds.push_back(std::stoull(part));
                continue;
            }
            const auto a = std::stoull(part.substr(0, dots));
            const auto b = std::stoull(part.substr(dots + 2));
            if (b < a || b - a > 1000000) {
                throw std::invalid_argument(part);
            }
            for (auto s = a; s <= b; ++s) {
                seeds.push_back(s);
            }
        } catch (const std::logic_error&) {
            throw Error(ErrorCode::InvalidConfig, "bad seed list '" + text + "' (use A..B or a,b,c)");
        }
    }
    if (seeds.empty()) {
        throw Error(ErrorCode::InvalidConfig, "no seeds given");
    }
    return seeds;
}

std::vector<Mode> parseModes(const std::string& text) {
    if (text == "both") {
        return {Mode::NonAssisted, Mode::Assisted};
    }
    if (const auto m = modeFrom(text)) {
        return {*m};
    }
    if (text == "assisted") {
        return {Mode::Assisted};
    }
    if (text == "non-assisted" || text == "manual") {
        return {Mode::NonAssisted};
    }
    throw Error(ErrorCode::InvalidConfig, "unknown mode '" + text + "'");
}

Mode parseMode(const std::string& text) {
    const auto modes = parseModes(text);
    if (modes.size() != 1) {
        throw Error(ErrorCode::InvalidConfig, "pick one mode");
    }
    return modes.front();
}

std::ofstream openOut(const std::string& path) {
    std::ofstream out(path);
    if (!out) {
        throw Error(ErrorCode::Io, "cannot write '" + path + "'");
    }
    return out;
}

Server* g_server = nullptr;

void onSignal(int) {
    if (g_server) {
        g_server->stop();
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Handheld-robot remote assistance simulator"};
    app.require_subcommand(1);

    std::string configPath;
    if (const char* env = std::getenv("HANDREM_CONFIG")) {
        configPath = env;
    }
    app.add_option("--config", configPath, "JSON config file (default: $HANDREM_CONFIG)");
    std::optional<double> tickRate;
    app.add_option("--tick-rate", tickRate, "simulation ticks per second");

    // gen-scenario
    auto* gen = app.add_subcommand("gen-scenario", "write a seeded scenario");
    std::uint64_t genSeed = 1;
    std::string genProfile = "6,2,3";
    std::string genOut;
    gen->add_option("--seed", genSeed, "scenario seed")->required();
    gen->add_option("--profile", genProfile, "required discrete,continuous,pipes")->capture_default_str();
    gen->add_option("--out", genOut, "output file (stdout if omitted)");

    // serve
    auto* serve = app.add_subcommand("serve", "run a live session for one REMOTE and one LOCAL client");
    std::string serveScenario;
    std::optional<std::uint64_t> serveSeed;
    std::string serveMode = "NON_ASSISTED";
    std::optional<double> latencyMs;
    std::optional<double> jitterMs;
    std::optional<int> port;
    std::string host = "127.0.0.1";
    std::optional<std::string> serveLog;
    bool scriptedLocal = false;
    bool allowSwitch = false;
    auto* scenarioOpt = serve->add_option("--scenario", serveScenario, "scenario file");
    serve->add_option("--seed", serveSeed, "generate the scenario from this seed instead")->excludes(scenarioOpt);
    serve->add_option("--mode", serveMode, "NON_ASSISTED or ASSISTED")->capture_default_str();
    serve->add_option("--latency", latencyMs, "one-way delay in ms for commands and snapshots");
    serve->add_option("--jitter", jitterMs, "uniform jitter in ms on top of the delay");
    serve->add_option("--port", port, "TCP port");
    serve->add_option("--host", host, "listen address")->capture_default_str();
    serve->add_option("--log", serveLog, "session log path");
    serve->add_flag("--scripted-local", scriptedLocal, "run the scripted local worker in-process");
    serve->add_flag("--allow-mode-switch", allowSwitch, "accept SetMode from the remote client");

    // headless
    auto* headless = app.add_subcommand("headless", "run scripted agents over many seeds");
    std::string seedsText = "1..100";
    std::string modesText = "both";
    std::string headlessProfile = "6,2,3";
    std::string csvOut;
    std::string aggregateOut;
    std::string logsDir;
    headless->add_option("--seeds", seedsText, "A..B or a,b,c")->capture_default_str();
    headless->add_option("--modes", modesText, "both, ASSISTED or NON_ASSISTED")->capture_default_str();
    headless->add_option("--profile", headlessProfile, "discrete,continuous,pipes")->capture_default_str();
    headless->add_option("--out", csvOut, "per-run CSV (stdout if omitted)");
    headless->add_option("--aggregate", aggregateOut, "aggregate CSV");
    headless->add_option("--logs", logsDir, "directory for per-run session logs");

    // replay
    auto* replayCmd = app.add_subcommand("replay", "re-run a session log");
    std::string replayLog;
    bool verify = false;
    replayCmd->add_option("--log", replayLog, "session log")->required();
    replayCmd->add_flag("--verify", verify, "fail on any state hash mismatch");

    // report
    auto* report = app.add_subcommand("report", "summarise a harness CSV or a session log");
    std::string reportCsv;
    std::string reportLog;
    auto* csvOpt = report->add_option("--csv", reportCsv, "per-run CSV from headless");
    report->add_option("--log", reportLog, "session log")->excludes(csvOpt);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kUsage;
    }

    try {
        Config config;
        if (!configPath.empty()) {
            config = loadConfig(configPath);
        }
        if (tickRate) {
            config.tickRate = *tickRate;
        }
        config.validate();

        if (*gen) {
            const Scenario s = generateScenario(genSeed, parseProfile(genProfile));
            if (genOut.empty()) {
                std::cout << dumpScenario(s);
            } else {
                writeScenario(s, genOut);
            }
            return 0;
        }

        if (*serve) {
            ServeOptions opts;
            if (latencyMs) {
                config.latency.uplink.delayMs = config.latency.downlink.delayMs = *latencyMs;
            }
            if (jitterMs) {
                config.latency.uplink.jitterMs = config.latency.downlink.jitterMs = *jitterMs;
            }
            if (port) {
                config.port = *port;
            }
            if (allowSwitch) {
                config.allowModeSwitch = true;
            }
            config.validate();
            opts.config = config;
            opts.mode = parseMode(serveMode);
            if (!serveScenario.empty()) {
                opts.scenario = std::make_shared<const Scenario>(readScenario(serveScenario));
            } else {
                opts.scenario = std::make_shared<const Scenario>(generateScenario(serveSeed.value_or(1)));
            }
            opts.scriptedLocal = scriptedLocal;
            opts.host = host;
            opts.logPath = serveLog.value_or(config.logPath);
            Server server(opts);
            g_server = &server;
            std::signal(SIGINT, onSignal);
            std::signal(SIGTERM, onSignal);
            const int bound = server.listen();
            std::cerr << "listening on " << host << ":" << bound << " (" << nameOf(opts.mode) << ")\n";
            const SessionLog log = server.run();
            g_server = nullptr;
            const Metrics m = metrics(log);
            std::cerr << "session ended at tick " << log.endTick.value_or(0) << "; log " << opts.logPath.string()
                      << "\n";
            if (m.completionTime) {
                std::cerr << "completion time " << *m.completionTime << " s\n";
            }
            return 0;
        }

        if (*headless) {
            ExperimentOptions opts;
            opts.config = config;
            opts.profile = parseProfile(headlessProfile);
            opts.keepLogs = !logsDir.empty();
            const auto runs = runExperiment(parseSeeds(seedsText), parseModes(modesText), opts);
            if (csvOut.empty()) {
                writeRunsCsv(runs, std::cout);
            } else {
                auto out = openOut(csvOut);
                writeRunsCsv(runs, out);
            }
            const Summary summary = summarize(runs);
            if (!aggregateOut.empty()) {
                auto out = openOut(aggregateOut);
                writeAggregateCsv(summary, out);
            }
            if (!logsDir.empty()) {
                std::filesystem::create_directories(logsDir);
                for (const auto& r : runs) {
                    const auto name = "seed" + std::to_string(r.seed) + "_" + std::string(nameOf(r.mode)) + ".jsonl";
                    writeLog(*r.log, std::filesystem::path(logsDir) / name);
                }
            }
            printSummary(summary, csvOut.empty() ? std::cerr : std::cout);
            return 0;
        }

        if (*replayCmd) {
            const SessionLog log = readLog(std::filesystem::path(replayLog));
            const ReplayReport r = replay(log);
            std::cout << (r.ok ? "OK: " : "MISMATCH: ") << r.message << "\n";
            if (!r.ok && verify) {
                return kIntegrity;
            }
            return 0;
        }

        if (*report) {
            if (!reportLog.empty()) {
                const Metrics m = metrics(readLog(std::filesystem::path(reportLog)));
                std::cout << "completionTime " << (m.completionTime ? std::to_string(*m.completionTime) : "DNF") << "\n"
                          << "duration " << m.duration << "\n"
                          << "msgRemote " << m.msgRemote << "\nmsgLocal " << m.msgLocal << "\n"
                          << "actions " << m.actions << "\n";
                for (const auto& [k, v] : m.actionCounts) {
                    std::cout << "  " << k << " " << v << "\n";
                }
                for (const auto& [k, v] : m.phaseDurations) {
                    std::cout << "phase " << k << " " << v << " s\n";
                }
                return 0;
            }
            if (reportCsv.empty()) {
                std::cerr << "report needs --csv or --log\n";
                return kUsage;
            }
            std::ifstream in(reportCsv);
            if (!in) {
                throw Error(ErrorCode::Io, "cannot open '" + reportCsv + "'");
            }
            const auto runs = readRunsCsv(in);
            if (runs.empty()) {
                throw Error(ErrorCode::EmptyLog, "no runs in '" + reportCsv + "'");
            }
            const Summary summary = summarize(runs);
            printSummary(summary, std::cout);
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exitCodeFor(e.code());
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kUsage;
    }
    return 0;
}
