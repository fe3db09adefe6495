#pragma once

#include "handrem/session.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace handrem {

/// JSONL: header line, one line per recorded tick, then an end line.
void writeLog(const SessionLog& log, std::ostream& out);
void writeLog(const SessionLog& log, const std::filesystem::path& path);

/// Throws Error(CorruptLog) on malformed input or a header whose config hash
/// does not match its config.
[[nodiscard]] SessionLog readLog(std::istream& in);
[[nodiscard]] SessionLog readLog(const std::filesystem::path& path);

struct ReplayReport {
    bool ok = true;
    int hashesChecked = 0;
    std::optional<std::int64_t> firstMismatch;
    std::string message;
};

/// Re-run the session from the header and the recorded commands, comparing
/// every recorded state hash.
[[nodiscard]] ReplayReport replay(const SessionLog& log);

} // namespace handrem
