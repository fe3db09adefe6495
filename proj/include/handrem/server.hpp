#pragma once

#include "handrem/agents.hpp"
#include "handrem/config.hpp"
#include "handrem/session.hpp"

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace handrem {

struct ServeOptions {
    Config config;
    Mode mode = Mode::NonAssisted;
    std::shared_ptr<const Scenario> scenario;
    /// Run the scripted worker in-process instead of waiting for a LOCAL client.
    bool scriptedLocal = false;
    /// Pace ticks to the wall clock; tests turn this off.
    bool realTime = true;
    std::string host = "127.0.0.1";
    /// Empty: do not write a log.
    std::filesystem::path logPath;
};

/// NDJSON session server: exactly one REMOTE and one LOCAL client, each
/// identified by a hello handshake. One reader thread per connection feeds a
/// mailbox that the tick loop drains; only the tick loop writes to clients.
class Server {
public:
    explicit Server(ServeOptions options);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Bind and start accepting. Returns the bound port (useful with port 0).
    int listen();
    /// Run the session until the goal is met, the time cap is hit, a client
    /// leaves, or stop() is called. Returns the final log.
    SessionLog run();
    void stop();

    [[nodiscard]] int port() const { return port_; }

private:
    struct Conn {
        int fd = -1;
        std::optional<Role> role;
        std::thread reader;
    };

    void acceptLoop();
    void readLoop(Conn* conn);
    bool handshake(Conn* conn, const std::string& line);
    void sendLine(int fd, const std::string& line);
    void broadcastEnd(const Session& session, const std::string& reason);
    void closeAll();

    ServeOptions options_;
    int listenFd_ = -1;
    int port_ = 0;
    std::thread acceptor_;
    std::atomic<bool> stopping_{false};

    std::mutex mutex_;
    std::mutex writeMutex_;
    std::condition_variable cv_;
    std::vector<std::unique_ptr<Conn>> conns_;
    std::map<Role, int> clients_;
    std::vector<Command> mailbox_;
    bool clientLeft_ = false;
    std::uint64_t serverSeq_ = 0;
};

} // namespace handrem
