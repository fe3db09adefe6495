#include "handrem/server.hpp"

#include "handrem/error.hpp"
#include "handrem/protocol.hpp"
#include "handrem/session_log.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>

namespace handrem {

using nlohmann::json;

Server::Server(ServeOptions options) : options_(std::move(options)) {
    if (!options_.scenario) {
        throw Error(ErrorCode::InvalidConfig, "server needs a scenario");
    }
    options_.config.validate();
}

Server::~Server() {
    stop();
    closeAll();
}

int Server::listen() {
    listenFd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listenFd_ < 0) {
        throw Error(ErrorCode::Io, std::string("socket: ") + std::strerror(errno));
    }
    int yes = 1;
    ::setsockopt(listenFd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(options_.config.port));
    if (::inet_pton(AF_INET, options_.host.c_str(), &addr.sin_addr) != 1) {
        throw Error(ErrorCode::InvalidConfig, "bad listen address '" + options_.host + "'");
    }
    if (::bind(listenFd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0 || ::listen(listenFd_, 8) < 0) {
        const std::string why = std::strerror(errno);
        ::close(listenFd_);
        listenFd_ = -1;
        throw Error(ErrorCode::Io, "cannot listen on port " + std::to_string(options_.config.port) + ": " + why);
    }
    socklen_t len = sizeof addr;
    ::getsockname(listenFd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    acceptor_ = std::thread([this] { acceptLoop(); });
    return port_;
}

void Server::acceptLoop() {
    while (!stopping_) {
        const int fd = ::accept(listenFd_, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) {
                continue;
            }
            return;
        }
        std::lock_guard lock(mutex_);
        if (stopping_) {
            ::close(fd);
            return;
        }
        auto conn = std::make_unique<Conn>();
        conn->fd = fd;
        Conn* raw = conn.get();
        conns_.push_back(std::move(conn));
        raw->reader = std::thread([this, raw] { readLoop(raw); });
    }
}

void Server::sendLine(int fd, const std::string& line) {
    std::lock_guard lock(writeMutex_);
    std::string data = line + "\n";
    std::size_t off = 0;
    while (off < data.size()) {
        const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n <= 0) {
            if (n < 0 && errno == EINTR) {
                continue;
            }
            return;
        }
        off += static_cast<std::size_t>(n);
    }
}

bool Server::handshake(Conn* conn, const std::string& line) {
    const auto reject = [&](const char* code, const std::string& message) {
        sendLine(conn->fd, serverMessage("error", 0, 0, {{"code", code}, {"message", message}}).dump());
        return false;
    };
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception&) {
        return reject("Protocol", "handshake is not JSON");
    }
    if (!j.is_object() || j.value("type", "") != "hello" || !j.contains("role") || !j.at("role").is_string()) {
        return reject("Protocol", "expected a hello message");
    }
    const auto role = roleFrom(j.at("role").get<std::string>());
    if (!role) {
        return reject("Protocol", "unknown role");
    }
    const json body = j.value("body", json::object());
    if (!body.is_object() || body.value("version", "") != kProtocolVersion) {
        return reject("Version", std::string("protocol version must be ") + kProtocolVersion);
    }
    {
        std::lock_guard lock(mutex_);
        if (clients_.count(*role) || (*role == Role::Local && options_.scriptedLocal)) {
            return reject("DuplicateRole", "role " + std::string(nameOf(*role)) + " is already connected");
        }
        conn->role = role;
    }
    const json welcome = {{"role", std::string(nameOf(*role))},
                          {"mode", std::string(nameOf(options_.mode))},
                          {"tickRate", options_.config.tickRate},
                          {"snapshotEvery", options_.config.snapshotEvery},
                          {"version", kProtocolVersion}};
    sendLine(conn->fd, serverMessage("welcome", 0, 0, welcome).dump());
    sendLine(conn->fd, serverMessage("scenario", 0, 0, publicScenario(*options_.scenario, *role)).dump());
    {
        std::lock_guard lock(mutex_);
        clients_[*role] = conn->fd;
    }
    cv_.notify_all();
    return true;
}

void Server::readLoop(Conn* conn) {
    std::string buffer;
    char chunk[4096];
    bool greeted = false;
    while (!stopping_) {
        const ssize_t n = ::recv(conn->fd, chunk, sizeof chunk, 0);
        if (n <= 0) {
            if (n < 0 && errno == EINTR) {
                continue;
            }
            break;
        }
        buffer.append(chunk, static_cast<std::size_t>(n));
        std::size_t nl;
        while ((nl = buffer.find('\n')) != std::string::npos) {
            std::string line = buffer.substr(0, nl);
            buffer.erase(0, nl + 1);
            if (!line.empty() && line.back() == '\r') {
                line.pop_back();
            }
            if (line.empty()) {
                continue;
            }
            if (!greeted) {
                if (!handshake(conn, line)) {
                    ::shutdown(conn->fd, SHUT_RDWR);
                    return;
                }
                greeted = true;
                continue;
            }
            try {
                Command cmd = commandFromJson(json::parse(line));
                if (cmd.sender != *conn->role) {
                    sendLine(conn->fd, serverMessage("error", 0, 0,
                                                     {{"code", "RoleMismatch"}, {"message", "sender role differs from handshake"}})
                                           .dump());
                    continue;
                }
                std::lock_guard lock(mutex_);
                mailbox_.push_back(std::move(cmd));
            } catch (const std::exception& e) {
                sendLine(conn->fd, serverMessage("error", 0, 0, {{"code", "Protocol"}, {"message", e.what()}}).dump());
            }
        }
    }
    std::lock_guard lock(mutex_);
    if (conn->role) {
        clients_.erase(*conn->role);
        clientLeft_ = true;
    }
    cv_.notify_all();
}

void Server::broadcastEnd(const Session& session, const std::string& reason) {
    json body = {{"reason", reason}, {"goalSatisfied", session.goalReached()}, {"simTime", session.simTime()}};
    if (const auto t = session.goalTick()) {
        body["completionTime"] = static_cast<double>(*t) * session.config().dt();
    }
    std::map<Role, int> targets;
    {
        std::lock_guard lock(mutex_);
        targets = clients_;
    }
    for (const auto& [role, fd] : targets) {
        sendLine(fd, serverMessage("end", ++serverSeq_, session.tick(), body).dump());
    }
}

SessionLog Server::run() {
    const Config& cfg = options_.config;
    {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] {
            return stopping_ || (clients_.count(Role::Remote) && (options_.scriptedLocal || clients_.count(Role::Local)));
        });
    }
    Session session(options_.scenario, {cfg, options_.mode, true});
    std::optional<WorkerAgent> worker;
    if (options_.scriptedLocal) {
        worker.emplace(*options_.scenario, cfg.control, cfg.tickRate, WorkerParams{},
                       Rng::mix(options_.scenario->seed ^ 0x3047));
    }
    std::map<Role, DelayQueue<std::string>> downlink;
    for (Role r : {Role::Remote, Role::Local}) {
        downlink.emplace(r, DelayQueue<std::string>(cfg.latency.downlink, cfg.tickRate,
                                                    cfg.latency.seed ^ static_cast<std::uint64_t>(r == Role::Local)));
    }
    const bool instant = cfg.latency.downlink.delayMs == 0.0 && cfg.latency.downlink.jitterMs == 0.0;
    std::map<Role, Snapshot> pendingView; // chat and events since the last snapshot sent
    const auto cap = static_cast<std::int64_t>(std::ceil(cfg.simTimeCap * cfg.tickRate - 1e-9));
    const auto start = std::chrono::steady_clock::now();
    const auto period = std::chrono::duration<double>(cfg.dt());
    std::string reason = "stopped";

    while (true) {
        std::vector<Command> inbox;
        std::map<Role, int> targets;
        {
            std::lock_guard lock(mutex_);
            if (stopping_) {
                break;
            }
            if (clientLeft_) {
                reason = "client left";
                break;
            }
            inbox.swap(mailbox_);
            targets = clients_;
        }
        for (auto& c : inbox) {
            session.submit(std::move(c));
        }
        if (worker) {
            for (auto& c : worker->step(session.snapshot(Role::Local))) {
                session.submit(std::move(c));
            }
        }
        session.step();
        for (Role r : {Role::Remote, Role::Local}) {
            const Snapshot now = session.snapshot(r);
            auto& acc = pendingView[r];
            acc.chat.insert(acc.chat.end(), now.chat.begin(), now.chat.end());
            acc.events.insert(acc.events.end(), now.events.begin(), now.events.end());
            if (session.tick() % cfg.snapshotEvery != 0 || !targets.count(r)) {
                continue;
            }
            Snapshot out = now;
            out.chat = std::move(acc.chat);
            out.events = std::move(acc.events);
            acc = {};
            std::string line = serverMessage("snapshot", ++serverSeq_, session.tick(), toJson(out)).dump();
            if (instant) {
                sendLine(targets[r], line);
            } else {
                downlink.at(r).put(0, std::move(line), session.tick());
            }
        }
        if (!instant) {
            for (auto& [r, q] : downlink) {
                for (auto& line : q.popDue(session.tick())) {
                    if (targets.count(r)) {
                        sendLine(targets[r], line);
                    }
                }
            }
        }
        if (session.goalReached()) {
            reason = "goal";
            break;
        }
        if (session.tick() >= cap) {
            reason = "time cap";
            break;
        }
        if (options_.realTime) {
            std::this_thread::sleep_until(start + session.tick() * period);
        }
    }
    session.finish();
    broadcastEnd(session, reason);
    if (!options_.logPath.empty()) {
        writeLog(session.log(), options_.logPath);
    }
    return session.log();
}

void Server::stop() {
    stopping_ = true;
    cv_.notify_all();
}

void Server::closeAll() {
    stopping_ = true;
    if (listenFd_ >= 0) {
        ::shutdown(listenFd_, SHUT_RDWR);
        ::close(listenFd_);
        listenFd_ = -1;
    }
    if (acceptor_.joinable()) {
        acceptor_.join();
    }
    std::vector<std::unique_ptr<Conn>> conns;
    {
        std::lock_guard lock(mutex_);
        conns.swap(conns_);
    }
    for (auto& c : conns) {
        ::shutdown(c->fd, SHUT_RDWR);
    }
    for (auto& c : conns) {
        if (c->reader.joinable()) {
            c->reader.join();
        }
        ::close(c->fd);
    }
}

} // namespace handrem
