#pragma once

#include "handrem/config.hpp"
#include "handrem/control.hpp"
#include "handrem/events.hpp"
#include "handrem/random.hpp"
#include "handrem/world.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace handrem {

enum class Role { Remote, Local };
std::string_view nameOf(Role r) noexcept;
std::optional<Role> roleFrom(std::string_view s) noexcept;

// --- command payloads ------------------------------------------------------

struct WandPose {
    Pose5 pose;
    friend bool operator==(const WandPose&, const WandPose&) = default;
};
struct Activate {
    bool on = false;
    friend bool operator==(const Activate&, const Activate&) = default;
};
/// Empty target selects by ray proximity.
struct Select {
    std::string target;
    friend bool operator==(const Select&, const Select&) = default;
};
struct SetMode {
    Mode mode = Mode::NonAssisted;
    friend bool operator==(const SetMode&, const SetMode&) = default;
};
/// Planar velocity of the carried base (world frame) and heading rate.
struct BaseMove {
    Vec2 velocity;
    double headingRate = 0.0;
    friend bool operator==(const BaseMove&, const BaseMove&) = default;
};
struct ChatMsg {
    std::string text;
    friend bool operator==(const ChatMsg&, const ChatMsg&) = default;
};
struct CameraAim {
    double pan = 0.0;
    double tilt = 0.0;
    friend bool operator==(const CameraAim&, const CameraAim&) = default;
};

using Payload = std::variant<WandPose, Activate, Select, SetMode, BaseMove, ChatMsg, CameraAim>;

std::string_view payloadType(const Payload& p) noexcept;

struct Command {
    Role sender = Role::Remote;
    std::uint64_t seq = 0;
    std::int64_t sentTick = 0;
    Payload payload;
    friend bool operator==(const Command&, const Command&) = default;
};

/// Role rules: wand, select, activate and camera from REMOTE; base motion from
/// LOCAL; chat from either; mode switches from REMOTE.
[[nodiscard]] bool roleLegal(const Command& c) noexcept;

// --- latency -----------------------------------------------------------------

/// Per-sender FIFO delivery with fixed delay plus uniform jitter. Delivery
/// ticks are clamped to be monotone per sender, so jitter never reorders.
template <typename T>
class DelayQueue {
public:
    DelayQueue(LatencyLeg leg, double tickRate, std::uint64_t seed) : leg_(leg), tickRate_(tickRate), rng_(seed, 0xde1a7) {}

    /// Ticks of delay for one item: at least one (next tick).
    std::int64_t delayTicks() {
        double ms = leg_.delayMs;
        if (leg_.jitterMs > 0.0) {
            ms += rng_.uniform(0.0, leg_.jitterMs);
        }
        const double ticks = std::ceil(ms / 1000.0 * tickRate_ - 1e-9);
        return std::max<std::int64_t>(1, static_cast<std::int64_t>(ticks));
    }

    /// Returns the delivery tick.
    std::int64_t put(int sender, T item, std::int64_t now) {
        std::int64_t due = now + delayTicks();
        auto& last = lastDue_[sender];
        due = std::max(due, last);
        last = due;
        pending_.push_back({due, sender, nextOrder_++, std::move(item)});
        return due;
    }

    /// Items due at or before `tick`, in per-sender send order.
    std::vector<T> popDue(std::int64_t tick) {
        std::vector<Entry> due;
        std::vector<Entry> keep;
        for (auto& e : pending_) {
            (e.due <= tick ? due : keep).push_back(std::move(e));
        }
        pending_ = std::move(keep);
        std::stable_sort(due.begin(), due.end(), [](const Entry& a, const Entry& b) {
            return a.sender != b.sender ? a.sender < b.sender : a.order < b.order;
        });
        std::vector<T> out;
        out.reserve(due.size());
        for (auto& e : due) {
            out.push_back(std::move(e.item));
        }
        return out;
    }

    [[nodiscard]] std::size_t pending() const { return pending_.size(); }

private:
    struct Entry {
        std::int64_t due;
        int sender;
        std::uint64_t order;
        T item;
    };
    LatencyLeg leg_;
    double tickRate_;
    Rng rng_;
    std::map<int, std::int64_t> lastDue_;
    std::vector<Entry> pending_;
    std::uint64_t nextOrder_ = 0;
};

// --- snapshots ---------------------------------------------------------------

struct ChatLine {
    Role from = Role::Remote;
    std::int64_t tick = 0;
    std::string text;
    friend bool operator==(const ChatLine&, const ChatLine&) = default;
};

struct ActionView {
    std::string target;
    ActionKind kind = ActionKind::Toggle;
    ActionStatus status = ActionStatus::Pending;
    std::string abortReason;
    friend bool operator==(const ActionView&, const ActionView&) = default;
};

/// Role-filtered view of the session. REMOTE never receives crack flags,
/// gauge values or continuous valve states; LOCAL never receives gauge
/// targets or the must-check list.
struct Snapshot {
    Role role = Role::Remote;
    std::int64_t tick = 0;
    double simTime = 0.0;
    Mode mode = Mode::NonAssisted;
    Phase phase = Phase::Exploration;
    BasePose base;
    Pose5 tipLocal;
    Pose5 tipWorld;
    bool activate = false;
    CameraAim camera;
    std::vector<std::optional<double>> valveStates;
    std::vector<std::optional<double>> gaugeValues;
    std::vector<std::optional<double>> gaugeTargets;
    std::optional<std::string> sensingPipe;
    double sensingProgress = 0.0;
    double sensingRequired = 0.0;
    /// Completed readings, pipe id -> verdict.
    std::map<std::string, Verdict> readings;
    std::optional<std::string> touching;
    std::optional<ActionView> action;
    std::vector<ChatLine> chat; ///< delivered on this tick
    std::vector<Event> events;  ///< emitted on this tick
    bool goalSatisfied = false;

    friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

// --- log -----------------------------------------------------------------------

struct TickRecord {
    std::int64_t tick = 0;
    std::vector<Command> commands;
    std::vector<Event> events;
    std::optional<std::uint64_t> hash;
    friend bool operator==(const TickRecord&, const TickRecord&) = default;
};

/// Append-only session record: header, one record per tick with activity,
/// and the final tick/hash once the session ends.
struct SessionLog {
    nlohmann::json scenario;
    Config config;
    Mode mode = Mode::NonAssisted;
    std::vector<TickRecord> records;
    std::optional<std::int64_t> endTick;
    std::optional<std::uint64_t> endHash;

    [[nodiscard]] bool empty() const { return records.empty() && !endTick; }
};

// --- session -------------------------------------------------------------------

struct SessionOptions {
    Config config;
    Mode mode = Mode::NonAssisted;
    /// Keep the full log in memory (needed for replay and metrics).
    bool recordLog = true;
};

/// Authoritative tick-driven session. Single writer: all mutation happens in
/// step(); clients submit commands which pass through the uplink delay queue.
class Session {
public:
    Session(std::shared_ptr<const Scenario> scenario, SessionOptions options);

    /// Queue a command sent at the current tick. Returns its delivery tick.
    std::int64_t submit(Command cmd);
    /// Bypass the delay queue: the command is applied on the next step.
    void inject(Command cmd);

    /// Advance one tick. Returns the events emitted on that tick.
    const std::vector<Event>& step();

    [[nodiscard]] Snapshot snapshot(Role role) const;

    [[nodiscard]] std::uint64_t stateHash() const;
    [[nodiscard]] std::int64_t tick() const { return tick_; }
    [[nodiscard]] double simTime() const { return static_cast<double>(tick_) * config_.dt(); }
    [[nodiscard]] bool goalReached() const { return goalTick_.has_value(); }
    [[nodiscard]] std::optional<std::int64_t> goalTick() const { return goalTick_; }

    [[nodiscard]] const World& world() const { return world_; }
    [[nodiscard]] const RobotState& robot() const { return robot_; }
    [[nodiscard]] Mode mode() const { return mode_; }
    [[nodiscard]] Phase phase() const { return phase_; }
    [[nodiscard]] const std::optional<DelegatedAction>& action() const { return action_; }
    [[nodiscard]] const Config& config() const { return config_; }
    [[nodiscard]] const Scenario& scenario() const { return world_.scenario(); }

    /// Send and apply tick of every command applied so far.
    struct Applied {
        std::int64_t sentTick;
        std::int64_t appliedTick;
        Role sender;
        std::uint64_t seq;
    };
    [[nodiscard]] const std::vector<Applied>& appliedHistory() const { return applied_; }

    /// Seal the log with the final tick and hash.
    void finish();
    [[nodiscard]] const SessionLog& log() const { return log_; }

private:
    void apply(const Command& cmd, std::vector<Event>& events, std::vector<ChatLine>& chat);
    void moveBase(double dt);
    void advanceControl(double dt, std::vector<Event>& events);
    void updatePhase(bool verbalGuidance, std::vector<Event>& events);
    void setMode(Mode m, std::vector<Event>& events);

    Config config_;
    World world_;
    RobotState robot_;
    Mode mode_;
    Phase phase_ = Phase::Exploration;
    std::int64_t tick_ = 0;

    Pose5 wand_;
    bool activate_ = false;
    bool previousActivate_ = false;
    bool followWand_ = true;
    BaseMove baseVelocity_;
    CameraAim camera_;
    ManualState manual_;
    std::optional<DelegatedAction> action_;
    std::optional<std::int64_t> goalTick_;
    std::map<Role, std::uint64_t> lastSeq_;
    std::uint64_t commandDigest_ = 0;

    DelayQueue<Command> uplink_;
    std::vector<Command> injected_;

    std::vector<Event> tickEvents_;
    std::vector<ChatLine> tickChat_;
    std::vector<Applied> applied_;

    bool recordLog_;
    SessionLog log_;
};

// --- metrics ---------------------------------------------------------------------

struct Metrics {
    std::optional<double> completionTime; ///< s at first goal; empty if never reached
    double duration = 0.0;                ///< s covered by the log
    int msgRemote = 0;
    int msgLocal = 0;
    std::map<std::string, int> actionCounts; ///< by kind: TOGGLE, REGULATE, SENSE, plus manual ADJUST
    int actions = 0;
    std::map<std::string, double> modeShare;      ///< fraction of time per mode
    std::map<std::string, double> phaseDurations; ///< seconds per phase
};

/// Summary quantities of a session log. Throws Error(EmptyLog).
[[nodiscard]] Metrics metrics(const SessionLog& log);

} // namespace handrem
