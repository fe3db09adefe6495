#pragma once

#include "handrem/control.hpp"
#include "handrem/random.hpp"
#include "handrem/session.hpp"
#include "handrem/world.hpp"

#include <deque>
#include <map>
#include <numbers>
#include <optional>
#include <vector>

namespace handrem {

/// Copy of a scenario with everything a client may not know removed:
/// initial valve states and crack flags.
[[nodiscard]] Scenario publicView(const Scenario& s);

struct OperatorParams {
    double aimSpeed = 0.25;       ///< m/s of the hand-held wand
    double aimTurnRate = 2.0;     ///< rad/s
    double aimNoise = 0.005;      ///< m, per-axis aim error of one fine-aim attempt
    double settleTime = 0.3;      ///< s before the operator trusts an aim
    double guideGain = 1.5;       ///< desired worker speed per metre of offset, 1/s
    double maxGuideAngle = std::numbers::pi / 4.0;
    double minGuideAngle = 12.0 * std::numbers::pi / 180.0;
    double arriveRadius = 0.05;   ///< manual mode: guide until the target is this close to the tip centre
    double reachMargin = 0.03;    ///< assisted mode: guide until reachable with this margin
    double trimYaw = 3.0 * std::numbers::pi / 180.0;
    double holdTimingNoise = 0.1; ///< s, error in how long activation is held
    double trimTolerance = 0.006; ///< gauge error accepted from a spoken report
    int maxTrims = 8;
    /// Verbal instruction on every manual leg; assisted legs only when longer than this.
    double chatLegLength = 0.45;
    double selectTimeout = 3.0;   ///< s to wait for a selection result
};

struct WorkerParams {
    double reactionTime = 0.3;       ///< s between seeing a cue and moving
    double tremorSpeed = 0.01;       ///< m/s, stationary std-dev of carrier drift
    double tremorCorrelation = 0.95; ///< per-tick AR(1) coefficient
    int moveEvery = 5;               ///< ticks between BaseMove updates
    double replyDelay = 1.2;         ///< s to read gauges and answer
};

/// Scripted remote operator. Emits only REMOTE commands; sees only REMOTE
/// snapshots, the public scenario and LOCAL chat.
class OperatorAgent {
public:
    OperatorAgent(const Scenario& scenario, Mode mode, const ControlParams& control, double tickRate,
                  OperatorParams params, std::uint64_t seed);

    [[nodiscard]] std::vector<Command> step(const Snapshot& snap);
    [[nodiscard]] bool finished() const { return stage_ == Stage::Finished; }

    /// Number of valve/pipe tasks completed so far.
    [[nodiscard]] int tasksDone() const { return tasksDone_; }

private:
    enum class Stage {
        Start,
        NextTask,
        Guide,
        Aim,
        Settle,
        Act,
        Release,
        Trim,
        AwaitReply,
        Sense,
        Retract,
        Select,
        AwaitSelect,
        Trigger,
        AwaitDone,
        Finished,
    };
    struct Task {
        TargetRef target;
        ActionKind kind = ActionKind::Toggle;
        std::size_t gauge = 0;
        Vec2 point;
    };

    void plan(const Snapshot& snap);
    void nextTask(const Snapshot& snap);
    void guide(const Snapshot& snap);
    bool arrived(const Snapshot& snap) const;
    Vec2 targetPoint(const Task& t, const Snapshot& snap) const;
    Pose5 aimPose(const Snapshot& snap) const;
    void resampleAim();
    void manualAct(const Snapshot& snap);
    void readChat(const Snapshot& snap);
    void completeTask();
    void say(std::string text);
    void send(Payload p);
    void slew();

    Scenario scenario_;
    World model_; ///< geometry only; its valve states are meaningless
    Mode mode_;
    ControlParams control_;
    double dt_;
    OperatorParams p_;
    Rng rng_;

    Stage stage_ = Stage::Start;
    std::vector<Task> pending_;
    std::optional<Task> task_;
    int replans_ = 0;
    int tasksDone_ = 0;

    Pose5 wand_;
    Pose5 wandGoal_;
    bool wandKnown_ = false;
    Vec3 aimError_;
    int timer_ = 0;
    int trims_ = 0;
    bool activate_ = false;
    std::optional<double> lastReport_;
    std::map<std::size_t, double> reports_; ///< gauge -> last spoken value
    bool awaitingReply_ = false;
    bool needQuery_ = false;
    double expectedChange_ = 0.0;

    std::uint64_t seq_ = 0;
    std::int64_t tick_ = 0;
    std::vector<Command> out_;
};

/// Scripted local worker: follows tip deflection with reaction delay and hand
/// tremor, holds still while the tip is crouched, answers gauge questions.
class WorkerAgent {
public:
    WorkerAgent(const Scenario& scenario, const ControlParams& control, double tickRate, WorkerParams params,
                std::uint64_t seed);

    [[nodiscard]] std::vector<Command> step(const Snapshot& snap);

    /// Intended velocity for a tip pose and carrier heading, before tremor.
    [[nodiscard]] static Vec2 follow(const Pose5& tipLocal, double heading, const ControlParams& control);

private:
    struct Reply {
        std::int64_t due;
        std::vector<std::size_t> gauges;
    };

    Scenario scenario_;
    ControlParams control_;
    double dt_;
    WorkerParams p_;
    Rng rng_;
    std::deque<Vec2> intent_;
    Vec2 tremor_;
    std::optional<BaseMove> lastSent_;
    std::deque<Reply> replies_;
    std::uint64_t seq_ = 0;
    std::int64_t counter_ = 0;
};

} // namespace handrem
