#pragma once

#include "handrem/events.hpp"
#include "handrem/kinematics.hpp"
#include "handrem/world.hpp"

#include <deque>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace handrem {

enum class Mode { NonAssisted, Assisted };
enum class Phase { Exploration, Guidance, LocalSolve, Retraction };
enum class ActionKind { Toggle, Regulate, Sense };
enum class ActionStatus { Pending, Aiming, Acting, Retracting, Done, Aborted };

std::string_view nameOf(Mode m) noexcept;
std::string_view nameOf(Phase p) noexcept;
std::string_view nameOf(ActionKind k) noexcept;
std::string_view nameOf(ActionStatus s) noexcept;
std::optional<Mode> modeFrom(std::string_view s) noexcept;

struct ControlParams {
    WorkspaceLimits limits;
    double autoTipSpeed = 0.5;       ///< m/s, assisted aiming and retraction
    double autoTipTurnRate = 2.0;    ///< rad/s, assisted tip reorientation
    double regRate = 0.5;            ///< open-fraction/s, assisted regulation cap
    double regGain = 1.0;            ///< proportional gain of assisted regulation (per tick)
    double regTolerance = 1e-9;      ///< assisted regulation stops within this gauge error
    double manualRate = 0.25;        ///< open-fraction/s while activation is held
    double graceTime = 0.5;          ///< s a target may be out of reach before abort
    double guidanceThreshold = 10.0 * std::numbers::pi / 180.0;
    double deflectionGain = 0.4 / (std::numbers::pi / 3.0); ///< m/s per rad
    double maxWorkerSpeed = 0.4;     ///< m/s
    double selectCone = 5.0 * std::numbers::pi / 180.0;
    double crouchTolerance = 1e-3;   ///< pose distance counted as "at CROUCH"

    friend bool operator==(const ControlParams&, const ControlParams&) = default;
};

/// Reference to a task object by kind and index into the scenario.
struct TargetRef {
    enum class Kind { Valve, Pipe } kind = Kind::Valve;
    std::size_t index = 0;
    friend bool operator==(const TargetRef&, const TargetRef&) = default;
};

[[nodiscard]] std::optional<TargetRef> findTarget(const Scenario& s, std::string_view id);
[[nodiscard]] const std::string& targetId(const Scenario& s, TargetRef t);

/// World contact point the tip can reach for `target` from `base`, or nothing
/// if no pose inside the limits touches it.
[[nodiscard]] std::optional<Vec3> reachableContact(const World& world, TargetRef target, const BasePose& base,
                                                   const ControlParams& params);

struct DelegatedAction {
    std::string targetId;
    TargetRef target;
    ActionKind kind = ActionKind::Toggle;
    ActionStatus status = ActionStatus::Pending;
    /// Remaining tip setpoints. While aiming they are world-frame poses
    /// (held fixed under base motion); while retracting they are tip-local.
    std::deque<Pose5> plan;
    Vec3 contact;               ///< world-frame goal point
    double outOfReachFor = 0.0; ///< s the goal has been unreachable
    SenseProgress sense;
    int regulationTicks = 0;
    std::string abortReason;

    [[nodiscard]] bool live() const { return status != ActionStatus::Done && status != ActionStatus::Aborted; }
    friend bool operator==(const DelegatedAction&, const DelegatedAction&) = default;
};

/// Robot pose state owned by the session.
struct RobotState {
    BasePose base;
    Pose5 tipLocal;
    friend bool operator==(const RobotState&, const RobotState&) = default;
};

/// Per-session state of manual (non-assisted) tip operation.
struct ManualState {
    bool previousActivate = false;
    std::optional<std::size_t> adjusting; ///< continuous valve being turned
    SenseProgress sense;
    friend bool operator==(const ManualState&, const ManualState&) = default;
};

struct ManualInput {
    Pose5 wand;
    bool activate = false;
};

/// One tick of manual control: the tip follows the wand; activation acts on
/// whatever the tip touches.
void manualStep(const ManualInput& input, ManualState& state, World& world, RobotState& robot, double dt,
                const ControlParams& params, std::vector<Event>& events);

/// Create a delegated action for `targetId`. Throws Error with NotFound,
/// OutOfReach or BusyWithAction.
[[nodiscard]] DelegatedAction select(std::string_view targetId, const World& world, const BasePose& base,
                                     const std::optional<DelegatedAction>& current, const ControlParams& params);

/// Nearest object whose direction from the tip lies within the selection cone
/// of the tip ray.
[[nodiscard]] std::optional<std::string> selectByRay(const World& world, const RobotState& robot,
                                                     const ControlParams& params);

/// Activation confirms a pending action and starts aiming.
void startAction(DelegatedAction& action, const RobotState& robot, const ControlParams& params, double dt,
                 std::vector<Event>& events);

/// One tick of an activated delegated action.
void assistStep(DelegatedAction& action, World& world, RobotState& robot, double dt, const ControlParams& params,
                std::vector<Event>& events);

struct PhaseObservation {
    std::optional<ActionStatus> action;
    bool touching = false;
    bool activating = false;
    bool tipAtCrouch = false;
    double deflectionAngle = 0.0;
    bool verbalGuidance = false;
};

/// Observational phase tracker; moves along the interaction cycle one step
/// per update, skipping guidance when the target is already in reach.
[[nodiscard]] Phase phaseUpdate(const PhaseObservation& obs, Phase current, const ControlParams& params);

struct GuidanceCue {
    double speedHint = 0.0;
    std::optional<Vec2> direction; ///< tip-frame lateral direction
};

[[nodiscard]] GuidanceCue guidanceCue(const Pose5& tipLocal, const ControlParams& params);

[[nodiscard]] bool atPosture(const Pose5& tip, Posture which, const ControlParams& params);

} // namespace handrem
