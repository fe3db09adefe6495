#include "handrem/control.hpp"

#include "handrem/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace handrem {

std::string_view nameOf(Mode m) noexcept { return m == Mode::Assisted ? "ASSISTED" : "NON_ASSISTED"; }

std::optional<Mode> modeFrom(std::string_view s) noexcept {
    if (s == "ASSISTED" || s == "assisted") {
        return Mode::Assisted;
    }
    if (s == "NON_ASSISTED" || s == "non-assisted" || s == "non_assisted" || s == "manual") {
        return Mode::NonAssisted;
    }
    return std::nullopt;
}

std::string_view nameOf(Phase p) noexcept {
    switch (p) {
    case Phase::Exploration: return "EXPLORATION";
    case Phase::Guidance: return "GUIDANCE";
    case Phase::LocalSolve: return "LOCAL_SOLVE";
    case Phase::Retraction: return "RETRACTION";
    }
    return "?";
}

std::string_view nameOf(ActionKind k) noexcept {
    switch (k) {
    case ActionKind::Toggle: return "TOGGLE";
    case ActionKind::Regulate: return "REGULATE";
    case ActionKind::Sense: return "SENSE";
    }
    return "?";
}

std::string_view nameOf(ActionStatus s) noexcept {
    switch (s) {
    case ActionStatus::Pending: return "PENDING";
    case ActionStatus::Aiming: return "AIMING";
    case ActionStatus::Acting: return "ACTING";
    case ActionStatus::Retracting: return "RETRACTING";
    case ActionStatus::Done: return "DONE";
    case ActionStatus::Aborted: return "ABORTED";
    }
    return "?";
}

std::optional<TargetRef> findTarget(const Scenario& s, std::string_view id) {
    if (const auto v = s.valveIndex(id)) {
        return TargetRef{TargetRef::Kind::Valve, *v};
    }
    if (const auto p = s.pipeIndex(id)) {
        return TargetRef{TargetRef::Kind::Pipe, *p};
    }
    return std::nullopt;
}

const std::string& targetId(const Scenario& s, TargetRef t) {
    return t.kind == TargetRef::Kind::Valve ? s.valves.at(t.index).id : s.pipes.at(t.index).id;
}

namespace {

struct Box2 {
    Range x;
    Range y;

    [[nodiscard]] Vec2 clip(Vec2 p) const { return {x.clip(p.x), y.clip(p.y)}; }
    [[nodiscard]] double distance(Vec2 p) const { return (p - clip(p)).norm(); }
};

/// Parameter interval of segment a + t(b - a), t in [0, 1], inside the box.
std::optional<std::pair<double, double>> clipSegment(Vec2 a, Vec2 b, const Box2& box) {
    double t0 = 0.0;
    double t1 = 1.0;
    const Vec2 d = b - a;
    const std::array<double, 4> p{-d.x, d.x, -d.y, d.y};
    const std::array<double, 4> q{a.x - box.x.min, box.x.max - a.x, a.y - box.y.min, box.y.max - a.y};
    for (std::size_t i = 0; i < 4; ++i) {
        if (p[i] == 0.0) {
            if (q[i] < 0.0) {
                return std::nullopt;
            }
            continue;
        }
        const double r = q[i] / p[i];
        if (p[i] < 0.0) {
            t0 = std::max(t0, r);
        } else {
            t1 = std::min(t1, r);
        }
    }
    if (t0 > t1) {
        return std::nullopt;
    }
    return std::make_pair(t0, t1);
}

double projectParam(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = ab.dot(ab);
    return len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
}

double zGap(double z, const Range& r) { return z < r.min ? r.min - z : (z > r.max ? z - r.max : 0.0); }

double distanceToTarget(const World& world, TargetRef target, Vec3 tipWorld) {
    const auto& s = world.scenario();
    if (target.kind == TargetRef::Kind::Valve) {
        return (tipWorld - onPanel(s.valves.at(target.index).position)).norm();
    }
    const auto& seg = s.pipes.at(target.index);
    return distanceToSegment(tipWorld, seg.a, seg.b);
}

Pose5 lerp(const Pose5& a, const Pose5& b, double t) {
    const auto ca = a.components();
    const auto cb = b.components();
    std::array<double, 5> out{};
    for (std::size_t i = 0; i < 5; ++i) {
        out[i] = ca[i] + t * (cb[i] - ca[i]);
    }
    return Pose5::fromComponents(out);
}

/// Straight-line setpoints from `from` to `to` (exclusive of `from`),
/// limited by translational and angular speed.
std::deque<Pose5> straightLine(const Pose5& from, const Pose5& to, double speed, double turnRate, double dt) {
    const double dist = (to.position() - from.position()).norm();
    const double turn = std::max(std::abs(to.yaw - from.yaw), std::abs(to.pitch - from.pitch));
    const double steps = std::max({1.0, std::ceil(dist / (speed * dt) - 1e-9), std::ceil(turn / (turnRate * dt) - 1e-9)});
    const int n = static_cast<int>(steps);
    std::deque<Pose5> plan;
    for (int i = 1; i <= n; ++i) {
        plan.push_back(i == n ? to : lerp(from, to, static_cast<double>(i) / n));
    }
    return plan;
}

void beginRetract(DelegatedAction& action, const RobotState& robot, const ControlParams& params, double dt) {
    action.status = ActionStatus::Retracting;
    action.outOfReachFor = 0.0;
    action.plan = straightLine(robot.tipLocal, posture(Posture::Crouch, params.limits), params.autoTipSpeed,
                               params.autoTipTurnRate, dt);
}

void abortAction(DelegatedAction& action, std::string reason, std::vector<Event>& events) {
    action.status = ActionStatus::Aborted;
    action.abortReason = reason;
    action.plan.clear();
    if (reason == "ReachLost") {
        events.push_back({EventType::ReachLost, action.targetId, std::string(nameOf(action.kind))});
    }
    events.push_back({EventType::ActionAborted, action.targetId, std::move(reason)});
}

/// Goal tip pose in the world frame: at the contact point, tip ray along the
/// carrier's forward axis.
Pose5 goalWorldPose(const DelegatedAction& action, const BasePose& base) {
    return {action.contact.x, action.contact.y, action.contact.z, base.heading, 0.0};
}

/// Tracks reachability of the contact point; aborts after the grace period.
bool updateReach(DelegatedAction& action, const RobotState& robot, const ControlParams& params, double touchRadius,
                 double dt, std::vector<Event>& events) {
    const Vec3 local = toLocal(robot.base, action.contact);
    const Vec3 clipped{params.limits.x.clip(local.x), params.limits.y.clip(local.y), params.limits.z.clip(local.z)};
    if ((local - clipped).norm() <= touchRadius) {
        action.outOfReachFor = 0.0;
        return true;
    }
    action.outOfReachFor += dt;
    if (action.outOfReachFor > params.graceTime) {
        abortAction(action, "ReachLost", events);
    }
    return false;
}

} // namespace

std::optional<Vec3> reachableContact(const World& world, TargetRef target, const BasePose& base,
                                     const ControlParams& params) {
    const auto& s = world.scenario();
    const auto& lim = params.limits;
    const double touch = world.params().touchRadius;
    const Box2 box{lim.x, lim.y};
    const double zLocal = -base.z; // the panel is the Z = 0 plane
    const double dz = zGap(zLocal, lim.z);

    Vec2 pointLocal;
    if (target.kind == TargetRef::Kind::Valve) {
        const Vec3 l = toLocal(base, onPanel(s.valves.at(target.index).position));
        pointLocal = {l.x, l.y};
    } else {
        const auto& seg = s.pipes.at(target.index);
        const Vec3 a3 = toLocal(base, onPanel(seg.a));
        const Vec3 b3 = toLocal(base, onPanel(seg.b));
        const Vec2 a{a3.x, a3.y};
        const Vec2 b{b3.x, b3.y};
        if (const auto span = clipSegment(a, b, box)) {
            // inside portion: take the point nearest the workspace centre
            const double t = std::clamp(projectParam({0.0, 0.0}, a, b), span->first, span->second);
            pointLocal = a + t * (b - a);
        } else {
            double bestT = 0.0;
            double bestD = box.distance(a);
            const std::array<Vec2, 4> corners{Vec2{box.x.min, box.y.min}, Vec2{box.x.min, box.y.max},
                                              Vec2{box.x.max, box.y.min}, Vec2{box.x.max, box.y.max}};
            std::vector<double> candidates{1.0};
            for (const auto& c : corners) {
                candidates.push_back(projectParam(c, a, b));
            }
            for (double t : candidates) {
                const double d = box.distance(a + t * (b - a));
                if (d < bestD) {
                    bestD = d;
                    bestT = t;
                }
            }
            pointLocal = a + bestT * (b - a);
        }
    }
    const Vec2 clipped = box.clip(pointLocal);
    const double dxy = (pointLocal - clipped).norm();
    if (std::hypot(dxy, dz) > touch) {
        return std::nullopt;
    }
    if (dxy == 0.0 && dz == 0.0) {
        return toWorld(base, {pointLocal.x, pointLocal.y, zLocal});
    }
    return toWorld(base, {clipped.x, clipped.y, lim.z.clip(zLocal)});
}

void manualStep(const ManualInput& input, ManualState& state, World& world, RobotState& robot, double dt,
                const ControlParams& params, std::vector<Event>& events) {
    robot.tipLocal = retarget(input.wand, params.limits);
    const Vec3 tipWorld = compose(robot.base, robot.tipLocal).position();
    const auto touch = world.touched(tipWorld);
    const bool edge = input.activate && !state.previousActivate;
    state.previousActivate = input.activate;
    const auto& s = world.scenario();

    std::optional<std::size_t> turning;
    bool sensing = false;
    if (input.activate) {
        if (!touch) {
            if (edge) {
                events.push_back({EventType::NoTarget, "", "manual"});
            }
        } else if (touch->kind == World::Touch::Kind::Valve) {
            const auto& valve = s.valves[touch->index];
            if (valve.kind == ValveKind::Discrete) {
                if (edge) {
                    world.toggleDiscrete(touch->index);
                    events.push_back({EventType::ValveToggled, valve.id, world.valveState(touch->index) > 0.5 ? "OPEN" : "CLOSED"});
                }
            } else {
                const double sign = input.wand.yaw < 0.0 ? -1.0 : 1.0;
                world.adjustContinuous(touch->index, sign * params.manualRate * dt);
                turning = touch->index;
            }
        } else {
            sensing = true;
            if (auto reading = world.senseStep(touch->index, tipWorld, dt, state.sense)) {
                world.recordReading(*reading);
                events.push_back({EventType::SensorReading, reading->pipeId, std::string(nameOf(reading->verdict))});
            }
        }
    }
    if (!sensing) {
        state.sense.reset();
    }
    if (state.adjusting && state.adjusting != turning) {
        const std::size_t v = *state.adjusting;
        events.push_back({EventType::ValveAdjusted, s.valves[v].id, std::to_string(world.valveState(v))});
    }
    state.adjusting = turning;
}

DelegatedAction select(std::string_view id, const World& world, const BasePose& base,
                       const std::optional<DelegatedAction>& current, const ControlParams& params) {
    if (current && current->live() && current->status != ActionStatus::Pending) {
        throw Error(ErrorCode::BusyWithAction, "action on '" + current->targetId + "' is " +
                                                   std::string(nameOf(current->status)));
    }
    const auto& s = world.scenario();
    const auto target = findTarget(s, id);
    if (!target) {
        throw Error(ErrorCode::NotFound, "unknown target '" + std::string(id) + "'");
    }
    const auto contact = reachableContact(world, *target, base, params);
    if (!contact) {
        throw Error(ErrorCode::OutOfReach, "'" + std::string(id) + "' is outside the tip workspace");
    }
    DelegatedAction action;
    action.targetId = std::string(id);
    action.target = *target;
    action.contact = *contact;
    if (target->kind == TargetRef::Kind::Pipe) {
        action.kind = ActionKind::Sense;
    } else {
        action.kind = s.valves[target->index].kind == ValveKind::Discrete ? ActionKind::Toggle : ActionKind::Regulate;
    }
    action.status = ActionStatus::Pending;
    return action;
}

std::optional<std::string> selectByRay(const World& world, const RobotState& robot, const ControlParams& params) {
    const auto& s = world.scenario();
    const Vec3 tip = compose(robot.base, robot.tipLocal).position();
    const Vec3 rayLocal = tipRay(robot.tipLocal);
    const Vec2 rxy = rotate({rayLocal.x, rayLocal.y}, robot.base.heading);
    const Vec3 ray{rxy.x, rxy.y, rayLocal.z};
    const auto angleTo = [&](Vec3 p) {
        const Vec3 v = p - tip;
        const double n = v.norm();
        if (n <= 0.0) {
            return 0.0;
        }
        return std::acos(std::clamp(v.dot(ray) / n, -1.0, 1.0));
    };
    std::optional<std::string> best;
    double bestAngle = params.selectCone;
    for (const auto& v : s.valves) {
        const double a = angleTo(onPanel(v.position));
        if (a <= bestAngle) {
            bestAngle = a;
            best = v.id;
        }
    }
    for (const auto& p : s.pipes) {
        constexpr int kSamples = 32;
        for (int i = 0; i <= kSamples; ++i) {
            const double a = angleTo(onPanel(p.a + (static_cast<double>(i) / kSamples) * (p.b - p.a)));
            if (a < bestAngle) {
                bestAngle = a;
                best = p.id;
            }
        }
    }
    return best;
}

void startAction(DelegatedAction& action, const RobotState& robot, const ControlParams& params, double dt,
                 std::vector<Event>& events) {
    if (action.status != ActionStatus::Pending) {
        return;
    }
    action.status = ActionStatus::Aiming;
    action.outOfReachFor = 0.0;
    action.plan = straightLine(compose(robot.base, robot.tipLocal), goalWorldPose(action, robot.base),
                               params.autoTipSpeed, params.autoTipTurnRate, dt);
    events.push_back({EventType::ActionStarted, action.targetId, std::string(nameOf(action.kind))});
}

void assistStep(DelegatedAction& action, World& world, RobotState& robot, double dt, const ControlParams& params,
                std::vector<Event>& events) {
    const double touch = world.params().touchRadius;
    switch (action.status) {
    case ActionStatus::Pending:
    case ActionStatus::Done:
    case ActionStatus::Aborted:
        return;

    case ActionStatus::Aiming: {
        Pose5 setpoint = goalWorldPose(action, robot.base);
        if (!action.plan.empty()) {
            setpoint = action.plan.front();
            action.plan.pop_front();
        }
        robot.tipLocal = clamp(decompose(robot.base, setpoint), params.limits);
        if (!updateReach(action, robot, params, touch, dt, events)) {
            return;
        }
        if (action.plan.empty()) {
            action.status = ActionStatus::Acting;
        }
        return;
    }

    case ActionStatus::Acting: {
        robot.tipLocal = clamp(decompose(robot.base, goalWorldPose(action, robot.base)), params.limits);
        const Vec3 tipWorld = compose(robot.base, robot.tipLocal).position();
        const bool touching = distanceToTarget(world, action.target, tipWorld) <= touch;
        if (action.kind == ActionKind::Sense) {
            if (auto reading = world.senseStep(action.target.index, tipWorld, dt, action.sense)) {
                world.recordReading(*reading);
                events.push_back({EventType::SensorReading, reading->pipeId, std::string(nameOf(reading->verdict))});
                beginRetract(action, robot, params, dt);
                return;
            }
        }
        // a partial regulation still moved the valve
        const auto reportPartial = [&] {
            if (action.kind == ActionKind::Regulate && action.regulationTicks > 0) {
                events.push_back({EventType::ValveAdjusted, action.targetId,
                                  std::to_string(world.valveState(action.target.index))});
            }
        };
        if (!touching) {
            action.outOfReachFor += dt;
            if (action.outOfReachFor > params.graceTime) {
                reportPartial();
                abortAction(action, "ReachLost", events);
            }
            return;
        }
        action.outOfReachFor = 0.0;
        if (action.kind == ActionKind::Toggle) {
            world.toggleDiscrete(action.target.index);
            events.push_back({EventType::ValveToggled, action.targetId,
                              world.valveState(action.target.index) > 0.5 ? "OPEN" : "CLOSED"});
            beginRetract(action, robot, params, dt);
        } else if (action.kind == ActionKind::Regulate) {
            const auto& s = world.scenario();
            const std::size_t v = action.target.index;
            const std::size_t g = s.gaugeOf(v);
            const double c = s.contributions[g][v];
            const double error = s.gauges[g].target - world.gaugeValue(g);
            if (std::abs(error) <= params.regTolerance) {
                events.push_back({EventType::ValveAdjusted, action.targetId, std::to_string(world.valveState(v))});
                beginRetract(action, robot, params, dt);
                return;
            }
            const double cap = params.regRate * dt;
            const double step = std::clamp(params.regGain * error / c, -cap, cap);
            const double before = world.valveState(v);
            world.adjustContinuous(v, step);
            if (world.valveState(v) == before) {
                // at the end stop: good enough if the gauge already reads on target
                if (std::abs(error) <= world.params().gaugeTolerance) {
                    events.push_back({EventType::ValveAdjusted, action.targetId, std::to_string(before)});
                    beginRetract(action, robot, params, dt);
                    return;
                }
                reportPartial();
                abortAction(action, "Saturated", events);
                return;
            }
            ++action.regulationTicks;
            if (std::abs(s.gauges[g].target - world.gaugeValue(g)) <= params.regTolerance) {
                events.push_back({EventType::ValveAdjusted, action.targetId, std::to_string(world.valveState(v))});
                beginRetract(action, robot, params, dt);
            }
        }
        return;
    }

    case ActionStatus::Retracting: {
        if (!action.plan.empty()) {
            robot.tipLocal = clamp(action.plan.front(), params.limits);
            action.plan.pop_front();
        }
        if (action.plan.empty()) {
            action.status = ActionStatus::Done;
            events.push_back({EventType::ActionDone, action.targetId, std::string(nameOf(action.kind))});
        }
        return;
    }
    }
}

Phase phaseUpdate(const PhaseObservation& obs, Phase current, const ControlParams& params) {
    Phase observed = Phase::Exploration;
    const bool solving = obs.action == ActionStatus::Aiming || obs.action == ActionStatus::Acting ||
                         (obs.touching && obs.activating);
    if (solving) {
        observed = Phase::LocalSolve;
    } else if (obs.action == ActionStatus::Retracting || obs.tipAtCrouch) {
        observed = Phase::Retraction;
    } else if (obs.deflectionAngle > params.guidanceThreshold || obs.verbalGuidance) {
        observed = Phase::Guidance;
    }
    if (observed == current) {
        return current;
    }
    if (observed == Phase::Exploration && (current == Phase::Guidance || current == Phase::LocalSolve)) {
        return current;
    }
    switch (current) {
    case Phase::Exploration: return observed == Phase::LocalSolve ? Phase::LocalSolve : Phase::Guidance;
    case Phase::Guidance: return Phase::LocalSolve;
    case Phase::LocalSolve: return Phase::Retraction;
    case Phase::Retraction: return Phase::Exploration;
    }
    return current;
}

GuidanceCue guidanceCue(const Pose5& tipLocal, const ControlParams& params) {
    const auto d = deflection(tipLocal);
    return {std::min(params.deflectionGain * d.angle, params.maxWorkerSpeed), d.direction};
}

bool atPosture(const Pose5& tip, Posture which, const ControlParams& params) {
    const auto a = tip.components();
    const auto b = posture(which, params.limits).components();
    for (std::size_t i = 0; i < 5; ++i) {
        if (std::abs(a[i] - b[i]) > params.crouchTolerance) {
            return false;
        }
    }
    return true;
}

} // namespace handrem
