#include "handrem/agents.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>

namespace handrem {

namespace {

int ticksFor(double seconds, double dt) { return std::max(1, static_cast<int>(std::lround(seconds / dt))); }

double approach(double from, double to, double maxStep) {
    const double d = to - from;
    return std::abs(d) <= maxStep ? to : from + std::copysign(maxStep, d);
}

/// Gauge ids mentioned in a chat line ("g1", "g2?" ...).
std::vector<std::size_t> gaugesMentioned(const std::string& text, std::size_t count) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i + 1 < text.size(); ++i) {
        const bool start = i == 0 || !std::isalnum(static_cast<unsigned char>(text[i - 1]));
        if (start && text[i] == 'g' && std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
            const auto g = static_cast<std::size_t>(std::strtoul(text.c_str() + i + 1, nullptr, 10));
            if (g < count && std::find(out.begin(), out.end(), g) == out.end()) {
                out.push_back(g);
            }
        }
    }
    return out;
}

/// "g1=0.534" pairs in a chat line.
std::vector<std::pair<std::size_t, double>> gaugeReports(const std::string& text, std::size_t count) {
    std::vector<std::pair<std::size_t, double>> out;
    std::size_t pos = 0;
    while ((pos = text.find('g', pos)) != std::string::npos) {
        unsigned g = 0;
        double value = 0.0;
        int used = 0;
        if (std::sscanf(text.c_str() + pos, "g%u=%lf%n", &g, &value, &used) == 2 && g < count) {
            out.emplace_back(g, value);
            pos += static_cast<std::size_t>(used);
        } else {
            ++pos;
        }
    }
    return out;
}

std::string direction(Vec2 d) {
    std::string s;
    if (std::abs(d.x) > 0.05) {
        s = d.x > 0 ? "right" : "left";
    }
    if (std::abs(d.y) > 0.05) {
        s += s.empty() ? "" : " and ";
        s += d.y > 0 ? "up" : "down";
    }
    return s.empty() ? "here" : s;
}

/// The wand is where the hand wants it, give or take the tracking lag.
bool near(const Pose5& a, const Pose5& b) {
    return (a.position() - b.position()).norm() <= 2e-3 && std::abs(a.yaw - b.yaw) <= 1e-3 &&
           std::abs(a.pitch - b.pitch) <= 1e-3;
}

} // namespace

Scenario publicView(const Scenario& s) {
    Scenario out = s;
    std::fill(out.initialStates.begin(), out.initialStates.end(), 0.0);
    for (auto& p : out.pipes) {
        p.cracked = false;
    }
    return out;
}

// --- operator ------------------------------------------------------------------

OperatorAgent::OperatorAgent(const Scenario& scenario, Mode mode, const ControlParams& control, double tickRate,
                             OperatorParams params, std::uint64_t seed)
    : scenario_(publicView(scenario)),
      model_(std::make_shared<const Scenario>(scenario_)),
      mode_(mode),
      control_(control),
      dt_(1.0 / tickRate),
      p_(params),
      rng_(seed, 0x0be7a70) {}

void OperatorAgent::send(Payload p) {
    Command c;
    c.sender = Role::Remote;
    c.seq = ++seq_;
    c.sentTick = tick_;
    c.payload = std::move(p);
    out_.push_back(std::move(c));
}

void OperatorAgent::say(std::string text) { send(ChatMsg{std::move(text)}); }

void OperatorAgent::readChat(const Snapshot& snap) {
    for (const auto& line : snap.chat) {
        if (line.from != Role::Local) {
            continue;
        }
        const auto values = gaugeReports(line.text, scenario_.gauges.size());
        for (const auto& [g, v] : values) {
            reports_[g] = v;
        }
        if (!values.empty()) {
            awaitingReply_ = false;
        }
    }
}

void OperatorAgent::plan(const Snapshot& snap) {
    std::vector<double> states(scenario_.valves.size(), 0.0);
    for (std::size_t v = 0; v < states.size(); ++v) {
        if (scenario_.valves[v].kind == ValveKind::Discrete && v < snap.valveStates.size()) {
            states[v] = snap.valveStates[v].value_or(0.0);
        }
    }
    PlannerOptions opts;
    opts.continuousUnknown = true;
    pending_.clear();
    if (const auto plan = planValves(scenario_, states, opts)) {
        for (std::size_t v : plan->toggles) {
            pending_.push_back({{TargetRef::Kind::Valve, v}, ActionKind::Toggle, scenario_.gaugeOf(v), {}});
        }
        for (const auto& a : plan->adjustments) {
            const std::size_t g = scenario_.gaugeOf(a.valve);
            if (replans_ > 0 && mode_ == Mode::NonAssisted && reports_.count(g) &&
                std::abs(reports_[g] - scenario_.gauges[g].target) <= p_.trimTolerance) {
                continue;
            }
            pending_.push_back({{TargetRef::Kind::Valve, a.valve}, ActionKind::Regulate, g, {}});
        }
    }
    for (std::size_t i = 0; i < scenario_.pipes.size(); ++i) {
        const auto& pipe = scenario_.pipes[i];
        if (pipe.mustCheck && !snap.readings.count(pipe.id)) {
            pending_.push_back({{TargetRef::Kind::Pipe, i}, ActionKind::Sense, 0, {}});
        }
    }
}

Vec2 OperatorAgent::targetPoint(const Task& t, const Snapshot& snap) const {
    if (t.target.kind == TargetRef::Kind::Valve) {
        return scenario_.valves[t.target.index].position;
    }
    const auto& pipe = scenario_.pipes[t.target.index];
    // aim a little inside the nearest end so the whole tip footprint is on the pipe
    const Vec2 base{snap.base.x, snap.base.y};
    const Vec2 ab = pipe.b - pipe.a;
    const double len = ab.norm();
    const double inset = std::min(0.03, len / 2.0) / len;
    double t0 = ab.dot(base - pipe.a) / (len * len);
    t0 = std::clamp(t0, inset, 1.0 - inset);
    return pipe.a + t0 * ab;
}

void OperatorAgent::nextTask(const Snapshot& snap) {
    task_.reset();
    if (snap.goalSatisfied) {
        stage_ = Stage::Finished;
        return;
    }
    if (pending_.empty()) {
        if (replans_ >= 6) {
            stage_ = Stage::Finished;
            return;
        }
        if (mode_ == Mode::NonAssisted && !awaitingReply_) {
            say("gauges?");
            awaitingReply_ = true;
        }
        stage_ = Stage::Start;
        return;
    }
    const Vec2 base{snap.base.x, snap.base.y};
    std::size_t best = pending_.size();
    double bestDist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < pending_.size(); ++i) {
        const Task& t = pending_[i];
        if (t.kind == ActionKind::Regulate) {
            const bool blocked = std::any_of(pending_.begin(), pending_.end(), [&](const Task& o) {
                return o.kind == ActionKind::Toggle && o.gauge == t.gauge;
            });
            if (blocked) {
                continue;
            }
        }
        const double d = (targetPoint(t, snap) - base).norm();
        if (d < bestDist) {
            bestDist = d;
            best = i;
        }
    }
    task_ = pending_[best];
    pending_.erase(pending_.begin() + static_cast<std::ptrdiff_t>(best));
    task_->point = targetPoint(*task_, snap);
    trims_ = 0;
    lastReport_.reset();
    const std::string& id = targetId(scenario_, task_->target);
    if (mode_ == Mode::NonAssisted || bestDist > p_.chatLegLength) {
        say(id + " next, go " + direction(task_->point - base));
    }
    stage_ = Stage::Guide;
}

bool OperatorAgent::arrived(const Snapshot& snap) const {
    if (mode_ == Mode::NonAssisted) {
        return (task_->point - Vec2{snap.base.x, snap.base.y}).norm() <= p_.arriveRadius;
    }
    ControlParams tight = control_;
    tight.limits.x = {tight.limits.x.min + p_.reachMargin, tight.limits.x.max - p_.reachMargin};
    tight.limits.y = {tight.limits.y.min + p_.reachMargin, tight.limits.y.max - p_.reachMargin};
    return reachableContact(model_, task_->target, snap.base, tight).has_value();
}

void OperatorAgent::guide(const Snapshot& snap) {
    if (arrived(snap)) {
        if (mode_ == Mode::NonAssisted) {
            resampleAim();
            stage_ = Stage::Aim;
            wandGoal_ = aimPose(snap);
        } else {
            wandGoal_ = Pose5{};
            stage_ = Stage::Select;
        }
        return;
    }
    const Vec2 d = task_->point - Vec2{snap.base.x, snap.base.y};
    const double dist = d.norm();
    const double speed = p_.guideGain * dist;
    const double theta = std::clamp(speed / control_.deflectionGain, p_.minGuideAngle, p_.maxGuideAngle);
    const Vec2 dir = rotate((1.0 / dist) * d, -snap.base.heading);
    const double s = std::sin(theta);
    wandGoal_ = {0.0, 0.0, 0.0, std::atan2(s * dir.x, std::cos(theta)), std::asin(s * dir.y)};
}

void OperatorAgent::resampleAim() {
    aimError_ = {rng_.normal(0.0, p_.aimNoise), rng_.normal(0.0, p_.aimNoise), rng_.normal(0.0, p_.aimNoise)};
}

Pose5 OperatorAgent::aimPose(const Snapshot& snap) const {
    const Vec3 local = toLocal(snap.base, onPanel(task_->point));
    return retarget({local.x + aimError_.x, local.y + aimError_.y, local.z + aimError_.z, 0.0, 0.0}, control_.limits);
}

void OperatorAgent::completeTask() { ++tasksDone_; }

void OperatorAgent::slew() {
    const Vec3 d = wandGoal_.position() - wand_.position();
    const double n = d.norm();
    const double maxStep = p_.aimSpeed * dt_;
    Pose5 next = wand_;
    if (n <= maxStep) {
        next.x = wandGoal_.x;
        next.y = wandGoal_.y;
        next.z = wandGoal_.z;
    } else {
        const double k = maxStep / n;
        next.x += k * d.x;
        next.y += k * d.y;
        next.z += k * d.z;
    }
    next.yaw = approach(wand_.yaw, wandGoal_.yaw, p_.aimTurnRate * dt_);
    next.pitch = approach(wand_.pitch, wandGoal_.pitch, p_.aimTurnRate * dt_);
    if (next != wand_) {
        wand_ = next;
        send(WandPose{wand_});
    }
}

void OperatorAgent::manualAct(const Snapshot& snap) {
    const std::string& id = targetId(scenario_, task_->target);
    const bool touching = snap.touching && *snap.touching == id;
    switch (stage_) {
    case Stage::Act:
        if (task_->kind == ActionKind::Toggle) {
            send(Activate{true});
            activate_ = true;
            stage_ = Stage::Release;
        } else if (task_->kind == ActionKind::Regulate) {
            wandGoal_ = aimPose(snap);
            timer_ = 0;
            needQuery_ = true;
            stage_ = Stage::AwaitReply;
        } else {
            send(Activate{true});
            activate_ = true;
            timer_ = 0;
            stage_ = Stage::Sense;
        }
        return;

    case Stage::Release:
        send(Activate{false});
        activate_ = false;
        completeTask();
        wandGoal_ = posture(Posture::Crouch, control_.limits);
        stage_ = Stage::Retract;
        return;

    case Stage::AwaitReply: {
        wandGoal_ = aimPose(snap);
        if (needQuery_) {
            if (!awaitingReply_) {
                say(scenario_.gauges[task_->gauge].id + "?");
                awaitingReply_ = true;
                needQuery_ = false;
            }
            return;
        }
        if (awaitingReply_) {
            return;
        }
        const auto& gauge = scenario_.gauges[task_->gauge];
        const double value = reports_.at(task_->gauge);
        const double err = gauge.target - value;
        // a valve at its end stop no longer moves the gauge
        const bool stuck = lastReport_ && std::abs(value - *lastReport_) < 0.3 * expectedChange_;
        if (std::abs(err) <= p_.trimTolerance || trims_ >= p_.maxTrims || stuck) {
            completeTask();
            wandGoal_ = posture(Posture::Crouch, control_.limits);
            stage_ = Stage::Retract;
            return;
        }
        const double c = scenario_.contributions[task_->gauge][task_->target.index];
        const double hold = std::abs(err) / c / control_.manualRate + rng_.normal(0.0, p_.holdTimingNoise);
        timer_ = ticksFor(std::max(hold, dt_), dt_);
        expectedChange_ = c * control_.manualRate * timer_ * dt_;
        wandGoal_ = aimPose(snap);
        wandGoal_.yaw = err > 0.0 ? p_.trimYaw : -p_.trimYaw;
        lastReport_ = value;
        ++trims_;
        stage_ = Stage::Trim;
        return;
    }

    case Stage::Trim: {
        const double yaw = wandGoal_.yaw;
        wandGoal_ = aimPose(snap);
        wandGoal_.yaw = yaw;
        if (!activate_) {
            if (!near(wand_, wandGoal_)) {
                return;
            }
            if (!touching) {
                resampleAim();
                --trims_;
                stage_ = Stage::Aim;
                return;
            }
            send(Activate{true});
            activate_ = true;
            return;
        }
        if (--timer_ > 0 && touching) {
            return;
        }
        send(Activate{false});
        activate_ = false;
        wandGoal_.yaw = 0.0;
        needQuery_ = true;
        if (!touching) {
            resampleAim();
            stage_ = Stage::Aim;
            return;
        }
        stage_ = Stage::AwaitReply;
        return;
    }

    case Stage::Sense:
        wandGoal_ = aimPose(snap);
        if (snap.readings.count(id)) {
            send(Activate{false});
            activate_ = false;
            completeTask();
            wandGoal_ = posture(Posture::Crouch, control_.limits);
            stage_ = Stage::Retract;
            return;
        }
        timer_ = touching ? 0 : timer_ + 1;
        if (timer_ > ticksFor(0.2, dt_)) {
            send(Activate{false});
            activate_ = false;
            resampleAim();
            stage_ = Stage::Aim;
        }
        return;

    default: return;
    }
}

std::vector<Command> OperatorAgent::step(const Snapshot& snap) {
    out_.clear();
    tick_ = snap.tick;
    if (!wandKnown_) {
        wand_ = snap.tipLocal;
        wandGoal_ = wand_;
        wandKnown_ = true;
    }
    readChat(snap);
    if (snap.goalSatisfied && stage_ != Stage::Finished) {
        if (activate_) {
            send(Activate{false});
            activate_ = false;
        }
        stage_ = Stage::Finished;
    }

    switch (stage_) {
    case Stage::Start:
        if (replans_ == 0 && mode_ == Mode::NonAssisted) {
            // the live gauge readout exists only on the local side
            say("gauges?");
            awaitingReply_ = true;
        } else if (awaitingReply_) {
            break;
        }
        plan(snap);
        ++replans_;
        nextTask(snap);
        if (stage_ == Stage::Guide) {
            guide(snap);
        }
        break;

    case Stage::NextTask:
        nextTask(snap);
        if (stage_ == Stage::Guide) {
            guide(snap);
        }
        break;

    case Stage::Guide: guide(snap); break;

    case Stage::Aim: {
        const Vec3 local = toLocal(snap.base, onPanel(task_->point));
        if (!control_.limits.x.contains(local.x) || !control_.limits.y.contains(local.y)) {
            stage_ = Stage::Guide;
            guide(snap);
            break;
        }
        wandGoal_ = aimPose(snap);
        if (near(wand_, wandGoal_)) {
            timer_ = ticksFor(p_.settleTime, dt_);
            stage_ = Stage::Settle;
        }
        break;
    }

    case Stage::Settle: {
        wandGoal_ = aimPose(snap);
        if (--timer_ > 0) {
            break;
        }
        const std::string& id = targetId(scenario_, task_->target);
        if (snap.touching && *snap.touching == id) {
            stage_ = Stage::Act;
            manualAct(snap);
        } else {
            resampleAim();
            stage_ = Stage::Aim;
        }
        break;
    }

    case Stage::Act:
    case Stage::Release:
    case Stage::Trim:
    case Stage::AwaitReply:
    case Stage::Sense: manualAct(snap); break;

    case Stage::Retract:
        if (wand_ == wandGoal_) {
            nextTask(snap);
            if (stage_ == Stage::Guide) {
                guide(snap);
            }
        }
        break;

    case Stage::Select:
        send(Select{targetId(scenario_, task_->target)});
        timer_ = ticksFor(p_.selectTimeout, dt_);
        stage_ = Stage::AwaitSelect;
        break;

    case Stage::AwaitSelect: {
        const std::string& id = targetId(scenario_, task_->target);
        for (const auto& e : snap.events) {
            if (e.subject != id) {
                continue;
            }
            if (e.type == EventType::ActionSelected) {
                send(Activate{true});
                activate_ = true;
                stage_ = Stage::Trigger;
            } else if (e.type == EventType::OutOfReach || e.type == EventType::BusyWithAction) {
                stage_ = Stage::Guide;
            }
        }
        if (stage_ == Stage::AwaitSelect && --timer_ <= 0) {
            stage_ = Stage::Guide;
        }
        break;
    }

    case Stage::Trigger:
        send(Activate{false});
        activate_ = false;
        stage_ = Stage::AwaitDone;
        break;

    case Stage::AwaitDone: {
        const std::string& id = targetId(scenario_, task_->target);
        if (!snap.action || snap.action->target != id) {
            break;
        }
        const auto status = snap.action->status;
        if (status != ActionStatus::Done && status != ActionStatus::Aborted) {
            break;
        }
        wand_ = snap.tipLocal;
        wandGoal_ = wand_;
        if (status == ActionStatus::Done || snap.action->abortReason == "Saturated") {
            completeTask();
            nextTask(snap);
        } else {
            stage_ = Stage::Guide;
        }
        if (stage_ == Stage::Guide) {
            guide(snap);
        }
        break;
    }

    case Stage::Finished: break;
    }

    // once triggered the robot owns the tip until the action ends
    if (stage_ != Stage::Trigger && stage_ != Stage::AwaitDone && stage_ != Stage::Finished) {
        slew();
    }
    return std::move(out_);
}

// --- worker ----------------------------------------------------------------------

WorkerAgent::WorkerAgent(const Scenario& scenario, const ControlParams& control, double tickRate,
                         WorkerParams params, std::uint64_t seed)
    : scenario_(publicView(scenario)), control_(control), dt_(1.0 / tickRate), p_(params), rng_(seed, 0x3047e4) {}

Vec2 WorkerAgent::follow(const Pose5& tipLocal, double heading, const ControlParams& control) {
    if (atPosture(tipLocal, Posture::Crouch, control)) {
        return {};
    }
    const auto d = deflection(tipLocal);
    if (d.angle <= control.guidanceThreshold || !d.direction) {
        return {};
    }
    const auto cue = guidanceCue(tipLocal, control);
    return cue.speedHint * rotate(*cue.direction, heading);
}

std::vector<Command> WorkerAgent::step(const Snapshot& snap) {
    std::vector<Command> out;
    const auto send = [&](Payload p) {
        Command c;
        c.sender = Role::Local;
        c.seq = ++seq_;
        c.sentTick = snap.tick;
        c.payload = std::move(p);
        out.push_back(std::move(c));
    };

    const std::size_t lag = static_cast<std::size_t>(std::lround(p_.reactionTime / dt_));
    intent_.push_back(follow(snap.tipLocal, snap.base.heading, control_));
    while (intent_.size() > lag + 1) {
        intent_.pop_front();
    }
    const double rho = p_.tremorCorrelation;
    const double innov = std::sqrt(1.0 - rho * rho) * p_.tremorSpeed;
    tremor_ = rho * tremor_ + Vec2{rng_.normal(0.0, innov), rng_.normal(0.0, innov)};
    if (++counter_ % p_.moveEvery == 0) {
        Vec2 v = intent_.front() + tremor_;
        const double speed = v.norm();
        if (speed > control_.maxWorkerSpeed) {
            v = (control_.maxWorkerSpeed / speed) * v;
        }
        BaseMove move{v, 0.0};
        if (!lastSent_ || *lastSent_ != move) {
            send(move);
            lastSent_ = move;
        }
    }

    for (const auto& line : snap.chat) {
        if (line.from != Role::Remote || line.text.find('?') == std::string::npos) {
            continue;
        }
        auto gauges = gaugesMentioned(line.text, scenario_.gauges.size());
        if (gauges.empty()) {
            for (std::size_t g = 0; g < scenario_.gauges.size(); ++g) {
                gauges.push_back(g);
            }
        }
        replies_.push_back({snap.tick + ticksFor(p_.replyDelay, dt_), std::move(gauges)});
    }
    while (!replies_.empty() && replies_.front().due <= snap.tick) {
        std::string text;
        for (std::size_t g : replies_.front().gauges) {
            if (g >= snap.gaugeValues.size() || !snap.gaugeValues[g]) {
                continue;
            }
            char buf[48];
            std::snprintf(buf, sizeof buf, "%s%s=%.3f", text.empty() ? "" : " ", scenario_.gauges[g].id.c_str(),
                          *snap.gaugeValues[g]);
            text += buf;
        }
        if (!text.empty()) {
            send(ChatMsg{text});
        }
        replies_.pop_front();
    }
    return out;
}

} // namespace handrem
