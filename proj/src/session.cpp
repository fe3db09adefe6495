#include "handrem/session.hpp"

#include "handrem/error.hpp"
#include "handrem/hash.hpp"
#include "handrem/scenario_io.hpp"

#include <algorithm>

namespace handrem {

std::string_view nameOf(Role r) noexcept { return r == Role::Remote ? "REMOTE" : "LOCAL"; }

std::optional<Role> roleFrom(std::string_view s) noexcept {
    if (s == "REMOTE") {
        return Role::Remote;
    }
    if (s == "LOCAL") {
        return Role::Local;
    }
    return std::nullopt;
}

std::string_view payloadType(const Payload& p) noexcept {
    struct Visitor {
        std::string_view operator()(const WandPose&) const { return "WandPose"; }
        std::string_view operator()(const Activate&) const { return "Activate"; }
        std::string_view operator()(const Select&) const { return "Select"; }
        std::string_view operator()(const SetMode&) const { return "SetMode"; }
        std::string_view operator()(const BaseMove&) const { return "BaseMove"; }
        std::string_view operator()(const ChatMsg&) const { return "ChatMsg"; }
        std::string_view operator()(const CameraAim&) const { return "CameraAim"; }
    };
    return std::visit(Visitor{}, p);
}

bool roleLegal(const Command& c) noexcept {
    if (std::holds_alternative<ChatMsg>(c.payload)) {
        return true;
    }
    if (std::holds_alternative<BaseMove>(c.payload)) {
        return c.sender == Role::Local;
    }
    return c.sender == Role::Remote;
}

namespace {

int senderKey(Role r) { return r == Role::Remote ? 0 : 1; }

void hashPose(Fnv1a& h, const Pose5& p) {
    h.f64(p.x).f64(p.y).f64(p.z).f64(p.yaw).f64(p.pitch);
}

void hashProgress(Fnv1a& h, const SenseProgress& s) {
    h.boolean(s.pipe.has_value()).u64(s.pipe.value_or(0)).f64(s.seconds).boolean(s.reported);
}

void hashCommand(Fnv1a& h, const Command& c) {
    h.u64(static_cast<std::uint64_t>(senderKey(c.sender))).u64(c.seq).i64(c.sentTick).u64(c.payload.index());
    std::visit(
        [&h](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, WandPose>) {
                hashPose(h, p.pose);
            } else if constexpr (std::is_same_v<T, Activate>) {
                h.boolean(p.on);
            } else if constexpr (std::is_same_v<T, Select>) {
                h.str(p.target);
            } else if constexpr (std::is_same_v<T, SetMode>) {
                h.u64(static_cast<std::uint64_t>(p.mode));
            } else if constexpr (std::is_same_v<T, BaseMove>) {
                h.f64(p.velocity.x).f64(p.velocity.y).f64(p.headingRate);
            } else if constexpr (std::is_same_v<T, ChatMsg>) {
                h.str(p.text);
            } else if constexpr (std::is_same_v<T, CameraAim>) {
                h.f64(p.pan).f64(p.tilt);
            }
        },
        c.payload);
}

} // namespace

Session::Session(std::shared_ptr<const Scenario> scenario, SessionOptions options)
    : config_((options.config.validate(), options.config)),
      world_(std::move(scenario), config_.world),
      mode_(options.mode),
      uplink_(config_.latency.uplink, config_.tickRate, config_.latency.seed),
      recordLog_(options.recordLog) {
    const auto& panel = world_.scenario().panel;
    robot_.base = {panel.width / 2.0, panel.height / 2.0, -config_.baseStandoff, 0.0};
    robot_.tipLocal = posture(Posture::Home, config_.control.limits);
    wand_ = robot_.tipLocal;
    log_.scenario = toJson(world_.scenario(), Visibility::Full);
    log_.config = config_;
    log_.mode = mode_;
}

std::int64_t Session::submit(Command cmd) {
    cmd.sentTick = tick_;
    const int key = senderKey(cmd.sender);
    return uplink_.put(key, std::move(cmd), tick_);
}

void Session::inject(Command cmd) { injected_.push_back(std::move(cmd)); }

const std::vector<Event>& Session::step() {
    tickEvents_.clear();
    tickChat_.clear();
    const std::int64_t next = tick_ + 1;
    const double dt = config_.dt();

    std::vector<Command> due = uplink_.popDue(next);
    for (auto& c : injected_) {
        due.push_back(std::move(c));
    }
    injected_.clear();
    std::stable_sort(due.begin(), due.end(), [](const Command& a, const Command& b) {
        return a.sender != b.sender ? senderKey(a.sender) < senderKey(b.sender) : a.seq < b.seq;
    });
    for (const auto& cmd : due) {
        apply(cmd, tickEvents_, tickChat_);
        applied_.push_back({cmd.sentTick, next, cmd.sender, cmd.seq});
    }
    for (auto& line : tickChat_) {
        line.tick = next;
    }

    moveBase(dt);
    advanceControl(dt, tickEvents_);
    const bool verbal = std::any_of(tickChat_.begin(), tickChat_.end(),
                                    [](const ChatLine& l) { return l.from == Role::Remote; });
    updatePhase(verbal, tickEvents_);
    tick_ = next;

    if (!goalTick_ && world_.goalSatisfied()) {
        goalTick_ = tick_;
        // a turn still in progress counts as finished
        std::optional<std::size_t> turning = manual_.adjusting;
        if (action_ && action_->kind == ActionKind::Regulate && action_->status == ActionStatus::Acting) {
            turning = action_->target.index;
        }
        if (turning) {
            tickEvents_.push_back({EventType::ValveAdjusted, world_.scenario().valves[*turning].id,
                                   std::to_string(world_.valveState(*turning))});
        }
        tickEvents_.push_back({EventType::GoalSatisfied, "", ""});
    }

    if (recordLog_) {
        TickRecord rec;
        rec.tick = tick_;
        rec.commands = std::move(due);
        rec.events = tickEvents_;
        if (tick_ % config_.hashInterval == 0) {
            rec.hash = stateHash();
        }
        if (!rec.commands.empty() || !rec.events.empty() || rec.hash) {
            log_.records.push_back(std::move(rec));
        }
    }
    return tickEvents_;
}

void Session::apply(const Command& cmd, std::vector<Event>& events, std::vector<ChatLine>& chat) {
    Fnv1a h;
    h.u64(commandDigest_);
    hashCommand(h, cmd);
    commandDigest_ = h.digest();

    const std::string type(payloadType(cmd.payload));
    if (!roleLegal(cmd)) {
        events.push_back({EventType::IllegalCommand, type, "role " + std::string(nameOf(cmd.sender))});
        return;
    }
    if (const auto it = lastSeq_.find(cmd.sender); it != lastSeq_.end() && cmd.seq <= it->second) {
        events.push_back({EventType::IllegalCommand, type, "seq"});
        return;
    }
    lastSeq_[cmd.sender] = cmd.seq;

    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, WandPose>) {
                if (!isFinite(p.pose)) {
                    events.push_back({EventType::IllegalCommand, type, "non-finite pose"});
                    return;
                }
                wand_ = p.pose;
                followWand_ = true;
            } else if constexpr (std::is_same_v<T, Activate>) {
                activate_ = p.on;
            } else if constexpr (std::is_same_v<T, Select>) {
                if (mode_ != Mode::Assisted) {
                    events.push_back({EventType::IllegalCommand, type, "mode"});
                    return;
                }
                std::string target = p.target;
                if (target.empty()) {
                    const auto hit = selectByRay(world_, robot_, config_.control);
                    if (!hit) {
                        events.push_back({EventType::NoTarget, "", "ray"});
                        return;
                    }
                    target = *hit;
                }
                try {
                    action_ = select(target, world_, robot_.base, action_, config_.control);
                    events.push_back({EventType::ActionSelected, target, std::string(nameOf(action_->kind))});
                } catch (const Error& e) {
                    switch (e.code()) {
                    case ErrorCode::OutOfReach: events.push_back({EventType::OutOfReach, target, ""}); break;
                    case ErrorCode::BusyWithAction: events.push_back({EventType::BusyWithAction, target, ""}); break;
                    default: events.push_back({EventType::IllegalCommand, type, "unknown target"}); break;
                    }
                }
            } else if constexpr (std::is_same_v<T, SetMode>) {
                if (!config_.allowModeSwitch) {
                    events.push_back({EventType::IllegalCommand, type, "mode fixed"});
                    return;
                }
                setMode(p.mode, events);
            } else if constexpr (std::is_same_v<T, BaseMove>) {
                if (!std::isfinite(p.velocity.x) || !std::isfinite(p.velocity.y) || !std::isfinite(p.headingRate)) {
                    events.push_back({EventType::IllegalCommand, type, "non-finite velocity"});
                    return;
                }
                baseVelocity_ = p;
                const double speed = p.velocity.norm();
                if (speed > config_.control.maxWorkerSpeed) {
                    baseVelocity_.velocity = (config_.control.maxWorkerSpeed / speed) * p.velocity;
                }
            } else if constexpr (std::is_same_v<T, ChatMsg>) {
                chat.push_back({cmd.sender, 0, p.text});
            } else if constexpr (std::is_same_v<T, CameraAim>) {
                if (std::isfinite(p.pan) && std::isfinite(p.tilt)) {
                    camera_ = p;
                }
            }
        },
        cmd.payload);
}

void Session::moveBase(double dt) {
    auto& b = robot_.base;
    const auto& panel = world_.scenario().panel;
    constexpr double kReachBeyondPanel = 0.3;
    b.x = std::clamp(b.x + baseVelocity_.velocity.x * dt, -kReachBeyondPanel, panel.width + kReachBeyondPanel);
    b.y = std::clamp(b.y + baseVelocity_.velocity.y * dt, -kReachBeyondPanel, panel.height + kReachBeyondPanel);
    b.heading = wrapAngle(b.heading + baseVelocity_.headingRate * dt);
}

void Session::advanceControl(double dt, std::vector<Event>& events) {
    const auto& params = config_.control;
    if (mode_ == Mode::NonAssisted) {
        manualStep({wand_, activate_}, manual_, world_, robot_, dt, params, events);
        previousActivate_ = activate_;
        return;
    }
    const bool edge = activate_ && !previousActivate_;
    previousActivate_ = activate_;
    if (edge) {
        if (action_ && action_->status == ActionStatus::Pending) {
            startAction(*action_, robot_, params, dt, events);
            followWand_ = false;
        } else if (!action_ || !action_->live()) {
            events.push_back({EventType::NoTarget, "", "assisted"});
        }
    }
    if (action_ && action_->live() && action_->status != ActionStatus::Pending) {
        assistStep(*action_, world_, robot_, dt, params, events);
    } else if (followWand_) {
        robot_.tipLocal = retarget(wand_, params.limits);
    }
}

void Session::updatePhase(bool verbalGuidance, std::vector<Event>& events) {
    PhaseObservation obs;
    if (action_ && action_->status != ActionStatus::Done && action_->status != ActionStatus::Aborted) {
        obs.action = action_->status;
    }
    const Vec3 tipWorld = compose(robot_.base, robot_.tipLocal).position();
    obs.touching = world_.touched(tipWorld).has_value();
    obs.activating = activate_;
    obs.tipAtCrouch = atPosture(robot_.tipLocal, Posture::Crouch, config_.control);
    obs.deflectionAngle = deflection(robot_.tipLocal).angle;
    obs.verbalGuidance = verbalGuidance;
    const Phase next = phaseUpdate(obs, phase_, config_.control);
    if (next != phase_) {
        events.push_back({EventType::PhaseChanged, "", std::string(nameOf(phase_)) + "->" + std::string(nameOf(next))});
        phase_ = next;
    }
}

void Session::setMode(Mode m, std::vector<Event>& events) {
    if (m == mode_) {
        return;
    }
    if (action_ && action_->live()) {
        action_->status = ActionStatus::Aborted;
        action_->abortReason = "ModeChanged";
        action_->plan.clear();
        events.push_back({EventType::ActionAborted, action_->targetId, "ModeChanged"});
    }
    action_.reset();
    manual_ = {};
    manual_.previousActivate = activate_;
    followWand_ = true;
    mode_ = m;
    events.push_back({EventType::ModeChanged, "", std::string(nameOf(m))});
}

std::uint64_t Session::stateHash() const {
    Fnv1a h;
    h.i64(tick_).u64(static_cast<std::uint64_t>(mode_)).u64(static_cast<std::uint64_t>(phase_));
    const auto& b = robot_.base;
    h.f64(b.x).f64(b.y).f64(b.z).f64(b.heading);
    hashPose(h, robot_.tipLocal);
    hashPose(h, wand_);
    h.boolean(activate_).boolean(previousActivate_).boolean(followWand_);
    h.f64(baseVelocity_.velocity.x).f64(baseVelocity_.velocity.y).f64(baseVelocity_.headingRate);
    h.f64(camera_.pan).f64(camera_.tilt);
    for (double s : world_.valveStates()) {
        h.f64(s);
    }
    for (double g : world_.gaugeValues()) {
        h.f64(g);
    }
    for (const auto& r : world_.readings()) {
        h.boolean(r.has_value());
        if (r) {
            h.str(r->pipeId).u64(static_cast<std::uint64_t>(r->verdict)).f64(r->dwellAchieved);
        }
    }
    h.boolean(manual_.previousActivate).boolean(manual_.adjusting.has_value()).u64(manual_.adjusting.value_or(0));
    hashProgress(h, manual_.sense);
    h.boolean(action_.has_value());
    if (action_) {
        const auto& a = *action_;
        h.str(a.targetId).u64(static_cast<std::uint64_t>(a.kind)).u64(static_cast<std::uint64_t>(a.status));
        h.u64(a.plan.size());
        for (const auto& p : a.plan) {
            hashPose(h, p);
        }
        h.f64(a.contact.x).f64(a.contact.y).f64(a.contact.z).f64(a.outOfReachFor);
        hashProgress(h, a.sense);
        h.i64(a.regulationTicks).str(a.abortReason);
    }
    h.boolean(goalTick_.has_value()).i64(goalTick_.value_or(0));
    for (const auto& [role, seq] : lastSeq_) {
        h.u64(static_cast<std::uint64_t>(senderKey(role))).u64(seq);
    }
    h.u64(commandDigest_);
    return h.digest();
}

Snapshot Session::snapshot(Role role) const {
    Snapshot s;
    const auto& sc = world_.scenario();
    s.role = role;
    s.tick = tick_;
    s.simTime = simTime();
    s.mode = mode_;
    s.phase = phase_;
    s.base = robot_.base;
    s.tipLocal = robot_.tipLocal;
    s.tipWorld = compose(robot_.base, robot_.tipLocal);
    s.activate = activate_;
    s.camera = camera_;
    s.goalSatisfied = goalTick_.has_value();

    s.valveStates.resize(sc.valves.size());
    for (std::size_t v = 0; v < sc.valves.size(); ++v) {
        if (role == Role::Local) {
            s.valveStates[v] = world_.valveState(v);
            continue;
        }
        // the remote operator reads discrete handles through the overview camera
        const Vec2 d = sc.valves[v].position - Vec2{robot_.base.x, robot_.base.y};
        const bool inView =
            std::abs(d.x) <= config_.overviewHalfExtent.x && std::abs(d.y) <= config_.overviewHalfExtent.y;
        if (inView && sc.valves[v].kind == ValveKind::Discrete) {
            s.valveStates[v] = world_.valveState(v);
        }
    }
    // the other side's gauge vector stays empty
    for (std::size_t g = 0; g < sc.gauges.size(); ++g) {
        if (role == Role::Local) {
            s.gaugeValues.emplace_back(world_.gaugeValue(g));
        } else {
            s.gaugeTargets.emplace_back(sc.gauges[g].target);
        }
    }

    const SenseProgress* progress = nullptr;
    if (mode_ == Mode::NonAssisted) {
        progress = &manual_.sense;
    } else if (action_ && action_->kind == ActionKind::Sense) {
        progress = &action_->sense;
    }
    if (progress && progress->pipe) {
        s.sensingPipe = sc.pipes[*progress->pipe].id;
        s.sensingProgress = progress->seconds;
    }
    s.sensingRequired = world_.params().dwellRequired;
    for (std::size_t p = 0; p < sc.pipes.size(); ++p) {
        if (const auto& r = world_.readings()[p]) {
            s.readings[sc.pipes[p].id] = r->verdict;
        }
    }
    if (const auto t = world_.touched(s.tipWorld.position())) {
        s.touching = t->kind == World::Touch::Kind::Valve ? sc.valves[t->index].id : sc.pipes[t->index].id;
    }
    if (action_) {
        s.action = ActionView{action_->targetId, action_->kind, action_->status, action_->abortReason};
    }
    s.chat = tickChat_;
    s.events = tickEvents_;
    if (role == Role::Remote) {
        for (auto& e : s.events) {
            if (e.type == EventType::ValveAdjusted && sc.valves[*sc.valveIndex(e.subject)].kind == ValveKind::Continuous) {
                e.detail.clear(); // continuous settings are read on site only
            }
        }
    }
    return s;
}

void Session::finish() {
    log_.endTick = tick_;
    log_.endHash = stateHash();
}

// ---------------------------------------------------------------------------

Metrics metrics(const SessionLog& log) {
    if (log.empty()) {
        throw Error(ErrorCode::EmptyLog, "log has no records");
    }
    const double dt = log.config.dt();
    Metrics m;
    std::int64_t lastTick = log.endTick.value_or(log.records.empty() ? 0 : log.records.back().tick);
    m.duration = static_cast<double>(lastTick) * dt;

    std::string mode(nameOf(log.mode));
    std::int64_t modeSince = 0;
    std::string phase(nameOf(Phase::Exploration));
    std::int64_t phaseSince = 0;

    for (const auto& rec : log.records) {
        for (const auto& c : rec.commands) {
            if (std::holds_alternative<ChatMsg>(c.payload)) {
                (c.sender == Role::Remote ? m.msgRemote : m.msgLocal) += 1;
            }
        }
        for (const auto& e : rec.events) {
            switch (e.type) {
            case EventType::GoalSatisfied:
                if (!m.completionTime) {
                    m.completionTime = static_cast<double>(rec.tick) * dt;
                }
                break;
            case EventType::ValveToggled: ++m.actionCounts["TOGGLE"]; break;
            case EventType::ValveAdjusted: ++m.actionCounts["ADJUST"]; break;
            case EventType::SensorReading: ++m.actionCounts["SENSE"]; break;
            case EventType::ActionAborted: ++m.actionCounts["ABORTED"]; break;
            case EventType::ModeChanged:
                m.modeShare[mode] += static_cast<double>(rec.tick - modeSince) * dt;
                mode = e.detail;
                modeSince = rec.tick;
                break;
            case EventType::PhaseChanged: {
                m.phaseDurations[phase] += static_cast<double>(rec.tick - phaseSince) * dt;
                const auto arrow = e.detail.find("->");
                phase = arrow == std::string::npos ? e.detail : e.detail.substr(arrow + 2);
                phaseSince = rec.tick;
                break;
            }
            default: break;
            }
        }
    }
    m.modeShare[mode] += static_cast<double>(lastTick - modeSince) * dt;
    m.phaseDurations[phase] += static_cast<double>(lastTick - phaseSince) * dt;
    if (m.duration > 0.0) {
        for (auto& [k, v] : m.modeShare) {
            v /= m.duration;
        }
    }
    m.actions = m.actionCounts["TOGGLE"] + m.actionCounts["ADJUST"] + m.actionCounts["SENSE"];
    return m;
}

} // namespace handrem
