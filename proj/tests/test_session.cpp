#include "support.hpp"

#include "handrem/error.hpp"
#include "handrem/session.hpp"

#include <doctest.h>

using namespace handrem;

namespace {

Command cmd(Role who, std::uint64_t seq, Payload p) {
    Command c;
    c.sender = who;
    c.seq = seq;
    c.payload = std::move(p);
    return c;
}

std::shared_ptr<const Scenario> scenario(std::uint64_t seed = 4) {
    return std::make_shared<const Scenario>(generateScenario(seed));
}

bool hasEvent(const std::vector<Event>& events, EventType t, std::string_view detail = {}) {
    return std::any_of(events.begin(), events.end(),
                       [&](const Event& e) { return e.type == t && (detail.empty() || e.detail == detail); });
}

} // namespace

TEST_CASE("zero delay delivers on the next tick") {
    Session s(scenario(), {Config{}, Mode::NonAssisted, true});
    CHECK(s.submit(cmd(Role::Remote, 1, Activate{true})) == 1);
    s.step();
    REQUIRE(s.appliedHistory().size() == 1);
    CHECK(s.appliedHistory()[0].appliedTick == 1);
}

TEST_CASE("injected delay is a lower bound on every command") {
    Config cfg;
    cfg.latency.uplink.delayMs = 200.0;
    Session s(scenario(), {cfg, Mode::NonAssisted, true});
    std::uint64_t seq = 0;
    for (int t = 0; t < 300; ++t) {
        if (t % 3 == 0) {
            (void)s.submit(cmd(Role::Remote, ++seq, WandPose{Pose5{0.001 * (t % 50), 0, 0, 0, 0}}));
        }
        s.step();
    }
    REQUIRE(s.appliedHistory().size() > 80);
    for (const auto& a : s.appliedHistory()) {
        REQUIRE(a.appliedTick - a.sentTick >= 10);
    }
}

TEST_CASE("jitter never reorders a sender's commands") {
    Config cfg;
    cfg.latency.uplink.delayMs = 40.0;
    cfg.latency.uplink.jitterMs = 120.0;
    for (std::uint64_t lseed = 1; lseed <= 5; ++lseed) {
        cfg.latency.seed = lseed;
        Session s(scenario(), {cfg, Mode::NonAssisted, true});
        std::mt19937_64 rng(lseed);
        std::map<Role, std::uint64_t> seq;
        for (int t = 0; t < 400; ++t) {
            for (Role r : {Role::Remote, Role::Local}) {
                if (rng() % 2 == 0) {
                    (void)s.submit(cmd(r, ++seq[r], ChatMsg{"m"}));
                }
            }
            s.step();
        }
        for (int t = 0; t < 20; ++t) {
            s.step();
        }
        std::map<Role, std::uint64_t> last;
        std::map<Role, std::int64_t> lastTick;
        std::size_t n = 0;
        for (const auto& a : s.appliedHistory()) {
            REQUIRE(a.seq == last[a.sender] + 1);
            REQUIRE(a.appliedTick >= lastTick[a.sender]);
            last[a.sender] = a.seq;
            lastTick[a.sender] = a.appliedTick;
            ++n;
        }
        CHECK(n == seq[Role::Remote] + seq[Role::Local]);
    }
}

TEST_CASE("role rules reject commands from the wrong side") {
    Session s(scenario(), {Config{}, Mode::Assisted, true});
    s.inject(cmd(Role::Remote, 1, BaseMove{{0.1, 0.0}, 0.0}));
    s.inject(cmd(Role::Local, 1, WandPose{Pose5{0.05, 0, 0, 0, 0}}));
    s.inject(cmd(Role::Local, 2, Select{"v0"}));
    s.inject(cmd(Role::Local, 3, Activate{true}));
    s.inject(cmd(Role::Local, 4, ChatMsg{"ok"}));
    s.inject(cmd(Role::Remote, 2, ChatMsg{"ok"}));
    const auto events = s.step();
    CHECK(std::count_if(events.begin(), events.end(), [](const Event& e) { return e.type == EventType::IllegalCommand; }) ==
          4);
    CHECK(s.robot().tipLocal == Pose5{});
    CHECK(s.snapshot(Role::Local).chat.size() == 2);
}

TEST_CASE("stale sequence numbers are rejected") {
    Session s(scenario(), {Config{}, Mode::NonAssisted, true});
    s.inject(cmd(Role::Remote, 5, Activate{true}));
    s.step();
    s.inject(cmd(Role::Remote, 5, Activate{false}));
    CHECK(hasEvent(s.step(), EventType::IllegalCommand, "seq"));
}

TEST_CASE("non-assisted sessions never create delegated actions") {
    Session s(scenario(), {Config{}, Mode::NonAssisted, true});
    const std::string target = s.scenario().valves[0].id;
    s.inject(cmd(Role::Remote, 1, Select{target}));
    CHECK(hasEvent(s.step(), EventType::IllegalCommand, "mode"));
    CHECK_FALSE(s.action().has_value());
}

TEST_CASE("mode switching is off unless configured") {
    Session fixed(scenario(), {Config{}, Mode::NonAssisted, true});
    fixed.inject(cmd(Role::Remote, 1, SetMode{Mode::Assisted}));
    fixed.step();
    CHECK(fixed.mode() == Mode::NonAssisted);

    Config cfg;
    cfg.allowModeSwitch = true;
    Session free(scenario(), {cfg, Mode::NonAssisted, true});
    free.inject(cmd(Role::Remote, 1, SetMode{Mode::Assisted}));
    CHECK(hasEvent(free.step(), EventType::ModeChanged));
    CHECK(free.mode() == Mode::Assisted);
}

TEST_CASE("base motion is capped at the worker speed") {
    Session s(scenario(), {Config{}, Mode::NonAssisted, true});
    s.inject(cmd(Role::Local, 1, BaseMove{{3.0, 4.0}, 0.0}));
    const BasePose start = s.robot().base;
    for (int i = 0; i < 50; ++i) {
        s.step();
    }
    const double moved = std::hypot(s.robot().base.x - start.x, s.robot().base.y - start.y);
    CHECK(moved == doctest::Approx(0.4).epsilon(1e-9));
}

TEST_CASE("identical inputs give identical hash sequences") {
    const auto run = [](std::uint64_t perturb) {
        Session s(scenario(8), {Config{}, Mode::NonAssisted, true});
        std::vector<std::uint64_t> hashes;
        for (int t = 0; t < 200; ++t) {
            if (t == 20) {
                (void)s.submit(cmd(Role::Local, 1, BaseMove{{0.1, 0.0}, 0.0}));
            }
            if (t == 40) {
                (void)s.submit(cmd(Role::Remote, 1, WandPose{Pose5{0.02 + 1e-9 * perturb, 0, 0.05, 0, 0}}));
            }
            s.step();
            hashes.push_back(s.stateHash());
        }
        return hashes;
    };
    CHECK(run(0) == run(0));
    CHECK(run(0) != run(1));
}

TEST_CASE("snapshots are filtered by role") {
    Session s(scenario(12), {Config{}, Mode::NonAssisted, true});
    const Scenario& sc = s.scenario();
    const Snapshot remote = s.snapshot(Role::Remote);
    const Snapshot local = s.snapshot(Role::Local);
    REQUIRE(remote.valveStates.size() == sc.valves.size());
    for (std::size_t v = 0; v < sc.valves.size(); ++v) {
        if (sc.valves[v].kind == ValveKind::Continuous) {
            CHECK_FALSE(remote.valveStates[v].has_value());
        }
        CHECK(local.valveStates[v] == sc.initialStates[v]);
    }
    for (std::size_t g = 0; g < sc.gauges.size(); ++g) {
        CHECK(remote.gaugeTargets.at(g) == sc.gauges[g].target);
        CHECK(local.gaugeValues.at(g).has_value());
    }
    CHECK(remote.gaugeValues.empty());
    CHECK(local.gaugeTargets.empty());
}

TEST_CASE("metrics from a synthetic log") {
    SessionLog log;
    log.config = Config{};
    log.mode = Mode::Assisted;
    CHECK_THROWS_AS((void)metrics(log), Error);
    try {
        (void)metrics(log);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyLog);
    }

    std::uint64_t seqR = 0;
    std::uint64_t seqL = 0;
    for (int i = 0; i < 10; ++i) {
        TickRecord r{100 + i, {cmd(Role::Remote, ++seqR, ChatMsg{"go left"})}, {}, {}};
        if (i < 4) {
            r.commands.push_back(cmd(Role::Local, ++seqL, ChatMsg{"g0=0.4"}));
        }
        log.records.push_back(r);
    }
    log.records.push_back({6910, {}, {{EventType::GoalSatisfied, "", ""}}, {}});
    log.endTick = 6910;
    const Metrics m = metrics(log);
    REQUIRE(m.completionTime);
    CHECK(*m.completionTime == doctest::Approx(138.2).epsilon(1e-12));
    CHECK(m.msgRemote == 10);
    CHECK(m.msgLocal == 4);
    CHECK(m.duration == doctest::Approx(138.2));

    SessionLog quiet;
    quiet.config = Config{};
    quiet.records.push_back({5, {cmd(Role::Remote, 1, Activate{true})}, {}, {}});
    quiet.endTick = 10;
    const Metrics q = metrics(quiet);
    CHECK(q.msgRemote == 0);
    CHECK(q.msgLocal == 0);
    CHECK_FALSE(q.completionTime);
}

TEST_CASE("the log records only ticks with activity and periodic hashes") {
    Session s(scenario(), {Config{}, Mode::NonAssisted, true});
    for (int t = 0; t < 120; ++t) {
        if (t == 7) {
            (void)s.submit(cmd(Role::Remote, 1, ChatMsg{"hello"}));
        }
        s.step();
    }
    s.finish();
    const auto& recs = s.log().records;
    const bool hasChatTick = std::any_of(recs.begin(), recs.end(), [](const TickRecord& r) { return r.tick == 8; });
    CHECK(hasChatTick);
    CHECK(std::any_of(recs.begin(), recs.end(), [](const TickRecord& r) { return r.tick == 50 && r.hash; }));
    CHECK(std::any_of(recs.begin(), recs.end(), [](const TickRecord& r) { return r.tick == 100 && r.hash; }));
    CHECK(s.log().endTick == 120);
    CHECK(s.log().endHash == s.stateHash());
    for (const auto& r : recs) {
        CHECK((!r.commands.empty() || !r.events.empty() || r.hash.has_value()));
    }
}

TEST_CASE("delay queue arithmetic") {
    DelayQueue<int> q(LatencyLeg{200.0, 0.0}, 50.0, 1);
    CHECK(q.put(0, 1, 0) == 10);
    DelayQueue<int> z(LatencyLeg{}, 50.0, 1);
    CHECK(z.put(0, 1, 5) == 6);
    CHECK(z.popDue(5).empty());
    CHECK(z.popDue(6) == std::vector<int>{1});
}
