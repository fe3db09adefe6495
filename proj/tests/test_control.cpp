#include "support.hpp"

#include "handrem/control.hpp"
#include "handrem/error.hpp"

#include <doctest.h>

#include <numbers>

using namespace handrem;

namespace {

constexpr double dt = 0.02;
constexpr double pi = std::numbers::pi;

struct Run {
    DelegatedAction action;
    std::vector<Event> events;
    std::vector<double> errors; // |gauge - target| after each ACTING tick
    int ticks = 0;
};

Run runAction(World& world, RobotState& robot, const std::string& id, const ControlParams& params) {
    Run r;
    r.action = select(id, world, robot.base, std::nullopt, params);
    startAction(r.action, robot, params, dt, r.events);
    const auto& s = world.scenario();
    while (r.action.live() && r.ticks < 5000) {
        const bool acting = r.action.status == ActionStatus::Acting;
        assistStep(r.action, world, robot, dt, params, r.events);
        ++r.ticks;
        if (acting && r.action.kind == ActionKind::Regulate) {
            const std::size_t g = s.gaugeOf(r.action.target.index);
            r.errors.push_back(std::abs(world.gaugeValue(g) - s.gauges[g].target));
        }
    }
    return r;
}

int count(const std::vector<Event>& events, EventType t) {
    return static_cast<int>(std::count_if(events.begin(), events.end(), [t](const Event& e) { return e.type == t; }));
}

} // namespace

TEST_CASE("regulation at the rate cap takes the closed-form tick count") {
    World world(bench::plant(0.6, 0.0));
    RobotState robot{bench::base(), Pose5{}};
    const ControlParams params;
    const Run r = runAction(world, robot, "c0", params);
    REQUIRE(r.action.status == ActionStatus::Done);
    const int expected = static_cast<int>(std::ceil(0.6 / (params.regRate * dt) - 1e-9));
    CHECK(expected == 60);
    CHECK(r.action.regulationTicks == expected);
    CHECK(world.gaugeValue(0) == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(std::abs(world.gaugeValue(0) - 0.6) <= 0.01);
    for (std::size_t i = 1; i < r.errors.size(); ++i) {
        REQUIRE(r.errors[i] <= r.errors[i - 1]);
    }
    CHECK(count(r.events, EventType::ValveAdjusted) == 1);
    CHECK(count(r.events, EventType::ActionDone) == 1);
    CHECK(atPosture(robot.tipLocal, Posture::Crouch, params));
}

TEST_CASE("regulation closes downward without overshoot") {
    World world(bench::plant(0.2, 0.93));
    RobotState robot{bench::base(), Pose5{}};
    const ControlParams params;
    const Run r = runAction(world, robot, "c0", params);
    REQUIRE(r.action.status == ActionStatus::Done);
    for (std::size_t i = 1; i < r.errors.size(); ++i) {
        REQUIRE(r.errors[i] <= r.errors[i - 1]);
    }
    CHECK(world.valveState(1) >= 0.2 - 1e-9);
    CHECK(std::abs(world.gaugeValue(0) - 0.2) <= 0.01);
}

TEST_CASE("regulation against an unreachable target aborts at the stop") {
    World world(bench::plant(1.5, 0.5));
    RobotState robot{bench::base(), Pose5{}};
    const Run r = runAction(world, robot, "c0", ControlParams{});
    CHECK(r.action.status == ActionStatus::Aborted);
    CHECK(r.action.abortReason == "Saturated");
    CHECK(world.valveState(1) == doctest::Approx(1.0));
    CHECK(std::count_if(r.events.begin(), r.events.end(),
                        [](const Event& e) { return e.type == EventType::ValveAdjusted; }) == 1);
}

TEST_CASE("regulation ending at the stop but within tolerance is done") {
    World world(bench::plant(1.005, 0.5));
    RobotState robot{bench::base(), Pose5{}};
    const Run r = runAction(world, robot, "c0", ControlParams{});
    CHECK(r.action.status == ActionStatus::Done);
    CHECK(world.valveState(1) == 1.0);
    CHECK(std::abs(world.gaugeValue(0) - 1.005) <= 0.01);
}

TEST_CASE("toggle action flips the valve once") {
    World world(bench::plant());
    RobotState robot{bench::base(), Pose5{}};
    const Run r = runAction(world, robot, "d0", ControlParams{});
    REQUIRE(r.action.status == ActionStatus::Done);
    CHECK(world.valveState(0) == 1.0);
    CHECK(world.gaugeValue(1) == doctest::Approx(0.3));
    CHECK(count(r.events, EventType::ValveToggled) == 1);
}

TEST_CASE("sensing is world-stabilised against base noise") {
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        World world(bench::plant());
        const BasePose nominal = bench::base();
        RobotState robot{nominal, Pose5{}};
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> noise(-0.01, 0.01);
        double progress = 0.0;
        bool monotone = true;
        Run r;
        r.action = select("p0", world, robot.base, std::nullopt, ControlParams{});
        startAction(r.action, robot, ControlParams{}, dt, r.events);
        while (r.action.live() && r.ticks < 2000) {
            robot.base = {nominal.x + noise(rng), nominal.y + noise(rng), nominal.z + noise(rng), nominal.heading};
            const bool acting = r.action.status == ActionStatus::Acting;
            assistStep(r.action, world, robot, dt, ControlParams{}, r.events);
            ++r.ticks;
            if (acting && r.action.status == ActionStatus::Acting) {
                monotone = monotone && r.action.sense.seconds >= progress;
                progress = r.action.sense.seconds;
            }
        }
        CHECK(r.action.status == ActionStatus::Done);
        CHECK(monotone);
        CHECK(count(r.events, EventType::SensorReading) == 1);
        CHECK(world.readings()[0].has_value());
    }
}

TEST_CASE("selection rules") {
    World world(bench::plant());
    const ControlParams params;
    const BasePose base = bench::base();
    const DelegatedAction a = select("d0", world, base, std::nullopt, params);
    CHECK(a.kind == ActionKind::Toggle);
    CHECK(a.status == ActionStatus::Pending);
    CHECK(select("c0", world, base, std::nullopt, params).kind == ActionKind::Regulate);
    CHECK(select("p0", world, base, std::nullopt, params).kind == ActionKind::Sense);

    const auto code = [&](auto&& f) {
        try {
            f();
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Io;
    };
    CHECK(code([&] { (void)select("zz", world, base, std::nullopt, params); }) == ErrorCode::NotFound);
    CHECK(code([&] { (void)select("d0", world, BasePose{3.0, 0, -0.1, 0}, std::nullopt, params); }) ==
          ErrorCode::OutOfReach);
    DelegatedAction busy = a;
    busy.status = ActionStatus::Aiming;
    CHECK(code([&] { (void)select("c0", world, base, busy, params); }) == ErrorCode::BusyWithAction);
    busy.status = ActionStatus::Done;
    CHECK_NOTHROW((void)select("c0", world, base, busy, params));
}

TEST_CASE("assisted tip commands never leave the workspace") {
    const ControlParams params;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        World world(bench::plant());
        RobotState robot{bench::base(), Pose5{}};
        std::mt19937_64 rng(seed);
        std::uniform_real_distribution<double> noise(-0.05, 0.05);
        for (const char* id : {"d0", "c0", "p0"}) {
            DelegatedAction action = select(id, world, robot.base, std::nullopt, params);
            std::vector<Event> events;
            startAction(action, robot, params, dt, events);
            for (int i = 0; i < 600 && action.live(); ++i) {
                robot.base = {bench::cx + noise(rng), bench::cy + noise(rng), -0.10, noise(rng)};
                assistStep(action, world, robot, dt, params, events);
                REQUIRE(params.limits.contains(robot.tipLocal));
            }
        }
    }
}

TEST_CASE("manual activation acts on what the tip touches") {
    const ControlParams params;
    std::vector<Event> events;
    SUBCASE("discrete valve within reach toggles on the edge only") {
        World world(bench::plant());
        RobotState robot{bench::base(), Pose5{}};
        ManualState ms;
        const Pose5 wand{0.0, 0.0, 0.09, 0.0, 0.0}; // 1 cm short of d0
        for (int i = 0; i < 10; ++i) {
            manualStep({wand, true}, ms, world, robot, dt, params, events);
        }
        CHECK(world.valveState(0) == 1.0);
        CHECK(count(events, EventType::ValveToggled) == 1);
    }
    SUBCASE("nothing within reach") {
        World world(bench::plant());
        RobotState robot{bench::base(), Pose5{}};
        ManualState ms;
        manualStep({Pose5{0.0, -0.05, 0.10, 0, 0}, true}, ms, world, robot, dt, params, events);
        CHECK(count(events, EventType::NoTarget) == 1);
    }
    SUBCASE("holding on a pipe for the dwell time produces a reading") {
        World world(bench::plant());
        RobotState robot{bench::base(), Pose5{}};
        ManualState ms;
        const Pose5 wand{-0.1, 0.05, 0.10, 0, 0};
        for (int i = 0; i < 150; ++i) {
            manualStep({wand, true}, ms, world, robot, dt, params, events);
        }
        CHECK(count(events, EventType::SensorReading) == 1);
    }
    SUBCASE("held activation turns a continuous valve at the manual rate") {
        World world(bench::plant());
        RobotState robot{bench::base(), Pose5{}};
        ManualState ms;
        const Pose5 wand{0.05, 0.0, 0.10, 0.05, 0};
        for (int i = 0; i < 50; ++i) {
            manualStep({wand, true}, ms, world, robot, dt, params, events);
        }
        CHECK(world.valveState(1) == doctest::Approx(50 * params.manualRate * dt));
    }
    SUBCASE("the tip replicates the wand inside the limits") {
        World world(bench::plant());
        RobotState robot{bench::base(), Pose5{}};
        ManualState ms;
        manualStep({Pose5{0.3, 0, 0, 1.2, 0}, false}, ms, world, robot, dt, params, events);
        CHECK(robot.tipLocal.x == doctest::Approx(0.15));
        CHECK(robot.tipLocal.yaw == doctest::Approx(pi / 3));
    }
}

TEST_CASE("guidance cue is proportional to deflection and capped") {
    const ControlParams params;
    CHECK(guidanceCue(Pose5{}, params).speedHint == 0.0);
    CHECK(guidanceCue(Pose5{0, 0, 0, pi / 3, 0}, params).speedHint == doctest::Approx(0.4));
    CHECK(guidanceCue(Pose5{0, 0, 0, pi / 6, 0}, params).speedHint == doctest::Approx(0.2));
    const GuidanceCue left = guidanceCue(Pose5{0, 0, 0, -pi / 3, 0}, params);
    REQUIRE(left.direction);
    CHECK(left.direction->x == doctest::Approx(-1.0));
    ControlParams steep = params;
    steep.deflectionGain = 10.0;
    CHECK(guidanceCue(Pose5{0, 0, 0, pi / 3, 0}, steep).speedHint == doctest::Approx(params.maxWorkerSpeed));
}

TEST_CASE("phase classification follows the interaction cycle") {
    const ControlParams params;
    CHECK(phaseUpdate({}, Phase::Exploration, params) == Phase::Exploration);
    PhaseObservation acting;
    acting.action = ActionStatus::Acting;
    CHECK(phaseUpdate(acting, Phase::Exploration, params) == Phase::LocalSolve);
    PhaseObservation crouched;
    crouched.action = ActionStatus::Done;
    crouched.tipAtCrouch = true;
    CHECK(phaseUpdate(crouched, Phase::LocalSolve, params) == Phase::Retraction);
    PhaseObservation deflected;
    deflected.deflectionAngle = 0.5;
    CHECK(phaseUpdate(deflected, Phase::Exploration, params) == Phase::Guidance);
    CHECK(phaseUpdate(deflected, Phase::Retraction, params) != Phase::LocalSolve);
}
