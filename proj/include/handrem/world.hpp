#pragma once

#include "handrem/kinematics.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace handrem {

enum class ValveKind { Discrete, Continuous };

std::string_view nameOf(ValveKind kind) noexcept;

struct Valve {
    std::string id;
    ValveKind kind = ValveKind::Discrete;
    Vec2 position;
    friend bool operator==(const Valve&, const Valve&) = default;
};

struct Gauge {
    std::string id;
    Vec2 position;
    double target = 0.0;
    friend bool operator==(const Gauge&, const Gauge&) = default;
};

struct PipeSegment {
    std::string id;
    Vec2 a;
    Vec2 b;
    bool cracked = false; ///< hidden from every client
    bool mustCheck = false;

    [[nodiscard]] double length() const { return (b - a).norm(); }
    friend bool operator==(const PipeSegment&, const PipeSegment&) = default;
};

/// Counts of required discrete toggles, continuous adjustments and pipe checks.
struct Profile {
    int discrete = 6;
    int continuous = 2;
    int pipes = 3;

    [[nodiscard]] int total() const { return discrete + continuous + pipes; }
    friend bool operator==(const Profile&, const Profile&) = default;
};

struct PanelSize {
    double width = 1.6;
    double height = 0.9;
    friend bool operator==(const PanelSize&, const PanelSize&) = default;
};

/// Fixed plant layout. The numbers of valves, gauges and pipes are part of
/// the task design and are checked by the generator.
struct PlantLayout {
    static constexpr int kDiscreteValves = 8;
    static constexpr int kContinuousValves = 2;
    static constexpr int kGauges = 3;
    static constexpr int kPipes = 6;
};

struct Scenario {
    int version = 1;
    std::uint64_t seed = 0;
    Profile profile;
    PanelSize panel;
    std::vector<Valve> valves;
    std::vector<Gauge> gauges;
    /// contributions[g][v]: flow units on gauge g per unit open-fraction of valve v.
    std::vector<std::vector<double>> contributions;
    std::vector<PipeSegment> pipes;
    std::vector<double> initialStates;
    int requiredActionCount = 0;

    [[nodiscard]] std::optional<std::size_t> valveIndex(std::string_view id) const;
    [[nodiscard]] std::optional<std::size_t> gaugeIndex(std::string_view id) const;
    [[nodiscard]] std::optional<std::size_t> pipeIndex(std::string_view id) const;
    /// Gauge fed by valve v (the single non-zero entry of its column).
    [[nodiscard]] std::size_t gaugeOf(std::size_t valve) const;

    /// Structural checks: unique ids, one gauge per valve column, state
    /// domains, positive pipe lengths. Throws Error(InvalidProfile).
    void validate() const;

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Point on the panel surface in world coordinates (the panel is the Z = 0 plane).
[[nodiscard]] inline Vec3 onPanel(Vec2 p) { return {p.x, p.y, 0.0}; }

[[nodiscard]] double distanceToSegment(Vec3 point, Vec2 a, Vec2 b);
[[nodiscard]] Vec2 closestOnSegment(Vec2 point, Vec2 a, Vec2 b);

struct WorldParams {
    double dwellRequired = 3.0;  ///< seconds of continuous contact for a reading
    double touchRadius = 0.02;   ///< tip-to-object contact tolerance, metres
    double gaugeTolerance = 0.01; ///< goal match tolerance, flow units
    friend bool operator==(const WorldParams&, const WorldParams&) = default;
};

enum class Verdict { Pass, Crack };
std::string_view nameOf(Verdict v) noexcept;

struct SensorReading {
    std::string pipeId;
    Verdict verdict = Verdict::Pass;
    double dwellAchieved = 0.0;
    friend bool operator==(const SensorReading&, const SensorReading&) = default;
};

/// Dwell accumulator for one sensing attempt.
struct SenseProgress {
    std::optional<std::size_t> pipe;
    double seconds = 0.0;
    bool reported = false;

    void reset() { *this = {}; }
    friend bool operator==(const SenseProgress&, const SenseProgress&) = default;
};

/// Mutable plant state over an immutable scenario.
class World {
public:
    explicit World(std::shared_ptr<const Scenario> scenario, WorldParams params = {});

    [[nodiscard]] const Scenario& scenario() const { return *scenario_; }
    [[nodiscard]] const std::shared_ptr<const Scenario>& scenarioPtr() const { return scenario_; }
    [[nodiscard]] const WorldParams& params() const { return params_; }

    [[nodiscard]] std::span<const double> valveStates() const { return states_; }
    [[nodiscard]] double valveState(std::size_t v) const { return states_.at(v); }
    [[nodiscard]] std::span<const double> gaugeValues() const { return gauges_; }

    [[nodiscard]] double gaugeValue(std::string_view gaugeId) const;
    [[nodiscard]] double gaugeValue(std::size_t g) const { return gauges_.at(g); }

    void toggleDiscrete(std::string_view valveId);
    void toggleDiscrete(std::size_t v);
    void adjustContinuous(std::string_view valveId, double delta);
    void adjustContinuous(std::size_t v, double delta);

    /// Advance the dwell timer for pipe `pipe` given the tip position.
    /// Returns the reading on the tick the dwell threshold is first reached.
    std::optional<SensorReading> senseStep(std::size_t pipe, Vec3 tipWorld, double dt, SenseProgress& progress) const;
    std::optional<SensorReading> senseStep(std::string_view pipeId, Vec3 tipWorld, double dt,
                                           SenseProgress& progress) const;

    void recordReading(const SensorReading& reading);
    [[nodiscard]] const std::vector<std::optional<SensorReading>>& readings() const { return readings_; }

    [[nodiscard]] bool goalSatisfied() const;
    [[nodiscard]] bool gaugesOnTarget() const;

    /// Nearest object (valve or pipe) within touchRadius of the tip.
    struct Touch {
        enum class Kind { Valve, Pipe } kind;
        std::size_t index;
        double distance;
    };
    [[nodiscard]] std::optional<Touch> touched(Vec3 tipWorld) const;

    friend bool operator==(const World& a, const World& b) {
        return *a.scenario_ == *b.scenario_ && a.params_ == b.params_ && a.states_ == b.states_ &&
               a.gauges_ == b.gauges_ && a.readings_ == b.readings_;
    }

private:
    void recomputeGauge(std::size_t g);

    std::shared_ptr<const Scenario> scenario_;
    WorldParams params_;
    std::vector<double> states_;
    std::vector<double> gauges_;
    std::vector<std::optional<SensorReading>> readings_;
};

/// Minimal set of valve operations bringing every gauge to its target.
struct ValvePlan {
    std::vector<std::size_t> toggles;
    struct Adjustment {
        std::size_t valve;
        double targetState;
    };
    std::vector<Adjustment> adjustments;

    [[nodiscard]] int actionCount() const { return static_cast<int>(toggles.size() + adjustments.size()); }
};

struct PlannerOptions {
    double tolerance = 0.01;
    /// Treat continuous valve states as unknown: every continuous valve is
    /// assumed to be regulated, so it absorbs any residual within its range
    /// and costs nothing when choosing the discrete toggles.
    bool continuousUnknown = false;
};

/// Exhaustive minimum-action plan over discrete toggle subsets. Returns
/// nothing if the targets are unreachable.
[[nodiscard]] std::optional<ValvePlan> planValves(const Scenario& scenario, std::span<const double> states,
                                                  const PlannerOptions& options = {});

/// Seeded scenario with exactly profile.discrete wrong discrete valves,
/// profile.continuous off-target continuous valves and profile.pipes pipes to
/// check. Pure function of (seed, profile). Throws Error(InvalidProfile).
[[nodiscard]] Scenario generateScenario(std::uint64_t seed, const Profile& profile = {});

void validateProfile(const Profile& profile);

} // namespace handrem
