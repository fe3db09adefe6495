#include "handrem/world.hpp"

#include "handrem/error.hpp"
#include "handrem/random.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <set>

namespace handrem {

std::string_view nameOf(ValveKind kind) noexcept {
    return kind == ValveKind::Discrete ? "DISCRETE" : "CONTINUOUS";
}

std::string_view nameOf(Verdict v) noexcept {
    return v == Verdict::Pass ? "PASS" : "CRACK";
}

// ---------------------------------------------------------------------------
// Scenario

namespace {

template <typename T>
std::optional<std::size_t> indexById(const std::vector<T>& items, std::string_view id) {
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (items[i].id == id) {
            return i;
        }
    }
    return std::nullopt;
}

template <typename T>
void requireUniqueIds(const std::vector<T>& items, const char* what) {
    std::set<std::string_view> seen;
    for (const auto& item : items) {
        if (item.id.empty() || !seen.insert(item.id).second) {
            throw Error(ErrorCode::InvalidProfile, std::string("duplicate or empty ") + what + " id '" + item.id + "'");
        }
    }
}

} // namespace

std::optional<std::size_t> Scenario::valveIndex(std::string_view id) const { return indexById(valves, id); }
std::optional<std::size_t> Scenario::gaugeIndex(std::string_view id) const { return indexById(gauges, id); }
std::optional<std::size_t> Scenario::pipeIndex(std::string_view id) const { return indexById(pipes, id); }

std::size_t Scenario::gaugeOf(std::size_t valve) const {
    for (std::size_t g = 0; g < contributions.size(); ++g) {
        if (contributions[g].at(valve) != 0.0) {
            return g;
        }
    }
    throw Error(ErrorCode::NotFound, "valve '" + valves.at(valve).id + "' feeds no gauge");
}

void Scenario::validate() const {
    requireUniqueIds(valves, "valve");
    requireUniqueIds(gauges, "gauge");
    requireUniqueIds(pipes, "pipe");
    if (contributions.size() != gauges.size()) {
        throw Error(ErrorCode::InvalidProfile, "contribution matrix needs one row per gauge");
    }
    for (const auto& row : contributions) {
        if (row.size() != valves.size()) {
            throw Error(ErrorCode::InvalidProfile, "contribution matrix needs one column per valve");
        }
        for (double c : row) {
            if (!std::isfinite(c) || c < 0.0) {
                throw Error(ErrorCode::InvalidProfile, "contributions must be finite and non-negative");
            }
        }
    }
    for (std::size_t v = 0; v < valves.size(); ++v) {
        int nonZero = 0;
        for (const auto& row : contributions) {
            nonZero += row[v] != 0.0 ? 1 : 0;
        }
        if (nonZero != 1) {
            throw Error(ErrorCode::InvalidProfile, "valve '" + valves[v].id + "' must feed exactly one gauge");
        }
    }
    if (initialStates.size() != valves.size()) {
        throw Error(ErrorCode::InvalidProfile, "need one initial state per valve");
    }
    for (std::size_t v = 0; v < valves.size(); ++v) {
        const double s = initialStates[v];
        const bool ok = valves[v].kind == ValveKind::Discrete ? (s == 0.0 || s == 1.0) : (s >= 0.0 && s <= 1.0);
        if (!ok) {
            throw Error(ErrorCode::InvalidProfile, "initial state out of domain for valve '" + valves[v].id + "'");
        }
    }
    for (const auto& g : gauges) {
        if (!std::isfinite(g.target)) {
            throw Error(ErrorCode::InvalidProfile, "gauge target must be finite");
        }
    }
    for (const auto& p : pipes) {
        if (!(p.length() > 0.0)) {
            throw Error(ErrorCode::InvalidProfile, "pipe '" + p.id + "' has zero length");
        }
    }
}

// ---------------------------------------------------------------------------
// Geometry

Vec2 closestOnSegment(Vec2 point, Vec2 a, Vec2 b) {
    const Vec2 ab = b - a;
    const double len2 = ab.dot(ab);
    if (len2 <= 0.0) {
        return a;
    }
    const double t = std::clamp((point - a).dot(ab) / len2, 0.0, 1.0);
    return a + t * ab;
}

double distanceToSegment(Vec3 point, Vec2 a, Vec2 b) {
    const Vec2 c = closestOnSegment({point.x, point.y}, a, b);
    return (point - onPanel(c)).norm();
}

// ---------------------------------------------------------------------------
// World

World::World(std::shared_ptr<const Scenario> scenario, WorldParams params)
    : scenario_(std::move(scenario)), params_(params) {
    if (!scenario_) {
        throw Error(ErrorCode::NotFound, "world needs a scenario");
    }
    scenario_->validate();
    states_ = scenario_->initialStates;
    gauges_.assign(scenario_->gauges.size(), 0.0);
    readings_.assign(scenario_->pipes.size(), std::nullopt);
    for (std::size_t g = 0; g < gauges_.size(); ++g) {
        recomputeGauge(g);
    }
}

void World::recomputeGauge(std::size_t g) {
    const auto& row = scenario_->contributions[g];
    double sum = 0.0;
    for (std::size_t v = 0; v < states_.size(); ++v) {
        sum += row[v] * states_[v];
    }
    gauges_[g] = sum;
}

double World::gaugeValue(std::string_view gaugeId) const {
    const auto g = scenario_->gaugeIndex(gaugeId);
    if (!g) {
        throw Error(ErrorCode::NotFound, "unknown gauge '" + std::string(gaugeId) + "'");
    }
    return gauges_[*g];
}

namespace {

std::size_t requireValve(const Scenario& s, std::string_view id) {
    const auto v = s.valveIndex(id);
    if (!v) {
        throw Error(ErrorCode::NotFound, "unknown valve '" + std::string(id) + "'");
    }
    return *v;
}

} // namespace

void World::toggleDiscrete(std::string_view valveId) { toggleDiscrete(requireValve(*scenario_, valveId)); }

void World::toggleDiscrete(std::size_t v) {
    if (v >= states_.size()) {
        throw Error(ErrorCode::NotFound, "valve index out of range");
    }
    if (scenario_->valves[v].kind != ValveKind::Discrete) {
        throw Error(ErrorCode::WrongValveKind, "valve '" + scenario_->valves[v].id + "' is continuous");
    }
    states_[v] = states_[v] == 0.0 ? 1.0 : 0.0;
    recomputeGauge(scenario_->gaugeOf(v));
}

void World::adjustContinuous(std::string_view valveId, double delta) {
    adjustContinuous(requireValve(*scenario_, valveId), delta);
}

void World::adjustContinuous(std::size_t v, double delta) {
    if (v >= states_.size()) {
        throw Error(ErrorCode::NotFound, "valve index out of range");
    }
    if (scenario_->valves[v].kind != ValveKind::Continuous) {
        throw Error(ErrorCode::WrongValveKind, "valve '" + scenario_->valves[v].id + "' is discrete");
    }
    if (!std::isfinite(delta)) {
        throw Error(ErrorCode::InvalidPose, "non-finite valve delta");
    }
    states_[v] = std::clamp(states_[v] + delta, 0.0, 1.0);
    recomputeGauge(scenario_->gaugeOf(v));
}

std::optional<SensorReading> World::senseStep(std::size_t pipe, Vec3 tipWorld, double dt,
                                              SenseProgress& progress) const {
    if (pipe >= scenario_->pipes.size()) {
        throw Error(ErrorCode::NotFound, "pipe index out of range");
    }
    const auto& seg = scenario_->pipes[pipe];
    if (progress.pipe != pipe) {
        progress.reset();
        progress.pipe = pipe;
    }
    if (distanceToSegment(tipWorld, seg.a, seg.b) > params_.touchRadius) {
        progress.reset();
        progress.pipe = pipe;
        return std::nullopt;
    }
    progress.seconds += dt;
    // small slack so that an integer number of ticks summing to the dwell
    // time is not lost to rounding
    if (!progress.reported && progress.seconds >= params_.dwellRequired - 1e-9) {
        progress.reported = true;
        return SensorReading{seg.id, seg.cracked ? Verdict::Crack : Verdict::Pass, progress.seconds};
    }
    return std::nullopt;
}

std::optional<SensorReading> World::senseStep(std::string_view pipeId, Vec3 tipWorld, double dt,
                                              SenseProgress& progress) const {
    const auto p = scenario_->pipeIndex(pipeId);
    if (!p) {
        throw Error(ErrorCode::NotFound, "unknown pipe '" + std::string(pipeId) + "'");
    }
    return senseStep(*p, tipWorld, dt, progress);
}

void World::recordReading(const SensorReading& reading) {
    const auto p = scenario_->pipeIndex(reading.pipeId);
    if (!p) {
        throw Error(ErrorCode::NotFound, "unknown pipe '" + reading.pipeId + "'");
    }
    readings_[*p] = reading;
}

bool World::gaugesOnTarget() const {
    for (std::size_t g = 0; g < gauges_.size(); ++g) {
        if (std::abs(gauges_[g] - scenario_->gauges[g].target) > params_.gaugeTolerance) {
            return false;
        }
    }
    return true;
}

bool World::goalSatisfied() const {
    if (!gaugesOnTarget()) {
        return false;
    }
    for (std::size_t p = 0; p < readings_.size(); ++p) {
        if (scenario_->pipes[p].mustCheck && !readings_[p]) {
            return false;
        }
    }
    return true;
}

std::optional<World::Touch> World::touched(Vec3 tipWorld) const {
    std::optional<Touch> best;
    const auto consider = [&](Touch::Kind kind, std::size_t i, double d) {
        if (d <= params_.touchRadius && (!best || d < best->distance)) {
            best = Touch{kind, i, d};
        }
    };
    for (std::size_t v = 0; v < scenario_->valves.size(); ++v) {
        consider(Touch::Kind::Valve, v, (tipWorld - onPanel(scenario_->valves[v].position)).norm());
    }
    for (std::size_t p = 0; p < scenario_->pipes.size(); ++p) {
        const auto& seg = scenario_->pipes[p];
        consider(Touch::Kind::Pipe, p, distanceToSegment(tipWorld, seg.a, seg.b));
    }
    return best;
}

// ---------------------------------------------------------------------------
// Planner

namespace {

struct GaugeCost {
    int cost = 0;
    std::vector<ValvePlan::Adjustment> adjustments;
};

/// Fewest continuous adjustments on one gauge that absorb `residual`.
std::optional<GaugeCost> absorbResidual(const Scenario& s, std::size_t g, const std::vector<std::size_t>& cont,
                                        std::span<const double> states, double residual, double tol) {
    const auto& row = s.contributions[g];
    const std::size_t n = cont.size();
    std::optional<GaugeCost> best;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        const int cost = std::popcount(mask);
        if (best && cost >= best->cost) {
            continue;
        }
        double lo = 0.0;
        double hi = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mask & (1u << i)) {
                lo -= row[cont[i]] * states[cont[i]];
                hi += row[cont[i]] * (1.0 - states[cont[i]]);
            }
        }
        if (residual < lo - tol || residual > hi + tol) {
            continue;
        }
        GaugeCost gc;
        gc.cost = cost;
        double remaining = residual;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(mask & (1u << i))) {
                continue;
            }
            const std::size_t v = cont[i];
            const double c = row[v];
            const double change = std::clamp(remaining / c, -states[v], 1.0 - states[v]);
            remaining -= change * c;
            gc.adjustments.push_back({v, states[v] + change});
        }
        best = std::move(gc);
    }
    return best;
}

} // namespace

std::optional<ValvePlan> planValves(const Scenario& s, std::span<const double> states, const PlannerOptions& options) {
    if (states.size() != s.valves.size()) {
        throw Error(ErrorCode::NotFound, "state vector does not match the scenario");
    }
    std::vector<std::size_t> discrete;
    std::vector<std::vector<std::size_t>> contByGauge(s.gauges.size());
    for (std::size_t v = 0; v < s.valves.size(); ++v) {
        if (s.valves[v].kind == ValveKind::Discrete) {
            discrete.push_back(v);
        } else {
            contByGauge[s.gaugeOf(v)].push_back(v);
        }
    }
    if (discrete.size() > 20) {
        throw Error(ErrorCode::InvalidProfile, "too many discrete valves for exhaustive planning");
    }

    std::optional<ValvePlan> best;
    int bestCost = std::numeric_limits<int>::max();
    std::vector<double> trial(states.begin(), states.end());
    const std::uint32_t subsets = 1u << discrete.size();
    for (std::uint32_t mask = 0; mask < subsets; ++mask) {
        const int toggles = std::popcount(mask);
        if (toggles > bestCost) {
            continue;
        }
        for (std::size_t i = 0; i < discrete.size(); ++i) {
            const std::size_t v = discrete[i];
            trial[v] = (mask & (1u << i)) ? 1.0 - states[v] : states[v];
        }
        int cost = toggles;
        std::vector<ValvePlan::Adjustment> adjustments;
        bool feasible = true;
        for (std::size_t g = 0; g < s.gauges.size() && feasible; ++g) {
            const auto& row = s.contributions[g];
            double sum = 0.0;
            for (std::size_t v = 0; v < trial.size(); ++v) {
                if (options.continuousUnknown && s.valves[v].kind == ValveKind::Continuous) {
                    continue;
                }
                sum += row[v] * trial[v];
            }
            const double residual = s.gauges[g].target - sum;
            if (options.continuousUnknown) {
                double capacity = 0.0;
                for (std::size_t v : contByGauge[g]) {
                    capacity += row[v];
                }
                if (residual < -options.tolerance || residual > capacity + options.tolerance) {
                    feasible = false;
                    break;
                }
                double remaining = residual;
                for (std::size_t v : contByGauge[g]) {
                    const double st = std::clamp(remaining / row[v], 0.0, 1.0);
                    remaining -= st * row[v];
                    adjustments.push_back({v, st});
                }
                continue;
            }
            auto gc = absorbResidual(s, g, contByGauge[g], trial, residual, options.tolerance);
            if (!gc) {
                feasible = false;
                break;
            }
            cost += gc->cost;
            adjustments.insert(adjustments.end(), gc->adjustments.begin(), gc->adjustments.end());
        }
        if (!feasible || cost >= bestCost) {
            continue;
        }
        ValvePlan plan;
        for (std::size_t i = 0; i < discrete.size(); ++i) {
            if (mask & (1u << i)) {
                plan.toggles.push_back(discrete[i]);
            }
        }
        plan.adjustments = std::move(adjustments);
        best = std::move(plan);
        bestCost = cost;
    }
    return best;
}

// ---------------------------------------------------------------------------
// Generator

void validateProfile(const Profile& p) {
    if (p.discrete < 0 || p.discrete > PlantLayout::kDiscreteValves) {
        throw Error(ErrorCode::InvalidProfile,
                    "discrete toggles must be in [0, " + std::to_string(PlantLayout::kDiscreteValves) + "]");
    }
    if (p.continuous < 0 || p.continuous > PlantLayout::kContinuousValves) {
        throw Error(ErrorCode::InvalidProfile,
                    "continuous adjustments must be in [0, " + std::to_string(PlantLayout::kContinuousValves) + "]");
    }
    if (p.pipes < 0 || p.pipes > PlantLayout::kPipes) {
        throw Error(ErrorCode::InvalidProfile, "pipe checks must be in [0, " + std::to_string(PlantLayout::kPipes) + "]");
    }
    if (p.total() < 1) {
        throw Error(ErrorCode::InvalidProfile, "profile must require at least one action");
    }
}

namespace {

constexpr double kEdgeMargin = 0.1;
constexpr double kValveSpacing = 0.12;
constexpr double kPipeClearance = 0.06;
constexpr int kMaxAttempts = 10000;

double round2(double v) { return std::round(v * 100.0) / 100.0; }
double roundMm(double v) { return std::round(v * 1000.0) / 1000.0; }

bool segmentsIntersect(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
    const auto cross = [](Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; };
    const Vec2 r = p2 - p1;
    const Vec2 s = q2 - q1;
    const double denom = cross(r, s);
    if (denom == 0.0) {
        return false;
    }
    const double t = cross(q1 - p1, s) / denom;
    const double u = cross(q1 - p1, r) / denom;
    return t >= 0.0 && t <= 1.0 && u >= 0.0 && u <= 1.0;
}

double segmentDistance(Vec2 p1, Vec2 p2, Vec2 q1, Vec2 q2) {
    if (segmentsIntersect(p1, p2, q1, q2)) {
        return 0.0;
    }
    const auto d = [](Vec2 pt, Vec2 a, Vec2 b) { return (pt - closestOnSegment(pt, a, b)).norm(); };
    return std::min({d(p1, q1, q2), d(p2, q1, q2), d(q1, p1, p2), d(q2, p1, p2)});
}

Vec2 randomPoint(Rng& rng, const PanelSize& panel) {
    return {roundMm(rng.uniform(kEdgeMargin, panel.width - kEdgeMargin)),
            roundMm(rng.uniform(kEdgeMargin, panel.height - kEdgeMargin))};
}

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::swap(items[i - 1], items[rng.below(i)]);
    }
}

std::optional<Scenario> tryGenerate(Rng& rng, std::uint64_t seed, const Profile& profile) {
    Scenario s;
    s.seed = seed;
    s.profile = profile;

    const int nValves = PlantLayout::kDiscreteValves + PlantLayout::kContinuousValves;
    std::vector<Vec2> valvePos;
    while (static_cast<int>(valvePos.size()) < nValves) {
        const Vec2 p = randomPoint(rng, s.panel);
        const bool clear =
            std::all_of(valvePos.begin(), valvePos.end(), [&](Vec2 q) { return (p - q).norm() >= kValveSpacing; });
        if (clear) {
            valvePos.push_back(p);
        }
    }
    for (int v = 0; v < nValves; ++v) {
        const bool discrete = v < PlantLayout::kDiscreteValves;
        s.valves.push_back({"v" + std::to_string(v), discrete ? ValveKind::Discrete : ValveKind::Continuous,
                            valvePos[static_cast<std::size_t>(v)]});
    }

    for (int g = 0; g < PlantLayout::kGauges; ++g) {
        // gauges sit in a strip along the top edge of the panel
        const double x = s.panel.width * (g + 0.5) / PlantLayout::kGauges;
        s.gauges.push_back({"g" + std::to_string(g), {roundMm(x), roundMm(s.panel.height - 0.04)}, 0.0});
    }

    // One gauge per valve, every gauge fed by at least two valves.
    std::vector<std::size_t> feeds(static_cast<std::size_t>(nValves));
    for (auto& f : feeds) {
        f = rng.below(PlantLayout::kGauges);
    }
    for (int g = 0; g < PlantLayout::kGauges; ++g) {
        if (std::count(feeds.begin(), feeds.end(), static_cast<std::size_t>(g)) < 2) {
            return std::nullopt;
        }
    }
    s.contributions.assign(PlantLayout::kGauges, std::vector<double>(static_cast<std::size_t>(nValves), 0.0));
    for (int v = 0; v < nValves; ++v) {
        const bool discrete = s.valves[static_cast<std::size_t>(v)].kind == ValveKind::Discrete;
        // continuous valves are fine trim, discrete ones coarse steps
        const double c = discrete ? round2(rng.uniform(0.45, 0.9)) : round2(rng.uniform(0.2, 0.4));
        s.contributions[feeds[static_cast<std::size_t>(v)]][static_cast<std::size_t>(v)] = c;
    }

    std::vector<double> solution(static_cast<std::size_t>(nValves));
    for (int v = 0; v < nValves; ++v) {
        const auto idx = static_cast<std::size_t>(v);
        solution[idx] = s.valves[idx].kind == ValveKind::Discrete ? (rng.bernoulli(0.5) ? 1.0 : 0.0)
                                                                  : round2(rng.uniform(0.25, 0.75));
    }
    s.initialStates = solution;

    std::vector<std::size_t> discreteIdx;
    std::vector<std::size_t> contIdx;
    for (std::size_t v = 0; v < s.valves.size(); ++v) {
        (s.valves[v].kind == ValveKind::Discrete ? discreteIdx : contIdx).push_back(v);
    }
    shuffle(discreteIdx, rng);
    shuffle(contIdx, rng);
    for (int i = 0; i < profile.discrete; ++i) {
        auto& st = s.initialStates[discreteIdx[static_cast<std::size_t>(i)]];
        st = 1.0 - st;
    }
    for (int i = 0; i < profile.continuous; ++i) {
        const std::size_t v = contIdx[static_cast<std::size_t>(i)];
        double offset = round2(rng.uniform(0.2, 0.45));
        if (rng.bernoulli(0.5)) {
            offset = -offset;
        }
        double st = solution[v] + offset;
        if (st < 0.0 || st > 1.0) {
            st = solution[v] - offset;
        }
        s.initialStates[v] = round2(st);
    }

    for (std::size_t g = 0; g < s.gauges.size(); ++g) {
        double sum = 0.0;
        for (std::size_t v = 0; v < solution.size(); ++v) {
            sum += s.contributions[g][v] * solution[v];
        }
        s.gauges[g].target = sum;
    }

    std::vector<PipeSegment> pipes;
    int guard = 0;
    while (static_cast<int>(pipes.size()) < PlantLayout::kPipes) {
        if (++guard > 2000) {
            return std::nullopt;
        }
        const Vec2 a = randomPoint(rng, s.panel);
        const double len = rng.uniform(0.15, 0.35);
        const double ang = rng.uniform(0.0, 2.0 * 3.14159265358979323846);
        const Vec2 b{roundMm(a.x + len * std::cos(ang)), roundMm(a.y + len * std::sin(ang))};
        if (b.x < kEdgeMargin || b.x > s.panel.width - kEdgeMargin || b.y < kEdgeMargin ||
            b.y > s.panel.height - kEdgeMargin) {
            continue;
        }
        bool clear = std::all_of(valvePos.begin(), valvePos.end(), [&](Vec2 q) {
            return (q - closestOnSegment(q, a, b)).norm() >= kPipeClearance;
        });
        clear = clear && std::all_of(pipes.begin(), pipes.end(), [&](const PipeSegment& p) {
                    return segmentDistance(a, b, p.a, p.b) >= kPipeClearance;
                });
        if (clear) {
            pipes.push_back({"p" + std::to_string(pipes.size()), a, b, false, false});
        }
    }
    for (auto& p : pipes) {
        p.cracked = rng.bernoulli(0.5);
    }
    std::vector<std::size_t> pipeIdx(pipes.size());
    for (std::size_t i = 0; i < pipeIdx.size(); ++i) {
        pipeIdx[i] = i;
    }
    shuffle(pipeIdx, rng);
    for (int i = 0; i < profile.pipes; ++i) {
        pipes[pipeIdx[static_cast<std::size_t>(i)]].mustCheck = true;
    }
    s.pipes = std::move(pipes);

    // The intended solution must be the cheapest one, with margin: no plan
    // with fewer operations gets within twice the goal tolerance.
    PlannerOptions opts;
    opts.tolerance = 2.0 * WorldParams{}.gaugeTolerance;
    const auto plan = planValves(s, s.initialStates, opts);
    if (!plan || plan->actionCount() != profile.discrete + profile.continuous) {
        return std::nullopt;
    }
    s.requiredActionCount = profile.total();
    return s;
}

} // namespace

Scenario generateScenario(std::uint64_t seed, const Profile& profile) {
    validateProfile(profile);
    Rng rng(seed, /*stream=*/0x5ce7a510);
    for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
        if (auto s = tryGenerate(rng, seed, profile)) {
            s->validate();
            return std::move(*s);
        }
    }
    throw Error(ErrorCode::InvalidProfile, "could not generate a scenario for this profile");
}

} // namespace handrem
