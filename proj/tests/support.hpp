#pragma once

// Reference computations written independently of the library internals,
// plus a tiny hand-built plant for control tests.

#include "handrem/kinematics.hpp"
#include "handrem/world.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <memory>
#include <random>
#include <vector>

namespace oracle {

using handrem::BasePose;
using handrem::Pose5;
using handrem::Scenario;
using handrem::ValveKind;

// Gauge value as the plain double sum over every valve.
inline double gaugeSum(const Scenario& s, const std::vector<double>& states, std::size_t g) {
    double total = 0.0;
    for (std::size_t v = 0; v < s.valves.size(); ++v) {
        total += s.contributions[g][v] * states[v];
    }
    return total;
}

// Fewest valve operations that put every gauge within tol of its target.
// Enumerates every subset of valves to touch: a touched discrete valve is
// flipped, a touched continuous valve may take any state in [0, 1]. Returns
// -1 when no subset works.
inline int minValveActions(const Scenario& s, double tol = 0.01) {
    const std::size_t n = s.valves.size();
    int best = -1;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        const int cost = std::popcount(mask);
        if (best >= 0 && cost >= best) {
            continue;
        }
        bool ok = true;
        for (std::size_t g = 0; g < s.gauges.size() && ok; ++g) {
            double fixed = 0.0;
            double span = 0.0;
            for (std::size_t v = 0; v < n; ++v) {
                const double c = s.contributions[g][v];
                const bool touched = (mask >> v) & 1u;
                const double state = s.initialStates[v];
                if (s.valves[v].kind == ValveKind::Discrete) {
                    fixed += c * (touched ? 1.0 - state : state);
                } else if (touched) {
                    span += c;
                } else {
                    fixed += c * state;
                }
            }
            const double t = s.gauges[g].target;
            ok = fixed - tol <= t && t <= fixed + span + tol;
        }
        if (ok) {
            best = cost;
        }
    }
    return best;
}

inline int requiredActions(const Scenario& s) {
    const int valves = minValveActions(s);
    if (valves < 0) {
        return -1;
    }
    return valves + static_cast<int>(std::count_if(s.pipes.begin(), s.pipes.end(),
                                                   [](const auto& p) { return p.mustCheck; }));
}

using Mat3 = std::array<std::array<double, 3>, 3>;

inline Mat3 rotZ(double a) {
    const double c = std::cos(a);
    const double s = std::sin(a);
    return {{{c, -s, 0.0}, {s, c, 0.0}, {0.0, 0.0, 1.0}}};
}

inline std::array<double, 3> mul(const Mat3& m, std::array<double, 3> v) {
    std::array<double, 3> r{};
    for (int i = 0; i < 3; ++i) {
        r[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
    }
    return r;
}

// World tip position by explicit rotation matrix.
inline std::array<double, 3> worldTip(const BasePose& b, const Pose5& t) {
    const auto r = mul(rotZ(b.heading), {t.x, t.y, t.z});
    return {r[0] + b.x, r[1] + b.y, r[2] + b.z};
}

// Angle between the tip ray and the forward axis from the dot product of
// explicitly built unit vectors.
inline double rayAngle(double yaw, double pitch) {
    const std::array<double, 3> ray{std::cos(pitch) * std::sin(yaw), std::sin(pitch), std::cos(pitch) * std::cos(yaw)};
    const double n = std::sqrt(ray[0] * ray[0] + ray[1] * ray[1] + ray[2] * ray[2]);
    return std::acos(std::clamp(ray[2] / n, -1.0, 1.0));
}

} // namespace oracle

namespace bench {

// Panel centre, where a session parks the base.
constexpr double cx = 0.8;
constexpr double cy = 0.45;

// One discrete valve d0 (feeds g1), one continuous valve c0 (feeds g0 with
// C = 1) and a horizontal pipe p0, all in front of a base at the panel centre.
inline std::shared_ptr<const handrem::Scenario> plant(double target = 0.6, double c0Start = 0.0) {
    using namespace handrem;
    Scenario s;
    s.seed = 7;
    s.profile = {1, 1, 1};
    s.valves = {{"d0", ValveKind::Discrete, {cx, cy}}, {"c0", ValveKind::Continuous, {cx + 0.05, cy}}};
    s.gauges = {{"g0", {0.5, 0.3}, target}, {"g1", {0.6, 0.3}, 0.3}};
    s.contributions = {{0.0, 1.0}, {0.3, 0.0}};
    s.pipes = {{"p0", {cx - 0.3, cy + 0.05}, {cx + 0.3, cy + 0.05}, true, true}};
    s.initialStates = {0.0, c0Start};
    s.requiredActionCount = 3;
    return std::make_shared<const Scenario>(s);
}

inline handrem::BasePose base() { return {cx, cy, -0.10, 0.0}; }

} // namespace bench
