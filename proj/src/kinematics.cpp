#include "handrem/kinematics.hpp"

#include "handrem/error.hpp"

#include <string>

namespace handrem {

namespace {

constexpr double kPi = std::numbers::pi;

void requireFinite(const Pose5& p) {
    if (!isFinite(p)) {
        throw Error(ErrorCode::InvalidPose, "pose has a non-finite component");
    }
}

} // namespace

bool WorkspaceLimits::valid() const {
    for (const auto& r : ranges()) {
        if (!std::isfinite(r.min) || !std::isfinite(r.max) || r.min > r.max) {
            return false;
        }
        // home (zero) strictly inside
        if (!(r.min < 0.0 && 0.0 < r.max)) {
            return false;
        }
    }
    return yaw.min >= -kPi && yaw.max <= kPi && pitch.min >= -kPi / 2 && pitch.max <= kPi / 2;
}

void WorkspaceLimits::validate() const {
    if (!valid()) {
        throw Error(ErrorCode::InvalidLimits,
                    "each range needs finite min < 0 < max, yaw within [-pi, pi], pitch within [-pi/2, pi/2]");
    }
}

bool WorkspaceLimits::contains(const Pose5& p) const {
    const auto c = p.components();
    const auto r = ranges();
    for (std::size_t i = 0; i < c.size(); ++i) {
        if (!r[i].contains(c[i])) {
            return false;
        }
    }
    return true;
}

Pose5 posture(Posture which, const WorkspaceLimits& lim) {
    switch (which) {
    case Posture::Home:
        return {};
    case Posture::Crouch:
        return clamp(Pose5{0.0, 0.0, lim.z.min + 0.02, 0.0, -kPi / 4.0}, lim);
    }
    return {};
}

bool isFinite(const Pose5& p) noexcept {
    return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) && std::isfinite(p.yaw) &&
           std::isfinite(p.pitch);
}

bool isFinite(const BasePose& b) noexcept {
    return std::isfinite(b.x) && std::isfinite(b.y) && std::isfinite(b.z) && std::isfinite(b.heading);
}

double wrapAngle(double a) noexcept {
    if (a >= -kPi && a <= kPi) {
        return a;
    }
    double w = std::remainder(a, 2.0 * kPi);
    // remainder lands in [-pi, pi]; keep +pi rather than -pi for odd multiples
    if (w < -kPi) {
        w += 2.0 * kPi;
    }
    return w;
}

Pose5 clamp(const Pose5& p, const WorkspaceLimits& lim) {
    requireFinite(p);
    return {lim.x.clip(p.x), lim.y.clip(p.y), lim.z.clip(p.z), lim.yaw.clip(p.yaw), lim.pitch.clip(p.pitch)};
}

Pose5 retarget(const Pose5& wand, const WorkspaceLimits& lim) {
    return clamp(wand, lim);
}

Vec2 rotate(Vec2 v, double angle) {
    const double c = std::cos(angle);
    const double s = std::sin(angle);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}

Vec3 toWorld(const BasePose& base, Vec3 local) {
    const Vec2 r = rotate({local.x, local.y}, base.heading);
    return {base.x + r.x, base.y + r.y, base.z + local.z};
}

Vec3 toLocal(const BasePose& base, Vec3 world) {
    const Vec2 r = rotate({world.x - base.x, world.y - base.y}, -base.heading);
    return {r.x, r.y, world.z - base.z};
}

Pose5 compose(const BasePose& base, const Pose5& tipLocal) {
    requireFinite(tipLocal);
    if (!isFinite(base)) {
        throw Error(ErrorCode::InvalidPose, "base pose has a non-finite component");
    }
    const Vec3 w = toWorld(base, tipLocal.position());
    return {w.x, w.y, w.z, wrapAngle(base.heading + tipLocal.yaw), tipLocal.pitch};
}

Pose5 decompose(const BasePose& base, const Pose5& tipWorld) {
    requireFinite(tipWorld);
    if (!isFinite(base)) {
        throw Error(ErrorCode::InvalidPose, "base pose has a non-finite component");
    }
    const Vec3 l = toLocal(base, tipWorld.position());
    return {l.x, l.y, l.z, wrapAngle(tipWorld.yaw - base.heading), tipWorld.pitch};
}

Vec3 tipRay(const Pose5& tipLocal) {
    const double cp = std::cos(tipLocal.pitch);
    return {cp * std::sin(tipLocal.yaw), std::sin(tipLocal.pitch), cp * std::cos(tipLocal.yaw)};
}

Deflection deflection(const Pose5& tipLocal) {
    const Vec3 ray = tipRay(tipLocal);
    Deflection d;
    // atan2 of lateral vs forward is the same great-circle angle as acos(ray.z)
    // but stays accurate near zero.
    const double lateral = std::hypot(ray.x, ray.y);
    d.angle = std::atan2(lateral, ray.z);
    if (lateral > 1e-12) {
        d.direction = Vec2{ray.x / lateral, ray.y / lateral};
    }
    return d;
}

} // namespace handrem
