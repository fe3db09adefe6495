#pragma once

// Frame algebra for the handheld robot.
//
// Tip-local frame: origin at the home point (centre of the tip workspace),
// +z points forward out of the robot towards the work surface, +x to the
// right, +y up. Yaw swings the tip ray towards +x, pitch towards +y.
//
// World frame: X and Y span the panel plane, Z is the panel normal. The robot
// base translates in the panel plane and its heading is a rotation about Z.

#include <array>
#include <cmath>
#include <numbers>
#include <optional>

namespace handrem {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(const Vec2&, const Vec2&) = default;

    [[nodiscard]] double dot(Vec2 o) const { return x * o.x + y * o.y; }
    [[nodiscard]] double norm() const { return std::hypot(x, y); }
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
    friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
    friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
    friend bool operator==(const Vec3&, const Vec3&) = default;

    [[nodiscard]] double dot(Vec3 o) const { return x * o.x + y * o.y + z * o.z; }
    [[nodiscard]] double norm() const { return std::sqrt(dot(*this)); }
};

/// Tooltip or wand pose: three translations (metres) and two rotations
/// (radians). There is no roll; the tooltip is a pointing/contact tool.
struct Pose5 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double yaw = 0.0;
    double pitch = 0.0;

    [[nodiscard]] Vec3 position() const { return {x, y, z}; }
    [[nodiscard]] std::array<double, 5> components() const { return {x, y, z, yaw, pitch}; }
    [[nodiscard]] static Pose5 fromComponents(const std::array<double, 5>& c) {
        return {c[0], c[1], c[2], c[3], c[4]};
    }
    friend bool operator==(const Pose5&, const Pose5&) = default;
};

/// Pose of the carried robot handle in the world frame.
struct BasePose {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double heading = 0.0;

    friend bool operator==(const BasePose&, const BasePose&) = default;
};

struct Range {
    double min = 0.0;
    double max = 0.0;

    [[nodiscard]] double clip(double v) const { return v < min ? min : (v > max ? max : v); }
    [[nodiscard]] bool contains(double v) const { return v >= min && v <= max; }
    [[nodiscard]] double centre() const { return 0.5 * (min + max); }
    friend bool operator==(const Range&, const Range&) = default;
};

struct WorkspaceLimits {
    Range x{-0.15, 0.15};
    Range y{-0.10, 0.10};
    Range z{-0.125, 0.125};
    Range yaw{-std::numbers::pi / 3.0, std::numbers::pi / 3.0};
    Range pitch{-std::numbers::pi / 4.0, std::numbers::pi / 4.0};

    [[nodiscard]] std::array<Range, 5> ranges() const { return {x, y, z, yaw, pitch}; }

    /// min <= max per component, finite bounds, home pose strictly inside.
    [[nodiscard]] bool valid() const;
    /// Throws Error(InvalidLimits) when !valid().
    void validate() const;

    [[nodiscard]] bool contains(const Pose5& p) const;

    friend bool operator==(const WorkspaceLimits&, const WorkspaceLimits&) = default;
};

enum class Posture { Home, Crouch };

/// HOME is the zero pose (the workspace centre is the frame origin).
/// CROUCH tucks the tip 2 cm in front of the rear workspace bound and
/// pitches it 45 degrees down.
[[nodiscard]] Pose5 posture(Posture which, const WorkspaceLimits& lim = {});

[[nodiscard]] bool isFinite(const Pose5& p) noexcept;
[[nodiscard]] bool isFinite(const BasePose& b) noexcept;

/// Wrap an angle into [-pi, pi].
[[nodiscard]] double wrapAngle(double a) noexcept;

/// Component-wise clip into the workspace. Throws InvalidPose on non-finite input.
[[nodiscard]] Pose5 clamp(const Pose5& p, const WorkspaceLimits& lim);

/// Wand pose relative to its socket, replicated 1:1 by the tip and clamped.
[[nodiscard]] Pose5 retarget(const Pose5& wand, const WorkspaceLimits& lim);

/// World-frame tip pose for a tip-local pose carried by `base`.
[[nodiscard]] Pose5 compose(const BasePose& base, const Pose5& tipLocal);

/// Inverse of compose: tip-local pose for a world-frame tip pose.
[[nodiscard]] Pose5 decompose(const BasePose& base, const Pose5& tipWorld);

/// World position of a tip-local point.
[[nodiscard]] Vec3 toWorld(const BasePose& base, Vec3 local);
/// Tip-local position of a world point.
[[nodiscard]] Vec3 toLocal(const BasePose& base, Vec3 world);

/// Rotate a planar vector by `angle` about the frame normal.
[[nodiscard]] Vec2 rotate(Vec2 v, double angle);

struct Deflection {
    double angle = 0.0;
    /// Unit lateral direction (x right, y up in the tip frame); empty when
    /// the tip ray is on the neutral axis.
    std::optional<Vec2> direction;
};

/// Great-circle angle between the tip ray and the neutral forward axis, plus
/// the lateral direction of the offset.
[[nodiscard]] Deflection deflection(const Pose5& tipLocal);

/// Unit ray of the tip in its own frame.
[[nodiscard]] Vec3 tipRay(const Pose5& tipLocal);

} // namespace handrem
