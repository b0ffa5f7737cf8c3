#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "smg/errors.hpp"

// Core 3D math: vectors, exponential-map rotations, oriented boxes and
// differentiable signed-distance queries against a scene made of boxes.
// World frame: Z is up, the ground plane is XOY, units are meters.

namespace smg {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Signed distance reported for queries against an empty scene.
inline constexpr double kFreeSpaceDistance = 1e9;

// Fixed gradient direction returned at singular points (e.g. box centers)
// where the SDF has no preferred direction.
inline const Vec3 kSingularGradient{0.0, 0.0, 1.0};

// ---------------------------------------------------------------------------
// Rotations (exponential map)
// ---------------------------------------------------------------------------

// Rotation matrix of an axis-angle vector r (angle = |r|, axis = r/|r|).
inline Mat3 rotation_matrix(const Vec3& r) {
    const double theta2 = r.squaredNorm();
    if (theta2 < 1e-16) {
        // R = I + [r]x + 0.5 [r]x^2, accurate to O(theta^4).
        Mat3 rx;
        rx << 0, -r.z(), r.y(), r.z(), 0, -r.x(), -r.y(), r.x(), 0;
        return Mat3::Identity() + rx + 0.5 * rx * rx;
    }
    const double theta = std::sqrt(theta2);
    return Eigen::AngleAxisd(theta, r / theta).toRotationMatrix();
}

// Axis-angle vector of a rotation matrix; returns angle in [0, pi].
inline Vec3 log_map(const Mat3& rot) {
    Eigen::AngleAxisd aa(rot);
    return aa.angle() * aa.axis();
}

// Right Jacobian of SO(3): exp((r + d)^) ~= exp(r^) exp((Jr(r) d)^).
// Used to differentiate world positions w.r.t. exp-map joint parameters.
inline Mat3 so3_right_jacobian(const Vec3& r) {
    Mat3 rx;
    rx << 0, -r.z(), r.y(), r.z(), 0, -r.x(), -r.y(), r.x(), 0;
    const double theta2 = r.squaredNorm();
    if (theta2 < 1e-12) {
        return Mat3::Identity() - 0.5 * rx + (1.0 / 6.0) * rx * rx;
    }
    const double theta = std::sqrt(theta2);
    const double c1 = (1.0 - std::cos(theta)) / theta2;
    const double c2 = (theta - std::sin(theta)) / (theta2 * theta);
    return Mat3::Identity() - c1 * rx + c2 * rx * rx;
}

inline Mat3 skew(const Vec3& v) {
    Mat3 m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

// ---------------------------------------------------------------------------
// Boxes and scenes
// ---------------------------------------------------------------------------

struct Aabb {
    Vec3 min{Vec3::Zero()};
    Vec3 max{Vec3::Zero()};

    bool contains(const Vec3& p) const {
        return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
    }
    // Largest per-axis excess outside the (inflated) bounds; <= 0 inside.
    double exceedance(const Vec3& p) const {
        const Vec3 lo = min - p;
        const Vec3 hi = p - max;
        return std::max(lo.maxCoeff(), hi.maxCoeff());
    }
};

// Box with arbitrary center, positive half-extents and a yaw about Z.
struct OrientedBox {
    Vec3 center{Vec3::Zero()};
    Vec3 half_extents{Vec3::Ones()};
    double yaw = 0.0;

    // World point expressed in the box frame.
    Vec3 to_local(const Vec3& p) const {
        const double c = std::cos(yaw), s = std::sin(yaw);
        const Vec3 d = p - center;
        return {c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z()};
    }
    Vec3 to_world_dir(const Vec3& v) const {
        const double c = std::cos(yaw), s = std::sin(yaw);
        return {c * v.x() - s * v.y(), s * v.x() + c * v.y(), v.z()};
    }
    double top() const { return center.z() + half_extents.z(); }
    double bottom() const { return center.z() - half_extents.z(); }

    // The four footprint corners on the XOY plane, counter-clockwise.
    std::array<Eigen::Vector2d, 4> footprint() const {
        const double c = std::cos(yaw), s = std::sin(yaw);
        const Eigen::Vector2d ex{c * half_extents.x(), s * half_extents.x()};
        const Eigen::Vector2d ey{-s * half_extents.y(), c * half_extents.y()};
        const Eigen::Vector2d o{center.x(), center.y()};
        return {o + ex + ey, o - ex + ey, o - ex - ey, o + ex - ey};
    }
};

// Immutable union of oriented boxes plus the world bounds; all queries are
// pure and safe to call concurrently.
struct SceneField {
    std::vector<OrientedBox> boxes;
    Aabb bounds;
};

// Exact signed distance from p to the surface of b; negative inside.
inline double box_sdf(const Vec3& p, const OrientedBox& b) {
    const Vec3 q = b.to_local(p);
    const Vec3 d = q.cwiseAbs() - b.half_extents;
    const Vec3 outside = d.cwiseMax(0.0);
    return outside.norm() + std::min(d.maxCoeff(), 0.0);
}

// Union SDF: min over boxes; kFreeSpaceDistance when the field is empty.
inline double scene_sdf(const Vec3& p, const SceneField& f) {
    double best = kFreeSpaceDistance;
    for (const auto& b : f.boxes) best = std::min(best, box_sdf(p, b));
    return best;
}

namespace detail {

// Analytic gradient of box_sdf where the SDF is smooth. Returns false at
// non-smooth points (interior face ties, medial planes), where the caller
// must fall back to finite differences.
inline bool box_sdf_grad_analytic(const Vec3& p, const OrientedBox& b, Vec3* grad) {
    constexpr double kTie = 1e-9;
    const Vec3 q = b.to_local(p);
    const Vec3 d = q.cwiseAbs() - b.half_extents;
    if ((d.array() > 0.0).any()) {
        // Outside: gradient points from the closest surface feature to p.
        const Vec3 outside = d.cwiseMax(0.0);
        const double norm = outside.norm();
        if (norm < kTie) return false;  // exactly on the surface
        Vec3 local;
        for (int i = 0; i < 3; ++i) {
            local[i] = d[i] > 0.0 ? (q[i] < 0.0 ? -outside[i] : outside[i]) / norm : 0.0;
        }
        *grad = b.to_world_dir(local);
        return true;
    }
    // Inside: gradient is the outward normal of the nearest face; ambiguous
    // when two faces tie or the point sits on a medial plane.
    int axis = 0;
    d.maxCoeff(&axis);
    for (int i = 0; i < 3; ++i) {
        if (i != axis && d[axis] - d[i] < kTie) return false;
    }
    if (std::abs(q[axis]) < kTie) return false;
    Vec3 local = Vec3::Zero();
    local[axis] = q[axis] > 0.0 ? 1.0 : -1.0;
    *grad = b.to_world_dir(local);
    return true;
}

inline Vec3 scene_sdf_grad_central(const Vec3& p, const SceneField& f) {
    constexpr double h = 1e-4;
    Vec3 g;
    for (int i = 0; i < 3; ++i) {
        Vec3 lo = p, hi = p;
        lo[i] -= h;
        hi[i] += h;
        g[i] = (scene_sdf(hi, f) - scene_sdf(lo, f)) / (2.0 * h);
    }
    return g;
}

}  // namespace detail

// Gradient of scene_sdf at p: analytic away from the medial axis, central
// differences (h = 1e-4 m) at non-smooth points, and kSingularGradient at
// exactly singular points (where even central differences vanish).
inline Vec3 scene_sdf_grad(const Vec3& p, const SceneField& f) {
    if (f.boxes.empty()) return Vec3::Zero();

    constexpr double kTie = 1e-9;
    double best = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    std::size_t best_idx = 0;
    for (std::size_t i = 0; i < f.boxes.size(); ++i) {
        const double s = box_sdf(p, f.boxes[i]);
        if (s < best) {
            second = best;
            best = s;
            best_idx = i;
        } else {
            second = std::min(second, s);
        }
    }
    Vec3 g;
    if (second - best > kTie && detail::box_sdf_grad_analytic(p, f.boxes[best_idx], &g)) {
        return g;
    }
    g = detail::scene_sdf_grad_central(p, f);
    if (g.norm() < 1e-6) return kSingularGradient;
    return g;
}

}  // namespace smg
