#pragma once

// Spherical geometry shared by every module.
//
// Frame: right-handed, +X right, +Y up, forward = -Z.
// yaw_deg = atan2(f.x, -f.z) in [-180, 180), positive toward +X.
// pitch_deg = asin(f.y) in [-90, 90], positive up.

#include <cmath>
#include <numbers>

namespace study360 {

inline constexpr double kDegToRad = std::numbers::pi / 180.0;
inline constexpr double kRadToDeg = 180.0 / std::numbers::pi;

struct Direction {
    double yaw_deg = 0.0;
    double pitch_deg = 0.0;

    friend bool operator==(const Direction&, const Direction&) = default;
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Vec3&, const Vec3&) = default;
};

/// Hamilton quaternion, scalar first.
struct Quat {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Quat&, const Quat&) = default;
};

/// Maps any angle into [-180, 180).
inline double wrap_yaw_deg(double deg) {
    double r = std::fmod(deg + 180.0, 360.0);
    if (r < 0.0) r += 360.0;
    r -= 180.0;
    // fmod can land exactly on +180 after the shift for inputs like -540 - eps.
    if (r >= 180.0) r -= 360.0;
    return r;
}

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }

inline Vec3 scale(const Vec3& v, double s) { return {v.x * s, v.y * s, v.z * s}; }

inline Vec3 add(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }

/// Unit vector for a direction.
Vec3 to_unit_vector(const Direction& d);

/// Inverse of to_unit_vector. Returns yaw 0 at the poles. Input need not be unit length.
Direction to_direction(const Vec3& v);

double quat_norm(const Quat& q);

/// Throws std::invalid_argument on a zero quaternion.
Quat normalized(const Quat& q);

Quat conjugate(const Quat& q);

Quat multiply(const Quat& a, const Quat& b);

/// v' = q v q^-1 for unit q.
Vec3 rotate(const Quat& q, const Vec3& v);

/// v' = q^-1 v q, i.e. world vector into the frame described by q.
Vec3 rotate_inverse(const Quat& q, const Vec3& v);

/// Head orientation with zero roll that looks along d.
Quat direction_to_quat(const Direction& d);

}  // namespace study360
