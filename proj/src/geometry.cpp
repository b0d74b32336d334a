#include "study360/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace study360 {

Vec3 to_unit_vector(const Direction& d) {
    const double yaw = d.yaw_deg * kDegToRad;
    const double pitch = d.pitch_deg * kDegToRad;
    const double cp = std::cos(pitch);
    return {cp * std::sin(yaw), std::sin(pitch), -cp * std::cos(yaw)};
}

Direction to_direction(const Vec3& v) {
    const double n = norm(v);
    if (n == 0.0) return {};
    const double fy = std::clamp(v.y / n, -1.0, 1.0);
    const double horizontal = std::hypot(v.x, v.z) / n;
    Direction d;
    d.pitch_deg = std::asin(fy) * kRadToDeg;
    if (horizontal < 1e-12) {
        d.pitch_deg = fy > 0.0 ? 90.0 : -90.0;
        d.yaw_deg = 0.0;
        return d;
    }
    d.yaw_deg = wrap_yaw_deg(std::atan2(v.x, -v.z) * kRadToDeg);
    return d;
}

double quat_norm(const Quat& q) {
    return std::sqrt(q.w * q.w + q.x * q.x + q.y * q.y + q.z * q.z);
}

Quat normalized(const Quat& q) {
    const double n = quat_norm(q);
    if (n == 0.0 || !std::isfinite(n)) throw std::invalid_argument("quaternion has zero or non-finite norm");
    return {q.w / n, q.x / n, q.y / n, q.z / n};
}

Quat conjugate(const Quat& q) { return {q.w, -q.x, -q.y, -q.z}; }

Quat multiply(const Quat& a, const Quat& b) {
    return {
        a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
        a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
        a.w * b.y - a.x * b.z + a.y * b.w + a.z * b.x,
        a.w * b.z + a.x * b.y - a.y * b.x + a.z * b.w,
    };
}

Vec3 rotate(const Quat& q, const Vec3& v) {
    const Quat p{0.0, v.x, v.y, v.z};
    const Quat r = multiply(multiply(q, p), conjugate(q));
    return {r.x, r.y, r.z};
}

Vec3 rotate_inverse(const Quat& q, const Vec3& v) { return rotate(conjugate(q), v); }

Quat direction_to_quat(const Direction& d) {
    // Yaw is a rotation of -yaw about +Y, applied after pitch about +X.
    const double half_yaw = -d.yaw_deg * kDegToRad * 0.5;
    const double half_pitch = d.pitch_deg * kDegToRad * 0.5;
    const Quat qy{std::cos(half_yaw), 0.0, std::sin(half_yaw), 0.0};
    const Quat qp{std::cos(half_pitch), std::sin(half_pitch), 0.0, 0.0};
    return multiply(qy, qp);
}

}  // namespace study360
