#include "study360/accessibility.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "study360/gaze.hpp"
#include "study360/kernels.hpp"

namespace study360 {

namespace {

Quat unit_or_identity(const Quat& q) {
    const double n = quat_norm(q);
    if (n == 0.0 || !std::isfinite(n)) return {};
    return {q.w / n, q.x / n, q.y / n, q.z / n};
}

}  // namespace

ArrowHint guidance_arrow(const Quat& pose, const Direction& target) {
    const Quat q = unit_or_identity(pose);
    const Vec3 local = rotate_inverse(q, to_unit_vector(target));
    ArrowHint hint;
    if (std::hypot(local.x, local.y) > 1e-12) {
        hint.screen_angle_deg = wrap_yaw_deg(std::atan2(local.y, local.x) * kRadToDeg);
    }
    hint.magnitude_deg = angular_distance(quat_to_direction(q), target);
    return hint;
}

double haptic_level(double angular_error_deg, double half_fov_deg) {
    if (!(half_fov_deg > 0.0 && half_fov_deg < 180.0)) {
        throw std::invalid_argument("half_fov_deg must be in (0, 180)");
    }
    const double err = std::clamp(angular_error_deg, 0.0, 180.0);
    if (err <= half_fov_deg) return 0.0;
    return (err - half_fov_deg) / (180.0 - half_fov_deg);
}

std::vector<float> downmix_mono(std::span<const float> left, std::span<const float> right) {
    if (left.size() != right.size()) throw std::invalid_argument("left and right channels differ in length");
    std::vector<float> out(left.size());
    kernels::downmix(left, right, out);
    return out;
}

StereoGains spatial_gains(const Quat& pose, const Direction& source, double base_gain) {
    const Vec3 local = rotate_inverse(unit_or_identity(pose), to_unit_vector(source));
    const double rel_yaw = to_direction(local).yaw_deg;
    const double pan = std::clamp(rel_yaw / 90.0, -1.0, 1.0);
    const double alpha = (pan + 1.0) * 45.0 * kDegToRad;
    return {std::cos(alpha) * base_gain, std::sin(alpha) * base_gain};
}

}  // namespace study360
