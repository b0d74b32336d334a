#pragma once

// Attention guidance and audio accessibility: on-screen arrows, controller
// rumble level, mono downmix and constant-power stereo panning.

#include <span>
#include <vector>

#include "study360/geometry.hpp"

namespace study360 {

struct ArrowHint {
    double screen_angle_deg = 0.0;  // [-180, 180), 0 = screen right, 90 = screen up
    double magnitude_deg = 0.0;     // angular distance from gaze to target
};

struct StereoGains {
    double left = 0.0;
    double right = 0.0;
};

/// Arrow that points from the current view toward `target`. A target exactly
/// behind the viewer yields screen angle 0.
ArrowHint guidance_arrow(const Quat& pose, const Direction& target);

/// 0 while the target is within half_fov_deg, then a linear ramp reaching 1 at
/// 180 degrees. Throws std::invalid_argument for half_fov outside (0, 180).
double haptic_level(double angular_error_deg, double half_fov_deg);

/// (l + r) / 2 per sample. Throws std::invalid_argument on length mismatch.
std::vector<float> downmix_mono(std::span<const float> left, std::span<const float> right);

/// Constant-power sine/cosine pan of `source` relative to the head, scaled by
/// base_gain. Elevation is ignored.
StereoGains spatial_gains(const Quat& pose, const Direction& source, double base_gain);

}  // namespace study360
