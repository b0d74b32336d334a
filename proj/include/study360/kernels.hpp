#pragma once

// Data-parallel inner loops behind gaze analytics and audio accessibility.
//
// Each kernel has a scalar reference in kernels::scalar and, on x86-64, an
// AVX2 twin in kernels::avx2. The dispatching entry points pick the AVX2
// version at runtime when the CPU supports it. Both variants perform the same
// IEEE operations in the same order (no FMA contraction) so their outputs are
// bit-identical; tests check this directly.
//
// All arrays are structure-of-arrays. Output spans must be at least as long
// as the inputs.

#include <cstdint>
#include <span>
#include <string_view>

namespace study360::kernels {

enum class Backend { scalar, avx2 };

std::string_view to_string(Backend b);

bool avx2_available();

/// Backend used by the dispatching functions below.
Backend active_backend();

/// Forces a backend. Throws std::invalid_argument when avx2 is requested on a
/// machine without it. Also settable with STUDY360_SIMD=scalar|avx2.
void set_backend(Backend b);

struct QuatSoA {
    std::span<const double> w, x, y, z;
};

struct Vec3SoA {
    std::span<double> x, y, z;
};

/// Head-forward unit vectors: each quaternion applied to (0, 0, -1).
void forward_vectors(QuatSoA q, Vec3SoA out);

/// Row-major heatmap bin index for each (yaw, pitch):
/// col = clamp(floor((yaw + 180) / 360 * cols), 0, cols - 1),
/// row = clamp(floor((90 - pitch) / 180 * rows), 0, rows - 1).
void equirect_bins(std::span<const double> yaw, std::span<const double> pitch, std::int32_t cols, std::int32_t rows,
                   std::span<std::int32_t> out);

/// out[i] = (left[i] + right[i]) * 0.5
void downmix(std::span<const float> left, std::span<const float> right, std::span<float> out);

namespace scalar {
void forward_vectors(QuatSoA q, Vec3SoA out);
void equirect_bins(std::span<const double> yaw, std::span<const double> pitch, std::int32_t cols, std::int32_t rows,
                   std::span<std::int32_t> out);
void downmix(std::span<const float> left, std::span<const float> right, std::span<float> out);
}  // namespace scalar

namespace avx2 {
// Only callable when avx2_available(); handles any tail length.
void forward_vectors(QuatSoA q, Vec3SoA out);
void equirect_bins(std::span<const double> yaw, std::span<const double> pitch, std::int32_t cols, std::int32_t rows,
                   std::span<std::int32_t> out);
void downmix(std::span<const float> left, std::span<const float> right, std::span<float> out);
}  // namespace avx2

// Single-element forms of the scalar kernels, shared by the per-sample APIs so
// that batch and single-sample results agree exactly.

inline void forward_vector(double w, double x, double y, double z, double& fx, double& fy, double& fz) {
    const double xz = x * z;
    const double wy = w * y;
    const double yz = y * z;
    const double wx = w * x;
    const double xx = x * x;
    const double yy = y * y;
    fx = -2.0 * (xz + wy);
    fy = -2.0 * (yz - wx);
    fz = -(1.0 - 2.0 * (xx + yy));
}

}  // namespace study360::kernels
