#include <cmath>

#include "study360/kernels.hpp"

namespace study360::kernels::scalar {

void forward_vectors(QuatSoA q, Vec3SoA out) {
    const std::size_t n = q.w.size();
    for (std::size_t i = 0; i < n; ++i) {
        forward_vector(q.w[i], q.x[i], q.y[i], q.z[i], out.x[i], out.y[i], out.z[i]);
    }
}

void equirect_bins(std::span<const double> yaw, std::span<const double> pitch, std::int32_t cols, std::int32_t rows,
                   std::span<std::int32_t> out) {
    const double c = static_cast<double>(cols);
    const double r = static_cast<double>(rows);
    const double max_col = c - 1.0;
    const double max_row = r - 1.0;
    for (std::size_t i = 0; i < yaw.size(); ++i) {
        double col = std::floor((yaw[i] + 180.0) / 360.0 * c);
        double row = std::floor((90.0 - pitch[i]) / 180.0 * r);
        // Same select semantics as _mm256_max_pd / _mm256_min_pd, NaN maps to 0.
        col = col > 0.0 ? col : 0.0;
        row = row > 0.0 ? row : 0.0;
        col = col < max_col ? col : max_col;
        row = row < max_row ? row : max_row;
        out[i] = static_cast<std::int32_t>(row) * cols + static_cast<std::int32_t>(col);
    }
}

void downmix(std::span<const float> left, std::span<const float> right, std::span<float> out) {
    for (std::size_t i = 0; i < left.size(); ++i) out[i] = (left[i] + right[i]) * 0.5f;
}

}  // namespace study360::kernels::scalar
