// Compiled with -mavx2 (no -mfma). Only reached through the runtime dispatch.

#include <immintrin.h>

#include "study360/kernels.hpp"

namespace study360::kernels::avx2 {

void forward_vectors(QuatSoA q, Vec3SoA out) {
    const std::size_t n = q.w.size();
    const __m256d neg_two = _mm256_set1_pd(-2.0);
    const __m256d two = _mm256_set1_pd(2.0);
    const __m256d one = _mm256_set1_pd(1.0);
    const __m256d sign = _mm256_set1_pd(-0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d w = _mm256_loadu_pd(q.w.data() + i);
        const __m256d x = _mm256_loadu_pd(q.x.data() + i);
        const __m256d y = _mm256_loadu_pd(q.y.data() + i);
        const __m256d z = _mm256_loadu_pd(q.z.data() + i);
        const __m256d xz = _mm256_mul_pd(x, z);
        const __m256d wy = _mm256_mul_pd(w, y);
        const __m256d yz = _mm256_mul_pd(y, z);
        const __m256d wx = _mm256_mul_pd(w, x);
        const __m256d xx = _mm256_mul_pd(x, x);
        const __m256d yy = _mm256_mul_pd(y, y);
        const __m256d fx = _mm256_mul_pd(neg_two, _mm256_add_pd(xz, wy));
        const __m256d fy = _mm256_mul_pd(neg_two, _mm256_sub_pd(yz, wx));
        const __m256d fz = _mm256_xor_pd(sign, _mm256_sub_pd(one, _mm256_mul_pd(two, _mm256_add_pd(xx, yy))));
        _mm256_storeu_pd(out.x.data() + i, fx);
        _mm256_storeu_pd(out.y.data() + i, fy);
        _mm256_storeu_pd(out.z.data() + i, fz);
    }
    for (; i < n; ++i) forward_vector(q.w[i], q.x[i], q.y[i], q.z[i], out.x[i], out.y[i], out.z[i]);
}

void equirect_bins(std::span<const double> yaw, std::span<const double> pitch, std::int32_t cols, std::int32_t rows,
                   std::span<std::int32_t> out) {
    const std::size_t n = yaw.size();
    const __m256d c = _mm256_set1_pd(static_cast<double>(cols));
    const __m256d r = _mm256_set1_pd(static_cast<double>(rows));
    const __m256d max_col = _mm256_set1_pd(static_cast<double>(cols) - 1.0);
    const __m256d max_row = _mm256_set1_pd(static_cast<double>(rows) - 1.0);
    const __m256d zero = _mm256_setzero_pd();
    const __m256d k180 = _mm256_set1_pd(180.0);
    const __m256d k360 = _mm256_set1_pd(360.0);
    const __m256d k90 = _mm256_set1_pd(90.0);
    const __m128i vcols = _mm_set1_epi32(cols);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d y = _mm256_loadu_pd(yaw.data() + i);
        const __m256d p = _mm256_loadu_pd(pitch.data() + i);
        __m256d col = _mm256_floor_pd(_mm256_mul_pd(_mm256_div_pd(_mm256_add_pd(y, k180), k360), c));
        __m256d row = _mm256_floor_pd(_mm256_mul_pd(_mm256_div_pd(_mm256_sub_pd(k90, p), k180), r));
        col = _mm256_min_pd(_mm256_max_pd(col, zero), max_col);
        row = _mm256_min_pd(_mm256_max_pd(row, zero), max_row);
        const __m128i icol = _mm256_cvttpd_epi32(col);
        const __m128i irow = _mm256_cvttpd_epi32(row);
        const __m128i idx = _mm_add_epi32(_mm_mullo_epi32(irow, vcols), icol);
        _mm_storeu_si128(reinterpret_cast<__m128i*>(out.data() + i), idx);
    }
    if (i < n) scalar::equirect_bins(yaw.subspan(i), pitch.subspan(i), cols, rows, out.subspan(i));
}

void downmix(std::span<const float> left, std::span<const float> right, std::span<float> out) {
    const std::size_t n = left.size();
    const __m256 half = _mm256_set1_ps(0.5f);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 sum = _mm256_add_ps(_mm256_loadu_ps(left.data() + i), _mm256_loadu_ps(right.data() + i));
        _mm256_storeu_ps(out.data() + i, _mm256_mul_ps(sum, half));
    }
    for (; i < n; ++i) out[i] = (left[i] + right[i]) * 0.5f;
}

}  // namespace study360::kernels::avx2
