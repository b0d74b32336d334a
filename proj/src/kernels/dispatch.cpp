#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "study360/kernels.hpp"

namespace study360::kernels {

namespace {

bool detect_avx2() {
#if defined(STUDY360_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

Backend initial_backend() {
    const bool have = detect_avx2();
    if (const char* env = std::getenv("STUDY360_SIMD")) {
        const std::string v(env);
        if (v == "scalar") return Backend::scalar;
        if (v == "avx2" && have) return Backend::avx2;
    }
    return have ? Backend::avx2 : Backend::scalar;
}

std::atomic<Backend>& backend_slot() {
    static std::atomic<Backend> slot{initial_backend()};
    return slot;
}

bool use_avx2() {
#if defined(STUDY360_HAVE_AVX2)
    return backend_slot().load(std::memory_order_relaxed) == Backend::avx2;
#else
    return false;
#endif
}

}  // namespace

std::string_view to_string(Backend b) { return b == Backend::avx2 ? "avx2" : "scalar"; }

bool avx2_available() { return detect_avx2(); }

Backend active_backend() { return backend_slot().load(); }

void set_backend(Backend b) {
    if (b == Backend::avx2 && !avx2_available()) throw std::invalid_argument("AVX2 is not available on this CPU");
    backend_slot().store(b);
}

#if defined(STUDY360_HAVE_AVX2)
#define STUDY360_DISPATCH(fn, ...) (use_avx2() ? avx2::fn(__VA_ARGS__) : scalar::fn(__VA_ARGS__))
#else
#define STUDY360_DISPATCH(fn, ...) scalar::fn(__VA_ARGS__)
#endif

void forward_vectors(QuatSoA q, Vec3SoA out) { STUDY360_DISPATCH(forward_vectors, q, out); }

void equirect_bins(std::span<const double> yaw, std::span<const double> pitch, std::int32_t cols, std::int32_t rows,
                   std::span<std::int32_t> out) {
    STUDY360_DISPATCH(equirect_bins, yaw, pitch, cols, rows, out);
}

void downmix(std::span<const float> left, std::span<const float> right, std::span<float> out) {
    STUDY360_DISPATCH(downmix, left, right, out);
}

}  // namespace study360::kernels
