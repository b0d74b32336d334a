#include "doctest.h"
#include "support.hpp"

#include <bit>
#include <cstring>
#include <limits>

#include "study360/kernels.hpp"

using namespace study360;
namespace k = study360::kernels;

namespace {

template <class T>
bool same_bits(const std::vector<T>& a, const std::vector<T>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

struct QuatBatch {
    std::vector<double> w, x, y, z;
    explicit QuatBatch(std::size_t n) : w(n), x(n), y(n), z(n) {}
    k::QuatSoA soa() const { return {w, x, y, z}; }
};

QuatBatch random_quats(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> g;
    QuatBatch b(n);
    for (std::size_t i = 0; i < n; ++i) {
        Quat q{g(rng), g(rng), g(rng), g(rng)};
        q = normalized(q);
        b.w[i] = q.w;
        b.x[i] = q.x;
        b.y[i] = q.y;
        b.z[i] = q.z;
    }
    return b;
}

}  // namespace

TEST_CASE("backend selection") {
    INFO("active backend: " << k::to_string(k::active_backend()));
    const char* env = std::getenv("STUDY360_SIMD");
    if (env && std::string(env) == "scalar") CHECK(k::active_backend() == k::Backend::scalar);
    if (!k::avx2_available()) {
        CHECK(k::active_backend() == k::Backend::scalar);
        CHECK_THROWS_AS(k::set_backend(k::Backend::avx2), std::invalid_argument);
    }
    const k::Backend before = k::active_backend();
    k::set_backend(k::Backend::scalar);
    CHECK(k::active_backend() == k::Backend::scalar);
    k::set_backend(before);
}

TEST_CASE("scalar forward vectors match quaternion rotation") {
    std::mt19937_64 rng(5);
    const QuatBatch b = random_quats(rng, 1000);
    std::vector<double> fx(1000), fy(1000), fz(1000);
    k::scalar::forward_vectors(b.soa(), {fx, fy, fz});
    for (std::size_t i = 0; i < 1000; ++i) {
        const Vec3 want = rotate({b.w[i], b.x[i], b.y[i], b.z[i]}, {0.0, 0.0, -1.0});
        CHECK(std::abs(fx[i] - want.x) < 1e-12);
        CHECK(std::abs(fy[i] - want.y) < 1e-12);
        CHECK(std::abs(fz[i] - want.z) < 1e-12);
    }
}

TEST_CASE("scalar bins follow the documented formula") {
    const std::vector<double> yaw{-180.0, 0.0, 179.999, 180.0, -90.0, 0.0, std::numeric_limits<double>::quiet_NaN()};
    const std::vector<double> pitch{90.0, 0.0, -90.0, 0.0, 45.0, -200.0, 0.0};
    std::vector<std::int32_t> out(yaw.size());
    k::scalar::equirect_bins(yaw, pitch, 4, 2, out);
    CHECK(out[0] == 0);          // col 0, row 0
    CHECK(out[1] == 1 * 4 + 2);  // centre
    CHECK(out[2] == 1 * 4 + 3);  // bottom-right
    CHECK(out[3] == 1 * 4 + 3);  // yaw 180 clamps to the last column
    CHECK(out[4] == 0 * 4 + 1);
    CHECK(out[5] == 1 * 4 + 2);  // pitch out of range clamps
    CHECK(out[6] == 1 * 4 + 0);  // NaN yaw lands in column 0
}

TEST_CASE("avx2 kernels are bit-identical to scalar") {
    if (!k::avx2_available()) {
        MESSAGE("AVX2 not available; skipping");
        return;
    }
    std::mt19937_64 rng(6);
    for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 33u, 1000u, 4099u}) {
        CAPTURE(n);
        QuatBatch b = random_quats(rng, n);
        // Non-unit and extreme values must also agree.
        if (n > 2) {
            b.w[1] = 3.0;
            b.x[2] = -1e300;
        }
        std::vector<double> sx(n), sy(n), sz(n), vx(n), vy(n), vz(n);
        k::scalar::forward_vectors(b.soa(), {sx, sy, sz});
        k::avx2::forward_vectors(b.soa(), {vx, vy, vz});
        CHECK(same_bits(sx, vx));
        CHECK(same_bits(sy, vy));
        CHECK(same_bits(sz, vz));

        std::uniform_real_distribution<double> yawd(-200.0, 200.0), pitchd(-100.0, 100.0);
        std::vector<double> yaw(n), pitch(n);
        for (std::size_t i = 0; i < n; ++i) {
            yaw[i] = yawd(rng);
            pitch[i] = pitchd(rng);
        }
        if (n > 4) {
            yaw[3] = std::numeric_limits<double>::quiet_NaN();
            pitch[4] = std::numeric_limits<double>::infinity();
            yaw[0] = -180.0;
            pitch[0] = 90.0;
        }
        for (auto [cols, rows] : {std::pair{36, 18}, std::pair{8, 4}, std::pair{1, 1}, std::pair{3840, 1920}}) {
            std::vector<std::int32_t> s(n), v(n);
            k::scalar::equirect_bins(yaw, pitch, cols, rows, s);
            k::avx2::equirect_bins(yaw, pitch, cols, rows, v);
            CHECK(s == v);
        }

        std::uniform_real_distribution<float> amp(-1.0f, 1.0f);
        std::vector<float> l(n), r(n), sm(n), vm(n);
        for (std::size_t i = 0; i < n; ++i) {
            l[i] = amp(rng);
            r[i] = amp(rng);
        }
        if (n > 1) l[0] = std::numeric_limits<float>::quiet_NaN();
        k::scalar::downmix(l, r, sm);
        k::avx2::downmix(l, r, vm);
        CHECK(same_bits(sm, vm));
    }
}

TEST_CASE("dispatching entry points agree with scalar on the active backend") {
    std::mt19937_64 rng(7);
    const QuatBatch b = random_quats(rng, 257);
    std::vector<double> sx(257), sy(257), sz(257), dx(257), dy(257), dz(257);
    k::scalar::forward_vectors(b.soa(), {sx, sy, sz});
    k::forward_vectors(b.soa(), {dx, dy, dz});
    CHECK(same_bits(sx, dx));
    CHECK(same_bits(sz, dz));
    // Single-element helper matches the batch.
    double fx, fy, fz;
    k::forward_vector(b.w[10], b.x[10], b.y[10], b.z[10], fx, fy, fz);
    CHECK(std::bit_cast<std::uint64_t>(fx) == std::bit_cast<std::uint64_t>(sx[10]));
    CHECK(std::bit_cast<std::uint64_t>(fy) == std::bit_cast<std::uint64_t>(sy[10]));
}
