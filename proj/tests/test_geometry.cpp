#include "doctest.h"
#include "support.hpp"

#include "study360/geometry.hpp"

using namespace study360;

TEST_CASE("wrap_yaw_deg maps into [-180, 180)") {
    CHECK(wrap_yaw_deg(0.0) == 0.0);
    CHECK(wrap_yaw_deg(180.0) == -180.0);
    CHECK(wrap_yaw_deg(-180.0) == -180.0);
    CHECK(wrap_yaw_deg(190.0) == doctest::Approx(-170.0).epsilon(1e-14));
    CHECK(wrap_yaw_deg(-190.0) == doctest::Approx(170.0).epsilon(1e-14));
    CHECK(wrap_yaw_deg(540.0) == -180.0);
    CHECK(wrap_yaw_deg(-540.0) == -180.0);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> any(-5000.0, 5000.0);
    for (int i = 0; i < 10000; ++i) {
        const double y = wrap_yaw_deg(any(rng));
        CHECK(y >= -180.0);
        CHECK(y < 180.0);
    }
}

TEST_CASE("unit vectors follow the right-handed, forward -Z convention") {
    const Vec3 f = to_unit_vector({0.0, 0.0});
    CHECK(f.x == doctest::Approx(0.0));
    CHECK(f.y == doctest::Approx(0.0));
    CHECK(f.z == doctest::Approx(-1.0));
    const Vec3 r = to_unit_vector({90.0, 0.0});
    CHECK(r.x == doctest::Approx(1.0));
    CHECK(r.z == doctest::Approx(0.0).epsilon(1e-15));
    const Vec3 up = to_unit_vector({0.0, 90.0});
    CHECK(up.y == doctest::Approx(1.0));
}

TEST_CASE("direction and vector conversions invert each other") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 10000; ++i) {
        Direction d = test::random_direction(rng);
        if (std::abs(d.pitch_deg) > 89.9) continue;
        const Direction back = to_direction(to_unit_vector(d));
        CHECK(std::abs(wrap_yaw_deg(back.yaw_deg - d.yaw_deg)) < 1e-9);
        CHECK(std::abs(back.pitch_deg - d.pitch_deg) < 1e-9);
    }
    CHECK(to_direction({0.0, 1.0, 0.0}) == Direction{0.0, 90.0});
    CHECK(to_direction({0.0, -1.0, 0.0}) == Direction{0.0, -90.0});
}

TEST_CASE("quaternion algebra") {
    const double h = std::sqrt(0.5);
    const Quat yaw_left{h, 0.0, h, 0.0};  // +90 degrees about +Y
    const Vec3 v = rotate(yaw_left, {0.0, 0.0, -1.0});
    CHECK(v.x == doctest::Approx(-1.0));
    CHECK(v.z == doctest::Approx(0.0).epsilon(1e-15));
    const Vec3 back = rotate_inverse(yaw_left, v);
    CHECK(back.z == doctest::Approx(-1.0));
    const Quat id = multiply(yaw_left, conjugate(yaw_left));
    CHECK(id.w == doctest::Approx(1.0));
    CHECK(quat_norm(normalized(Quat{2.0, 0.0, 0.0, 0.0})) == 1.0);
    CHECK_THROWS_AS(normalized(Quat{0.0, 0.0, 0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("direction_to_quat points the forward axis at the direction") {
    std::mt19937_64 rng(3);
    for (int i = 0; i < 5000; ++i) {
        const Direction d = test::random_direction(rng);
        const Quat q = direction_to_quat(d);
        CHECK(std::abs(quat_norm(q) - 1.0) < 1e-12);
        const Vec3 f = rotate(q, {0.0, 0.0, -1.0});
        const Vec3 want = to_unit_vector(d);
        CHECK(norm(add(f, scale(want, -1.0))) < 1e-12);
    }
}
