#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Geometry>
#include <cmath>

#include "poseret/geometry.hpp"
#include "poseret/rng.hpp"

using namespace poseret;

namespace {

Eigen::Matrix3d aa(const Eigen::Vector3d& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

Rotation random_rotation(Rng& rng) {
    Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
    if (axis.norm() < 1e-6) axis = Eigen::Vector3d::UnitX();
    return Rotation::axis_angle(axis, rng.uniform(-kPi, kPi));
}

} // namespace

TEST_CASE("wrap_two_pi and wrap_pi") {
    CHECK(wrap_two_pi(0.0) == doctest::Approx(0.0));
    CHECK(wrap_two_pi(2.0 * kPi) == doctest::Approx(0.0));
    CHECK(wrap_two_pi(-0.1) == doctest::Approx(2.0 * kPi - 0.1));
    CHECK(wrap_two_pi(7.0) == doctest::Approx(7.0 - 2.0 * kPi));
    CHECK(wrap_pi(kPi) == doctest::Approx(-kPi));
    CHECK(wrap_pi(-kPi) == doctest::Approx(-kPi));
    CHECK(wrap_pi(3.5) == doctest::Approx(3.5 - 2.0 * kPi));
    CHECK(wrap_pi(0.2) == doctest::Approx(0.2));
}

TEST_CASE("elementary rotations match axis-angle oracle") {
    Rng rng(11);
    for (int i = 0; i < 50; ++i) {
        double a = rng.uniform(-2.0 * kPi, 2.0 * kPi);
        CHECK((Rotation::rx(a).matrix() - aa(Eigen::Vector3d::UnitX(), a)).norm() < 1e-12);
        CHECK((Rotation::ry(a).matrix() - aa(Eigen::Vector3d::UnitY(), a)).norm() < 1e-12);
        CHECK((Rotation::rz(a).matrix() - aa(Eigen::Vector3d::UnitZ(), a)).norm() < 1e-12);
    }
}

TEST_CASE("axis_angle matches Eigen for arbitrary axes") {
    Rng rng(12);
    for (int i = 0; i < 50; ++i) {
        Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
        if (axis.norm() < 1e-3) axis = Eigen::Vector3d(1, 2, 3);
        double a = rng.uniform(-kPi, kPi);
        CHECK((Rotation::axis_angle(axis, a).matrix() - aa(axis, a)).norm() < 1e-12);
    }
    CHECK_THROWS_AS(Rotation::axis_angle(Eigen::Vector3d::Zero(), 1.0), Error);
}

TEST_CASE("from_matrix validates orthonormality") {
    CHECK(Rotation::from_matrix(Eigen::Matrix3d::Identity()).matrix().isApprox(Eigen::Matrix3d::Identity()));
    Eigen::Matrix3d scaled = 1.1 * Eigen::Matrix3d::Identity();
    CHECK_THROWS_AS(Rotation::from_matrix(scaled), Error);
    Eigen::Matrix3d reflect = Eigen::Matrix3d::Identity();
    reflect(2, 2) = -1.0;
    try {
        Rotation::from_matrix(reflect);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::DegenerateGeometry);
    }
}

TEST_CASE("viewpoint constructor wraps and validates") {
    Viewpoint v(2.0 * kPi + 0.25, 0.1, kPi + 0.5);
    CHECK(v.azimuth == doctest::Approx(0.25));
    CHECK(v.theta == doctest::Approx(0.5 - kPi));
    CHECK_THROWS_AS(Viewpoint(0.0, kPi / 2.0 + 1e-6, 0.0), Error);
    Viewpoint pole(0.0, kPi / 2.0, 0.0);
    CHECK(pole.elevation == doctest::Approx(kPi / 2.0));
}

TEST_CASE("dimensions invariants") {
    Dimensions d(0.5, 0.2, 1.0);
    CHECK(d.vec() == Eigen::Vector3d(0.5, 0.2, 1.0));
    CHECK_THROWS_AS(Dimensions(0.0, 0.5, 0.5), Error);
    CHECK_THROWS_AS(Dimensions(0.5, -0.1, 0.5), Error);
    CHECK_THROWS_AS(Dimensions(0.5, 0.5, 1.5), Error);
    try {
        Dimensions(0.0, 0.5, 0.5);
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::DegenerateDimensions);
    }
}

TEST_CASE("rotation_from_viewpoint composition") {
    CHECK((rotation_from_viewpoint({0, 0, 0}).matrix() - Eigen::Matrix3d::Identity()).norm() < 1e-12);

    Eigen::Vector3d flipped = rotation_from_viewpoint({kPi, 0, 0}) * Eigen::Vector3d(0, 0, 1);
    CHECK((flipped - Eigen::Vector3d(0, 0, -1)).norm() < 1e-12);

    Eigen::Matrix3d oracle = aa(Eigen::Vector3d::UnitZ(), 0.1) * aa(Eigen::Vector3d::UnitX(), 0.2) *
                             aa(Eigen::Vector3d::UnitY(), 0.3);
    CHECK((rotation_from_viewpoint({0.3, 0.2, 0.1}).matrix() - oracle).norm() < 1e-12);

    Rng rng(13);
    for (int i = 0; i < 100; ++i) {
        double az = rng.uniform(0.0, 2.0 * kPi);
        double el = rng.uniform(-kPi / 2.0, kPi / 2.0);
        double th = rng.uniform(-kPi, kPi);
        Eigen::Matrix3d m = aa(Eigen::Vector3d::UnitZ(), th) * aa(Eigen::Vector3d::UnitX(), el) *
                            aa(Eigen::Vector3d::UnitY(), az);
        CHECK((rotation_from_viewpoint({az, el, th}).matrix() - m).norm() < 1e-12);
    }
}

TEST_CASE("viewpoint round trip on canonical ranges") {
    Rng rng(14);
    for (int i = 0; i < 500; ++i) {
        Viewpoint v(rng.uniform(0.0, 2.0 * kPi), rng.uniform(-kPi / 2.0 + 1e-5, kPi / 2.0 - 1e-5),
                    rng.uniform(-kPi, kPi));
        Viewpoint back = viewpoint_from_rotation(rotation_from_viewpoint(v));
        CHECK(std::abs(wrap_pi(back.azimuth - v.azimuth)) < 1e-9);
        CHECK(std::abs(back.elevation - v.elevation) < 1e-9);
        CHECK(std::abs(wrap_pi(back.theta - v.theta)) < 1e-9);
    }
}

TEST_CASE("viewpoint extraction at the poles") {
    for (double sign : {1.0, -1.0}) {
        Viewpoint v(1.2, sign * kPi / 2.0, 0.7);
        Viewpoint back = viewpoint_from_rotation(rotation_from_viewpoint(v));
        CHECK(back.theta == 0.0);
        CHECK(std::abs(back.elevation - sign * kPi / 2.0) < 1e-9);
        Rotation again = rotation_from_viewpoint(back);
        CHECK(geodesic_distance(rotation_from_viewpoint(v), again) < 1e-9);
    }
}

TEST_CASE("geodesic_distance examples") {
    CHECK(geodesic_distance(Rotation::identity(), Rotation::identity()) == doctest::Approx(0.0));
    CHECK(geodesic_distance(Rotation::identity(), Rotation::rz(kPi / 6.0)) == doctest::Approx(kPi / 6.0));
    CHECK(geodesic_distance(Rotation::rz(0.4), Rotation::rz(2.9)) == doctest::Approx(2.5));
}

TEST_CASE("geodesic_distance matches quaternion angle oracle") {
    Rng rng(15);
    for (int i = 0; i < 200; ++i) {
        Rotation a = random_rotation(rng);
        Rotation b = random_rotation(rng);
        Eigen::Quaterniond qa(a.matrix()), qb(b.matrix());
        double dot = std::abs(qa.dot(qb));
        double oracle = 2.0 * std::acos(std::min(1.0, dot));
        CHECK(geodesic_distance(a, b) == doctest::Approx(oracle).epsilon(1e-9));
    }
}

TEST_CASE("geodesic_distance of axis-angle equals the angle") {
    Rng rng(16);
    for (int i = 0; i < 100; ++i) {
        Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
        if (axis.norm() < 1e-3) axis = Eigen::Vector3d::UnitZ();
        double th = rng.uniform(0.0, kPi);
        CHECK(geodesic_distance(Rotation::identity(), Rotation::axis_angle(axis, th)) ==
              doctest::Approx(th).epsilon(1e-9));
    }
}

TEST_CASE("geodesic_distance metric properties") {
    Rng rng(17);
    for (int i = 0; i < 1000; ++i) {
        Rotation a = random_rotation(rng);
        Rotation b = random_rotation(rng);
        Rotation c = random_rotation(rng);
        double ab = geodesic_distance(a, b);
        double ba = geodesic_distance(b, a);
        double ac = geodesic_distance(a, c);
        double cb = geodesic_distance(c, b);
        CHECK(std::abs(ab - ba) < 1e-9);
        CHECK(ab >= 0.0);
        CHECK(ab <= kPi + 1e-12);
        CHECK(ab <= ac + cb + 1e-9);
        CHECK(geodesic_distance(a, a) < 1e-9);
    }
}

TEST_CASE("bbox_corners canonical order") {
    BBox3D unit = bbox_corners(Dimensions(1, 1, 1));
    for (int i = 0; i < 8; ++i) {
        Eigen::Vector3d want(((i >> 0) & 1) ? 0.5 : -0.5, ((i >> 1) & 1) ? 0.5 : -0.5,
                             ((i >> 2) & 1) ? 0.5 : -0.5);
        CHECK((unit.corners[i] - want).norm() < 1e-15);
    }
    BBox3D b = bbox_corners(Dimensions(0.5, 0.2, 1.0));
    CHECK((b.corners[0] - Eigen::Vector3d(-0.25, -0.1, -0.5)).norm() < 1e-15);
    Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
    for (const auto& c : b.corners) centroid += c;
    CHECK(centroid.norm() < 1e-12);
}

TEST_CASE("project pinhole examples") {
    CameraIntrinsics k(100.0, 32.0, 32.0, 64, 64);
    Pose p;
    p.t = Eigen::Vector3d(0, 0, 5);
    CHECK((project(k, p, Eigen::Vector3d::Zero()) - Eigen::Vector2d(32, 32)).norm() < 1e-12);

    Pose q;
    q.t = Eigen::Vector3d(1, 0, 10);
    CHECK((project(k, q, Eigen::Vector3d::Zero()) - Eigen::Vector2d(42, 32)).norm() < 1e-12);

    Pose behind;
    behind.t = Eigen::Vector3d(0, 0, -1);
    CHECK_THROWS_AS(project(k, behind, Eigen::Vector3d::Zero()), Error);
    try {
        project(k, behind, Eigen::Vector3d::Zero());
    } catch (const Error& e) {
        CHECK(e.category() == ErrorCategory::BehindCamera);
    }
}

TEST_CASE("project scale consistency") {
    CameraIntrinsics k = CameraIntrinsics::default_for(64, 64);
    Rng rng(18);
    for (int i = 0; i < 100; ++i) {
        Pose p;
        p.r = random_rotation(rng);
        Eigen::Vector3d x(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        p.t = Eigen::Vector3d(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(3.0, 10.0));
        Eigen::Vector2d px = project(k, p, x);
        Pose doubled{p.r, 2.0 * p.t};
        Eigen::Vector2d px2 = project(k, doubled, 2.0 * x);
        CHECK((px - px2).norm() < 1e-9);
    }
}

TEST_CASE("normalize_projection and inverse") {
    CameraIntrinsics k = CameraIntrinsics::default_for(64, 64);
    CHECK((normalize_projection({0, 0}, k) - Eigen::Vector2d(0, 0)).norm() < 1e-15);
    CHECK((normalize_projection({32, 16}, k) - Eigen::Vector2d(0.5, 0.25)).norm() < 1e-15);
    CHECK((normalize_projection({64, 64}, k) - Eigen::Vector2d(1, 1)).norm() < 1e-15);
    CHECK((normalize_projection({-6.4, 70.4}, k) - Eigen::Vector2d(-0.1, 1.1)).norm() < 1e-12);
    Rng rng(19);
    for (int i = 0; i < 50; ++i) {
        Eigen::Vector2d uv(rng.uniform(-0.5, 1.5), rng.uniform(-0.5, 1.5));
        CHECK((normalize_projection(denormalize_projection(uv, k), k) - uv).norm() < 1e-12);
    }
}

TEST_CASE("default intrinsics") {
    CameraIntrinsics k = CameraIntrinsics::default_for(64, 48);
    CHECK(k.f == doctest::Approx(76.8));
    CHECK(k.cx == doctest::Approx(32.0));
    CHECK(k.cy == doctest::Approx(24.0));
    CHECK(k.w == 64);
    CHECK(k.h == 48);
    CHECK_THROWS_AS(CameraIntrinsics(0.0, 1.0, 1.0, 2, 2), Error);
    CHECK_THROWS_AS(CameraIntrinsics(1.0, 1.0, 1.0, 0, 2), Error);
}

TEST_CASE("sample_viewpoint stays in ranges") {
    ViewpointRanges ranges;
    Rng rng(20);
    for (int i = 0; i < 500; ++i) {
        Viewpoint v = sample_viewpoint(ranges, rng);
        CHECK(v.azimuth >= 0.0);
        CHECK(v.azimuth < 2.0 * kPi);
        CHECK(v.elevation >= ranges.el_lo);
        CHECK(v.elevation <= ranges.el_hi);
        CHECK(v.theta >= ranges.th_lo);
        CHECK(v.theta <= ranges.th_hi);
    }
}

TEST_CASE("error slugs") {
    CHECK(std::string(error_slug(ErrorCategory::DegenerateDimensions)) == "degenerate-dimensions");
    CHECK(std::string(error_slug(ErrorCategory::DegenerateGeometry)) == "degenerate-geometry");
    CHECK(std::string(error_slug(ErrorCategory::DegenerateMesh)) == "degenerate-mesh");
    CHECK(std::string(error_slug(ErrorCategory::BehindCamera)) == "behind-camera");
    CHECK(std::string(error_slug(ErrorCategory::Parse)) == "parse");
    CHECK(std::string(error_slug(ErrorCategory::Shape)) == "shape");
    CHECK(std::string(error_slug(ErrorCategory::Parameter)) == "parameter");
    CHECK(std::string(error_slug(ErrorCategory::EmptyInput)) == "empty-input");
    CHECK(std::string(error_slug(ErrorCategory::InsufficientNegatives)) == "insufficient-negatives");
    CHECK(std::string(error_slug(ErrorCategory::Configuration)) == "configuration");
    CHECK(std::string(error_slug(ErrorCategory::Io)) == "io");
    Error e(ErrorCategory::Parse, "bad token");
    CHECK(std::string(e.what()) == "parse: bad token");
}
