#include "poseret/geometry.hpp"

#include <Eigen/LU>
#include <algorithm>
#include <cmath>

namespace poseret {

const char* error_slug(ErrorCategory c) {
    switch (c) {
        case ErrorCategory::DegenerateDimensions: return "degenerate-dimensions";
        case ErrorCategory::DegenerateGeometry: return "degenerate-geometry";
        case ErrorCategory::DegenerateMesh: return "degenerate-mesh";
        case ErrorCategory::BehindCamera: return "behind-camera";
        case ErrorCategory::Parse: return "parse";
        case ErrorCategory::Shape: return "shape";
        case ErrorCategory::Parameter: return "parameter";
        case ErrorCategory::EmptyInput: return "empty-input";
        case ErrorCategory::InsufficientNegatives: return "insufficient-negatives";
        case ErrorCategory::Configuration: return "configuration";
        case ErrorCategory::Io: return "io";
    }
    return "unknown";
}

double wrap_two_pi(double a) {
    double r = std::fmod(a, 2.0 * kPi);
    if (r < 0.0) r += 2.0 * kPi;
    return r;
}

double wrap_pi(double a) {
    double r = wrap_two_pi(a + kPi) - kPi;
    return r >= kPi ? r - 2.0 * kPi : r;
}

Rotation Rotation::from_matrix(const Eigen::Matrix3d& m) {
    const double ortho = (m.transpose() * m - Eigen::Matrix3d::Identity()).norm();
    if (ortho > 1e-9)
        fail(ErrorCategory::DegenerateGeometry, "matrix is not orthonormal");
    if (std::abs(m.determinant() - 1.0) > 1e-9)
        fail(ErrorCategory::DegenerateGeometry, "matrix determinant is not +1");
    return Rotation(m, unchecked{});
}

Rotation Rotation::rx(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Eigen::Matrix3d m;
    m << 1, 0, 0,
         0, c, -s,
         0, s, c;
    return Rotation(m, unchecked{});
}

Rotation Rotation::ry(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Eigen::Matrix3d m;
    m << c, 0, s,
         0, 1, 0,
         -s, 0, c;
    return Rotation(m, unchecked{});
}

Rotation Rotation::rz(double a) {
    const double c = std::cos(a), s = std::sin(a);
    Eigen::Matrix3d m;
    m << c, -s, 0,
         s, c, 0,
         0, 0, 1;
    return Rotation(m, unchecked{});
}

Rotation Rotation::axis_angle(const Eigen::Vector3d& axis, double angle) {
    const double n = axis.norm();
    if (n <= 0.0) fail(ErrorCategory::Parameter, "axis-angle axis must be nonzero");
    const Eigen::Vector3d u = axis / n;
    Eigen::Matrix3d k;
    k << 0, -u.z(), u.y(),
         u.z(), 0, -u.x(),
         -u.y(), u.x(), 0;
    const Eigen::Matrix3d m = Eigen::Matrix3d::Identity() + std::sin(angle) * k +
                              (1.0 - std::cos(angle)) * (k * k);
    return Rotation(m, unchecked{});
}

Viewpoint::Viewpoint(double az, double el, double th) {
    if (el < -kPi / 2.0 - 1e-12 || el > kPi / 2.0 + 1e-12)
        fail(ErrorCategory::Parameter, "elevation outside [-pi/2, pi/2]");
    azimuth = wrap_two_pi(az);
    elevation = std::clamp(el, -kPi / 2.0, kPi / 2.0);
    theta = wrap_pi(th);
}

Dimensions::Dimensions(double dx_, double dy_, double dz_) : dx(dx_), dy(dy_), dz(dz_) {
    if (!(dx > 0.0) || !(dy > 0.0) || !(dz > 0.0))
        fail(ErrorCategory::DegenerateDimensions, "dimensions must be strictly positive");
    if (dx > 1.0 || dy > 1.0 || dz > 1.0)
        fail(ErrorCategory::DegenerateDimensions, "dimensions must be <= 1");
}

CameraIntrinsics::CameraIntrinsics(double f_, double cx_, double cy_, int w_, int h_)
    : f(f_), cx(cx_), cy(cy_), w(w_), h(h_) {
    if (!(f > 0.0)) fail(ErrorCategory::Parameter, "focal length must be positive");
    if (w <= 0 || h <= 0) fail(ErrorCategory::Parameter, "image size must be positive");
}

CameraIntrinsics CameraIntrinsics::default_for(int w, int h) {
    return CameraIntrinsics(1.2 * std::max(w, h), 0.5 * w, 0.5 * h, w, h);
}

Rotation rotation_from_viewpoint(const Viewpoint& v) {
    return Rotation::rz(v.theta) * Rotation::rx(v.elevation) * Rotation::ry(v.azimuth);
}

Viewpoint viewpoint_from_rotation(const Rotation& r) {
    // Layout of Rz(t)*Rx(e)*Ry(a): row 2 = (-cos e sin a, sin e, cos e cos a),
    // column 1 = (-sin t cos e, cos t cos e, sin e).
    const Eigen::Matrix3d& m = r.matrix();
    const double se = std::clamp(m(2, 1), -1.0, 1.0);
    const double el = std::asin(se);
    if (std::abs(se) > 1.0 - 1e-12) {
        // Pole: azimuth and theta are coupled; attribute everything to azimuth.
        const double az = std::atan2(m(0, 2), m(0, 0));
        return Viewpoint(az, el, 0.0);
    }
    const double az = std::atan2(-m(2, 0), m(2, 2));
    const double th = std::atan2(-m(0, 1), m(1, 1));
    return Viewpoint(az, el, th);
}

double geodesic_distance(const Rotation& a, const Rotation& b) {
    // atan2 form of acos((tr-1)/2); acos alone loses half the digits near 0.
    const Eigen::Matrix3d r = a.matrix().transpose() * b.matrix();
    const double c = std::clamp(0.5 * (r.trace() - 1.0), -1.0, 1.0);
    const double s = (r - r.transpose()).norm() / (2.0 * std::sqrt(2.0));
    return std::atan2(s, c);
}

BBox3D bbox_corners(const Dimensions& d) {
    BBox3D box;
    const Eigen::Vector3d half = 0.5 * d.vec();
    for (int k = 0; k < 8; ++k) {
        box.corners[k] = Eigen::Vector3d((k & 1) ? half.x() : -half.x(),
                                         (k & 2) ? half.y() : -half.y(),
                                         (k & 4) ? half.z() : -half.z());
    }
    return box;
}

Eigen::Vector2d project(const CameraIntrinsics& k, const Pose& p, const Eigen::Vector3d& x) {
    const Eigen::Vector3d q = p.r * x + p.t;
    if (!(q.z() > 0.0)) fail(ErrorCategory::BehindCamera, "point has nonpositive depth");
    return {k.f * q.x() / q.z() + k.cx, k.f * q.y() / q.z() + k.cy};
}

Eigen::Vector2d normalize_projection(const Eigen::Vector2d& px, const CameraIntrinsics& k) {
    return {px.x() / k.w, px.y() / k.h};
}

Eigen::Vector2d denormalize_projection(const Eigen::Vector2d& uv, const CameraIntrinsics& k) {
    return {uv.x() * k.w, uv.y() * k.h};
}

Viewpoint sample_viewpoint(const ViewpointRanges& ranges, Rng& rng) {
    const double az = rng.uniform(ranges.az_lo, ranges.az_hi);
    const double el = rng.uniform(ranges.el_lo, ranges.el_hi);
    const double th = rng.uniform(ranges.th_lo, ranges.th_hi);
    return Viewpoint(az, el, th);
}

} // namespace poseret
