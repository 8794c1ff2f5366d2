#pragma once

#include <Eigen/Core>
#include <array>
#include <numbers>

#include "poseret/error.hpp"
#include "poseret/rng.hpp"

namespace poseret {

inline constexpr double kPi = std::numbers::pi;

/// Wrap into [0, 2*pi).
double wrap_two_pi(double a);
/// Wrap into [-pi, pi).
double wrap_pi(double a);

/// Proper rotation, kept orthonormal (R^T R = I and det R = +1, both to 1e-9).
class Rotation {
public:
    Rotation() : m_(Eigen::Matrix3d::Identity()) {}

    static Rotation identity() { return Rotation(); }
    /// Validates orthonormality and det = +1; throws degenerate-geometry otherwise.
    static Rotation from_matrix(const Eigen::Matrix3d& m);
    static Rotation rx(double angle);
    static Rotation ry(double angle);
    static Rotation rz(double angle);
    /// Rodrigues formula; axis need not be normalized (must be nonzero).
    static Rotation axis_angle(const Eigen::Vector3d& axis, double angle);

    const Eigen::Matrix3d& matrix() const { return m_; }
    Rotation transposed() const { return Rotation(Eigen::Matrix3d(m_.transpose()), unchecked{}); }

    friend Rotation operator*(const Rotation& a, const Rotation& b) {
        return Rotation(Eigen::Matrix3d(a.m_ * b.m_), unchecked{});
    }
    Eigen::Vector3d operator*(const Eigen::Vector3d& v) const { return m_ * v; }

private:
    struct unchecked {};
    Rotation(const Eigen::Matrix3d& m, unchecked) : m_(m) {}
    Eigen::Matrix3d m_;
};

/// Azimuth/elevation/in-plane angles in radians. Azimuth and theta are
/// wrapped into [0, 2*pi) and [-pi, pi); elevation outside [-pi/2, pi/2]
/// is rejected.
struct Viewpoint {
    double azimuth = 0.0;
    double elevation = 0.0;
    double theta = 0.0;

    Viewpoint() = default;
    Viewpoint(double az, double el, double th);
};

/// 3D bounding-box edge lengths, each in (0, 1].
struct Dimensions {
    double dx, dy, dz;

    Dimensions(double dx_, double dy_, double dz_);
    Eigen::Vector3d vec() const { return {dx, dy, dz}; }
    static Dimensions from_vec(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
};

/// Rigid transform from model space to camera space: x_cam = r * x + t.
struct Pose {
    Rotation r;
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
};

/// Pinhole camera; x right, y down, z forward, pixel origin at top-left.
struct CameraIntrinsics {
    double f;
    double cx, cy;
    int w, h;

    CameraIntrinsics(double f_, double cx_, double cy_, int w_, int h_);
    /// f = 1.2 * max(w, h), principal point at the image center.
    static CameraIntrinsics default_for(int w, int h);
};

/// Eight bounding-box corners in canonical order: bit k of the corner index
/// selects the sign of axis k (bit0 -> x, bit1 -> y, bit2 -> z; 0 = negative).
struct BBox3D {
    std::array<Eigen::Vector3d, 8> corners;
};

/// R = Rz(theta) * Rx(elevation) * Ry(azimuth).
Rotation rotation_from_viewpoint(const Viewpoint& v);

/// Inverse of rotation_from_viewpoint on the canonical ranges. At the
/// elevation poles (+-pi/2) theta is fixed to zero.
Viewpoint viewpoint_from_rotation(const Rotation& r);

/// Rotation angle of a^T b in [0, pi].
double geodesic_distance(const Rotation& a, const Rotation& b);

BBox3D bbox_corners(const Dimensions& d);

/// Pinhole projection of model-space point x; throws behind-camera if the
/// camera-frame depth is not positive.
Eigen::Vector2d project(const CameraIntrinsics& k, const Pose& p, const Eigen::Vector3d& x);

/// Map pixel coordinates to [0,1]^2 (values outside the window pass through).
Eigen::Vector2d normalize_projection(const Eigen::Vector2d& px, const CameraIntrinsics& k);
Eigen::Vector2d denormalize_projection(const Eigen::Vector2d& uv, const CameraIntrinsics& k);

/// Sampling ranges for the three viewpoint angles, radians.
struct ViewpointRanges {
    double az_lo = 0.0, az_hi = 2.0 * kPi;
    double el_lo = -kPi / 6.0, el_hi = kPi / 3.0;
    double th_lo = -kPi / 6.0, th_hi = kPi / 6.0;
};

Viewpoint sample_viewpoint(const ViewpointRanges& ranges, Rng& rng);

} // namespace poseret
