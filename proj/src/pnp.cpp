#include "poseret/pnp.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

#include "poseret/error.hpp"

namespace poseret {

namespace {

constexpr int kMaxIterations = 100;
constexpr double kStepTol = 1e-10;
constexpr double kRelCostTol = 1e-12;

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
    Eigen::Matrix3d m;
    m << 0, -v.z(), v.y(),
         v.z(), 0, -v.x(),
         -v.y(), v.x(), 0;
    return m;
}

double cost_of(const Pose& p, const Correspondences& c, const CameraIntrinsics& k) {
    const Eigen::Matrix3d R = p.r.matrix();
    double cost = 0.0;
    for (int i = 0; i < 8; ++i) {
        const Eigen::Vector3d q = R * c.pts3d[i] + p.t;
        const Eigen::Vector2d px(k.f * q.x() / q.z() + k.cx, k.f * q.y() / q.z() + k.cy);
        cost += (px - c.pts2d[i]).squaredNorm();
    }
    return cost;
}

Pose dlt_init(const Correspondences& c, const CameraIntrinsics& k) {
    // Homogeneous system in normalized camera coordinates, unknowns (r1, r2, r3, t).
    Eigen::Matrix<double, 16, 12> A;
    A.setZero();
    for (int i = 0; i < 8; ++i) {
        const Eigen::Vector3d& X = c.pts3d[i];
        const double u = (c.pts2d[i].x() - k.cx) / k.f;
        const double v = (c.pts2d[i].y() - k.cy) / k.f;
        A.block<1, 3>(2 * i, 0) = X.transpose();
        A.block<1, 3>(2 * i, 6) = -u * X.transpose();
        A(2 * i, 9) = 1.0;
        A(2 * i, 11) = -u;
        A.block<1, 3>(2 * i + 1, 3) = X.transpose();
        A.block<1, 3>(2 * i + 1, 6) = -v * X.transpose();
        A(2 * i + 1, 10) = 1.0;
        A(2 * i + 1, 11) = -v;
    }

    Eigen::JacobiSVD<Eigen::Matrix<double, 16, 12>> svd(A, Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    if (s(10) <= 1e-10 * s(0))
        fail(ErrorCategory::DegenerateGeometry, "rank-deficient correspondence system");
    const Eigen::Matrix<double, 12, 1> p = svd.matrixV().col(11);

    Eigen::Matrix3d M;
    M.row(0) = p.segment<3>(0).transpose();
    M.row(1) = p.segment<3>(3).transpose();
    M.row(2) = p.segment<3>(6).transpose();
    const Eigen::Vector3d that = p.segment<3>(9);

    const double det = M.determinant();
    if (std::abs(det) < 1e-30)
        fail(ErrorCategory::DegenerateGeometry, "projection estimate has no rotational part");

    Eigen::JacobiSVD<Eigen::Matrix3d> msvd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const double scale = msvd.singularValues().mean();
    // Signed scale resolves the +-p ambiguity so that the object sits in front of the camera.
    const double ks = det < 0 ? -scale : scale;

    const Eigen::Matrix3d Mn = M / ks;
    Eigen::JacobiSVD<Eigen::Matrix3d> rsvd(Mn, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::Matrix3d R = rsvd.matrixU() * rsvd.matrixV().transpose();
    if (R.determinant() < 0) {
        Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
        D(2, 2) = -1.0;
        R = rsvd.matrixU() * D * rsvd.matrixV().transpose();
    }
    Eigen::Vector3d t = that / ks;
    // Heavy noise can push the DLT estimate behind the camera; restart the
    // refinement from a neutral frontal translation instead of giving up.
    if (t.z() <= 0.0) t = Eigen::Vector3d(0.0, 0.0, 5.0);
    return Pose{Rotation::from_matrix(R), t};
}

} // namespace

PnPResult solve_pnp(const Correspondences& c, const CameraIntrinsics& k) {
    Pose pose = dlt_init(c, k);

    PnPResult out;
    double cost = cost_of(pose, c, k);
    out.cost_trace.push_back(cost);

    double lambda = 1e-3;
    Eigen::Matrix3d R = pose.r.matrix();
    Eigen::Vector3d t = pose.t;

    for (int it = 0; it < kMaxIterations; ++it) {
        out.iterations = it + 1;
        Eigen::Matrix<double, 6, 6> JtJ = Eigen::Matrix<double, 6, 6>::Zero();
        Eigen::Matrix<double, 6, 1> Jtr = Eigen::Matrix<double, 6, 1>::Zero();
        for (int i = 0; i < 8; ++i) {
            const Eigen::Vector3d rx = R * c.pts3d[i];
            const Eigen::Vector3d q = rx + t;
            const double iz = 1.0 / q.z();
            const Eigen::Vector2d px(k.f * q.x() * iz + k.cx, k.f * q.y() * iz + k.cy);
            const Eigen::Vector2d r2 = px - c.pts2d[i];
            Eigen::Matrix<double, 2, 3> dpdq;
            dpdq << k.f * iz, 0, -k.f * q.x() * iz * iz, 0, k.f * iz, -k.f * q.y() * iz * iz;
            Eigen::Matrix<double, 3, 6> dqdx;
            dqdx.block<3, 3>(0, 0) = -skew(rx);
            dqdx.block<3, 3>(0, 3) = Eigen::Matrix3d::Identity();
            const Eigen::Matrix<double, 2, 6> J = dpdq * dqdx;
            JtJ += J.transpose() * J;
            Jtr += J.transpose() * r2;
        }

        const Eigen::Matrix<double, 6, 6> damped =
            JtJ + lambda * JtJ.diagonal().cwiseMax(1e-12).asDiagonal().toDenseMatrix();
        const Eigen::Matrix<double, 6, 1> delta = damped.ldlt().solve(-Jtr);
        if (!delta.allFinite()) {
            lambda *= 10.0;
            continue;
        }

        const Eigen::Vector3d w = delta.head<3>();
        Eigen::Matrix3d Rnew = R;
        const double angle = w.norm();
        if (angle > 0.0) Rnew = Rotation::axis_angle(w / angle, angle).matrix() * R;
        const Eigen::Vector3d tnew = t + delta.tail<3>();
        const Pose cand{Rotation::from_matrix(Rnew), tnew};
        const double cnew = cost_of(cand, c, k);

        if (cnew < cost) {
            const double rel = (cost - cnew) / std::max(cost, 1e-300);
            R = cand.r.matrix();
            t = tnew;
            cost = cnew;
            out.cost_trace.push_back(cost);
            lambda = std::max(lambda * 0.1, 1e-12);
            if (delta.norm() < kStepTol || rel < kRelCostTol) {
                out.converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if (delta.norm() < kStepTol) {
                out.converged = true;
                break;
            }
        }
    }

    out.pose = Pose{Rotation::from_matrix(R), t};
    if (out.pose.t.z() <= 0.0)
        fail(ErrorCategory::DegenerateGeometry, "refined pose places the object behind the camera");
    out.rms = std::sqrt(cost / 8.0);
    return out;
}

double reprojection_rms(const Pose& p, const Correspondences& c, const CameraIntrinsics& k) {
    double acc = 0.0;
    for (int i = 0; i < 8; ++i) {
        const Eigen::Vector2d px = project(k, p, c.pts3d[i]);
        acc += (px - c.pts2d[i]).squaredNorm();
    }
    return std::sqrt(acc / 8.0);
}

PoseEstimate estimate_pose(const Prediction19& pred, const CameraIntrinsics& k) {
    const BBox3D box = bbox_corners(pred.dims);
    Correspondences c;
    c.pts3d = box.corners;
    for (int i = 0; i < 8; ++i) c.pts2d[i] = denormalize_projection(pred.proj[i], k);
    const PnPResult r = solve_pnp(c, k);
    return PoseEstimate{r.pose, pred.dims, r.rms, r.converged};
}

Prediction19 prediction_from_head(const std::vector<double>& head, double dims_clamp_lo) {
    if (head.size() != 19) fail(ErrorCategory::Shape, "prediction head needs 19 values");
    std::array<Eigen::Vector2d, 8> proj;
    for (int c = 0; c < 8; ++c) proj[c] = Eigen::Vector2d(head[2 * c], head[2 * c + 1]);
    Eigen::Vector3d d(head[16], head[17], head[18]);
    for (int a = 0; a < 3; ++a) d(a) = std::clamp(d(a), dims_clamp_lo, 1.0);
    return Prediction19{proj, Dimensions(d.x(), d.y(), d.z())};
}

} // namespace poseret
