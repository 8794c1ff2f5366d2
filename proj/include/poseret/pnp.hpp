#pragma once

#include <array>
#include <vector>

#include "poseret/geometry.hpp"

namespace poseret {

/// Exactly 8 pixel observations of the canonical bounding-box corners.
struct Correspondences {
    std::array<Eigen::Vector2d, 8> pts2d;
    std::array<Eigen::Vector3d, 8> pts3d;
};

/// The 19-value regression target: 16 normalized corner projections + 3 dims.
struct Prediction19 {
    std::array<Eigen::Vector2d, 8> proj;
    Dimensions dims;
};

struct PnPResult {
    Pose pose;
    double rms = 0.0;       // pixels, at the returned pose
    bool converged = false;
    int iterations = 0;
    std::vector<double> cost_trace; // accepted squared-residual sums, initialization first
};

/// DLT initialization + Levenberg-Marquardt refinement on (axis-angle, t).
PnPResult solve_pnp(const Correspondences& c, const CameraIntrinsics& k);

double reprojection_rms(const Pose& p, const Correspondences& c, const CameraIntrinsics& k);

struct PoseEstimate {
    Pose pose;
    Dimensions dims;
    double rms = 0.0;
    bool converged = false;
};

/// Denormalize the predicted projections, build corners from the predicted dims, solve.
PoseEstimate estimate_pose(const Prediction19& pred, const CameraIntrinsics& k);

/// Split a 19-value network head into projections + dims, clamping each
/// dimension into [dims_clamp_lo, 1].
Prediction19 prediction_from_head(const std::vector<double>& head, double dims_clamp_lo);

} // namespace poseret
