#pragma once

#include <Eigen/Geometry>
#include <cmath>
#include <cstddef>
#include <vector>

#include "poseret/geometry.hpp"
#include "poseret/mesh.hpp"
#include "poseret/render.hpp"

namespace poseret::testsup {

struct VertexDepthStats {
    int visible = 0;
    int failures = 0;
};

// Aims a 1x1 zoom camera just inside each face adjacent to each vertex and
// compares the rendered depth there with the analytic camera-frame depth.
// The inset sample is guaranteed covered by its own face (unless edge-on,
// skipped), so depth above z*(1+tol), or no coverage at all, is a failure;
// depth below z*(1-tol) means legitimate occlusion.
inline VertexDepthStats vertex_depth_stats(const Mesh& m, const Pose& p, double tol) {
    VertexDepthStats st;
    const double f = 262144.0;
    const Eigen::Matrix3d R = p.r.matrix();
    std::vector<std::vector<int>> adjacent(m.vertices.size());
    for (std::size_t fi = 0; fi < m.triangles.size(); ++fi)
        for (int v : m.triangles[fi]) adjacent[static_cast<std::size_t>(v)].push_back(static_cast<int>(fi));

    for (std::size_t vi = 0; vi < m.vertices.size(); ++vi) {
        bool vis = false;
        for (int fi : adjacent[vi]) {
            const auto& t = m.triangles[static_cast<std::size_t>(fi)];
            const Eigen::Vector3d& a = m.vertices[static_cast<std::size_t>(t[0])];
            const Eigen::Vector3d& b = m.vertices[static_cast<std::size_t>(t[1])];
            const Eigen::Vector3d& c = m.vertices[static_cast<std::size_t>(t[2])];
            const Eigen::Vector3d q = m.vertices[vi] + 1e-6 * ((a + b + c) / 3.0 - m.vertices[vi]);
            const Eigen::Vector3d cam = R * q + p.t;
            if (cam.z() <= 2e-3) continue;
            const Eigen::Vector3d n = (R * (b - a)).cross(R * (c - a));
            const double nn = n.norm();
            if (nn <= 0.0) continue;
            if (std::abs(n.dot(cam)) / (nn * cam.norm()) < 1e-3) continue;
            CameraIntrinsics zoom(f, 0.5 - f * cam.x() / cam.z(), 0.5 - f * cam.y() / cam.z(), 1, 1);
            const double d = render_depth(m, p, zoom).at(0, 0);
            if (d <= 0.0 || d > cam.z() * (1.0 + tol)) {
                ++st.failures;
                continue;
            }
            if (d >= cam.z() * (1.0 - tol)) vis = true;
        }
        if (vis) ++st.visible;
    }
    return st;
}

} // namespace poseret::testsup
