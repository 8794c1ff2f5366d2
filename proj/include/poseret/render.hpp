#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <string>
#include <vector>

#include "poseret/geometry.hpp"
#include "poseret/mesh.hpp"

namespace poseret {

/// Per-pixel camera-frame depth; 0 marks background, covered pixels are
/// strictly positive.
struct DepthImage {
    int w = 0, h = 0;
    std::vector<double> data;

    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * w + x]; }
};

/// Grayscale intensities in [0, 1]; 0 marks background.
struct ShadedImage {
    int w = 0, h = 0;
    std::vector<double> data;

    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * w + x]; }
};

inline Eigen::Vector3d default_light() {
    return Eigen::Vector3d(0.3, 0.4, -0.86).normalized();
}

/// Nearest camera-frame depth per pixel over all triangles; perspective-correct
/// interpolation, triangles clipped against z = 1e-3.
DepthImage render_depth(const Mesh& m, const Pose& p, const CameraIntrinsics& k);

/// Flat Lambertian shading, intensity 0.2 + 0.8 * max(0, n . light) with the
/// face normal oriented toward the camera. Coverage is identical to
/// render_depth by construction (same rasterizer pass).
ShadedImage render_shaded(const Mesh& m, const Pose& p, const CameraIntrinsics& k,
                          const Eigen::Vector3d& light = default_light());

/// Separable convolution with edge clamping; kernel normalized to sum 1.
/// sigma must be positive and ksize odd and >= 3.
ShadedImage gaussian_blur(const ShadedImage& img, double sigma, int ksize);

// Grayscale PFM ("Pf", float32, little-endian, bottom-up rows).
void write_pfm(const DepthImage& img, std::ostream& out);
void write_pfm_file(const DepthImage& img, const std::string& path);
DepthImage read_pfm(std::istream& in);
DepthImage read_pfm_file(const std::string& path);

// 8-bit binary PGM ("P5"), values rounded from [0,1] to 0..255.
void write_pgm(const ShadedImage& img, std::ostream& out);
void write_pgm_file(const ShadedImage& img, const std::string& path);
ShadedImage read_pgm(std::istream& in);
ShadedImage read_pgm_file(const std::string& path);

} // namespace poseret
