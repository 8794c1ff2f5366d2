#include "poseret/render.hpp"

#include "poseret/detail/binio.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace poseret {

namespace {

constexpr double kNearPlane = 1e-3;

struct RasterBuffers {
    int w = 0, h = 0;
    std::vector<double> depth; // +inf where uncovered
    std::vector<int> face;     // -1 where uncovered
};

double cross2(const Eigen::Vector2d& u, const Eigen::Vector2d& v) {
    return u.x() * v.y() - u.y() * v.x();
}

// Top-left tie rule for a positively oriented triangle in y-down coordinates:
// edges going down, and horizontal edges going left, own their boundary pixels.
bool edge_top_left(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
    const double dx = b.x() - a.x(), dy = b.y() - a.y();
    return dy > 0.0 || (dy == 0.0 && dx < 0.0);
}

void raster_triangle(RasterBuffers& rb, const CameraIntrinsics& k, int face_index,
                     std::array<Eigen::Vector3d, 3> q) {
    std::array<Eigen::Vector2d, 3> s;
    std::array<double, 3> invz;
    for (int i = 0; i < 3; ++i) {
        const double z = std::max(q[i].z(), kNearPlane);
        s[i] = {k.f * q[i].x() / z + k.cx, k.f * q[i].y() / z + k.cy};
        invz[i] = 1.0 / z;
    }
    double area2 = cross2(s[1] - s[0], s[2] - s[0]);
    if (area2 == 0.0) return;
    if (area2 < 0.0) {
        std::swap(s[1], s[2]);
        std::swap(invz[1], invz[2]);
        area2 = -area2;
    }

    const double xmin = std::min({s[0].x(), s[1].x(), s[2].x()});
    const double xmax = std::max({s[0].x(), s[1].x(), s[2].x()});
    const double ymin = std::min({s[0].y(), s[1].y(), s[2].y()});
    const double ymax = std::max({s[0].y(), s[1].y(), s[2].y()});
    const int x0 = std::max(0, static_cast<int>(std::floor(xmin - 0.5)));
    const int x1 = std::min(rb.w - 1, static_cast<int>(std::ceil(xmax - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(ymin - 0.5)));
    const int y1 = std::min(rb.h - 1, static_cast<int>(std::ceil(ymax - 0.5)));
    if (x0 > x1 || y0 > y1) return;

    const bool tl0 = edge_top_left(s[1], s[2]);
    const bool tl1 = edge_top_left(s[2], s[0]);
    const bool tl2 = edge_top_left(s[0], s[1]);

    for (int py = y0; py <= y1; ++py) {
        for (int px = x0; px <= x1; ++px) {
            const Eigen::Vector2d p(px + 0.5, py + 0.5);
            const double w0 = cross2(s[2] - s[1], p - s[1]);
            const double w1 = cross2(s[0] - s[2], p - s[2]);
            const double w2 = cross2(s[1] - s[0], p - s[0]);
            const bool in0 = w0 > 0.0 || (w0 == 0.0 && tl0);
            const bool in1 = w1 > 0.0 || (w1 == 0.0 && tl1);
            const bool in2 = w2 > 0.0 || (w2 == 0.0 && tl2);
            if (!(in0 && in1 && in2)) continue;
            const double wsum = w0 + w1 + w2;
            if (wsum <= 0.0) continue;
            const double iz = (w0 * invz[0] + w1 * invz[1] + w2 * invz[2]) / wsum;
            const double depth = 1.0 / iz;
            const std::size_t idx = static_cast<std::size_t>(py) * rb.w + px;
            if (depth < rb.depth[idx]) {
                rb.depth[idx] = depth;
                rb.face[idx] = face_index;
            }
        }
    }
}

// Sutherland-Hodgman clip against z >= near; emits the clipped polygon as a fan.
void clip_and_raster(RasterBuffers& rb, const CameraIntrinsics& k, int face_index,
                     const std::array<Eigen::Vector3d, 3>& tri) {
    std::array<Eigen::Vector3d, 4> poly;
    int n = 0;
    for (int i = 0; i < 3; ++i) {
        const Eigen::Vector3d& a = tri[i];
        const Eigen::Vector3d& b = tri[(i + 1) % 3];
        const bool a_in = a.z() >= kNearPlane;
        const bool b_in = b.z() >= kNearPlane;
        if (a_in) poly[n++] = a;
        if (a_in != b_in) {
            const double t = (kNearPlane - a.z()) / (b.z() - a.z());
            poly[n++] = a + t * (b - a);
        }
    }
    if (n < 3) return;
    for (int i = 1; i + 1 < n; ++i)
        raster_triangle(rb, k, face_index, {poly[0], poly[i], poly[i + 1]});
}

RasterBuffers rasterize(const Mesh& m, const Pose& p, const CameraIntrinsics& k) {
    RasterBuffers rb;
    rb.w = k.w;
    rb.h = k.h;
    rb.depth.assign(static_cast<std::size_t>(k.w) * k.h, std::numeric_limits<double>::infinity());
    rb.face.assign(static_cast<std::size_t>(k.w) * k.h, -1);
    const Eigen::Matrix3d R = p.r.matrix();
    for (std::size_t fi = 0; fi < m.triangles.size(); ++fi) {
        const auto& t = m.triangles[fi];
        const std::array<Eigen::Vector3d, 3> q = {R * m.vertices[t[0]] + p.t,
                                                  R * m.vertices[t[1]] + p.t,
                                                  R * m.vertices[t[2]] + p.t};
        if (q[0].z() < kNearPlane && q[1].z() < kNearPlane && q[2].z() < kNearPlane) continue;
        clip_and_raster(rb, k, static_cast<int>(fi), q);
    }
    return rb;
}

} // namespace

DepthImage render_depth(const Mesh& m, const Pose& p, const CameraIntrinsics& k) {
    if (m.vertices.empty() || m.triangles.empty())
        fail(ErrorCategory::DegenerateMesh, "cannot render an empty mesh");
    const RasterBuffers rb = rasterize(m, p, k);
    DepthImage img;
    img.w = rb.w;
    img.h = rb.h;
    img.data.resize(rb.depth.size());
    for (std::size_t i = 0; i < rb.depth.size(); ++i)
        img.data[i] = rb.face[i] >= 0 ? rb.depth[i] : 0.0;
    return img;
}

ShadedImage render_shaded(const Mesh& m, const Pose& p, const CameraIntrinsics& k,
                          const Eigen::Vector3d& light) {
    if (m.vertices.empty() || m.triangles.empty())
        fail(ErrorCategory::DegenerateMesh, "cannot render an empty mesh");
    const RasterBuffers rb = rasterize(m, p, k);

    const Eigen::Matrix3d R = p.r.matrix();
    const Eigen::Vector3d L = light.normalized();
    std::vector<double> intensity(m.triangles.size(), 0.2);
    for (std::size_t fi = 0; fi < m.triangles.size(); ++fi) {
        const auto& t = m.triangles[fi];
        const Eigen::Vector3d a = R * m.vertices[t[0]] + p.t;
        const Eigen::Vector3d b = R * m.vertices[t[1]] + p.t;
        const Eigen::Vector3d c = R * m.vertices[t[2]] + p.t;
        Eigen::Vector3d n = (b - a).cross(c - a);
        const double len = n.norm();
        if (len <= 0.0) continue;
        n /= len;
        if (n.dot(a + b + c) > 0.0) n = -n; // face the camera at the origin
        intensity[fi] = 0.2 + 0.8 * std::max(0.0, n.dot(L));
    }

    ShadedImage img;
    img.w = rb.w;
    img.h = rb.h;
    img.data.resize(rb.face.size());
    for (std::size_t i = 0; i < rb.face.size(); ++i)
        img.data[i] = rb.face[i] >= 0 ? intensity[rb.face[i]] : 0.0;
    return img;
}

ShadedImage gaussian_blur(const ShadedImage& img, double sigma, int ksize) {
    if (!(sigma > 0.0)) fail(ErrorCategory::Parameter, "blur sigma must be positive");
    if (ksize < 3 || ksize % 2 == 0) fail(ErrorCategory::Parameter, "blur kernel size must be odd and >= 3");

    const int r = ksize / 2;
    std::vector<double> kernel(ksize);
    double sum = 0.0;
    for (int i = 0; i < ksize; ++i) {
        const double d = i - r;
        kernel[i] = std::exp(-0.5 * d * d / (sigma * sigma));
        sum += kernel[i];
    }
    for (double& v : kernel) v /= sum;

    const auto clampi = [](int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); };
    ShadedImage tmp{img.w, img.h, std::vector<double>(img.data.size())};
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i)
                acc += kernel[i + r] * img.at(clampi(x + i, 0, img.w - 1), y);
            tmp.data[static_cast<std::size_t>(y) * img.w + x] = acc;
        }
    ShadedImage out{img.w, img.h, std::vector<double>(img.data.size())};
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i)
                acc += kernel[i + r] * tmp.at(x, clampi(y + i, 0, img.h - 1));
            out.data[static_cast<std::size_t>(y) * img.w + x] = acc;
        }
    return out;
}

using detail::read_f32_le;
using detail::write_f32_le;

void write_pfm(const DepthImage& img, std::ostream& out) {
    out << "Pf\n" << img.w << ' ' << img.h << "\n-1.0\n";
    for (int y = img.h - 1; y >= 0; --y)
        for (int x = 0; x < img.w; ++x)
            write_f32_le(out, static_cast<float>(img.at(x, y)));
}

DepthImage read_pfm(std::istream& in) {
    std::string magic;
    int w = 0, h = 0;
    double scale = 0.0;
    in >> magic >> w >> h >> scale;
    if (magic != "Pf" || w <= 0 || h <= 0 || scale >= 0.0)
        fail(ErrorCategory::Parse, "not a little-endian grayscale PFM");
    in.get(); // single whitespace after the header
    DepthImage img{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
    for (int y = h - 1; y >= 0; --y)
        for (int x = 0; x < w; ++x)
            img.data[static_cast<std::size_t>(y) * w + x] = read_f32_le(in);
    if (!in) fail(ErrorCategory::Parse, "truncated PFM payload");
    return img;
}

void write_pgm(const ShadedImage& img, std::ostream& out) {
    out << "P5\n" << img.w << ' ' << img.h << "\n255\n";
    for (double v : img.data) {
        const long q = std::lround(std::clamp(v, 0.0, 1.0) * 255.0);
        out.put(static_cast<char>(static_cast<unsigned char>(q)));
    }
}

ShadedImage read_pgm(std::istream& in) {
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    in >> magic >> w >> h >> maxv;
    if (magic != "P5" || w <= 0 || h <= 0 || maxv != 255)
        fail(ErrorCategory::Parse, "not an 8-bit binary PGM");
    in.get();
    ShadedImage img{w, h, std::vector<double>(static_cast<std::size_t>(w) * h)};
    for (double& v : img.data) {
        const int c = in.get();
        if (c == EOF) fail(ErrorCategory::Parse, "truncated PGM payload");
        v = static_cast<double>(c) / 255.0;
    }
    return img;
}

void write_pfm_file(const DepthImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::Io, "cannot open " + path + " for writing");
    write_pfm(img, out);
}

DepthImage read_pfm_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::Io, "cannot open " + path);
    return read_pfm(in);
}

void write_pgm_file(const ShadedImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::Io, "cannot open " + path + " for writing");
    write_pgm(img, out);
}

ShadedImage read_pgm_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::Io, "cannot open " + path);
    return read_pgm(in);
}

} // namespace poseret
