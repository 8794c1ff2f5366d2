#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "poseret/harness.hpp"
#include "poseret/mesh.hpp"
#include "poseret/render.hpp"
#include "poseret/rng.hpp"

#include "support.hpp"

using namespace poseret;

namespace {

Mesh tri_mesh(const Eigen::Vector3d& a, const Eigen::Vector3d& b, const Eigen::Vector3d& c) {
    Mesh m;
    m.vertices = {a, b, c};
    m.triangles = {{0, 1, 2}};
    m.id = "tri";
    return m;
}

Mesh cube_mesh(double half) {
    Mesh m;
    for (int i = 0; i < 8; ++i)
        m.vertices.push_back({((i >> 0) & 1) ? half : -half, ((i >> 1) & 1) ? half : -half,
                              ((i >> 2) & 1) ? half : -half});
    m.triangles = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                   {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
    m.id = "cube";
    return m;
}

std::vector<bool> mask_of(const DepthImage& d) {
    std::vector<bool> m(d.data.size());
    for (std::size_t i = 0; i < d.data.size(); ++i) m[i] = d.data[i] > 0.0;
    return m;
}

std::vector<bool> mask_of(const ShadedImage& s) {
    std::vector<bool> m(s.data.size());
    for (std::size_t i = 0; i < s.data.size(); ++i) m[i] = s.data[i] > 0.0;
    return m;
}

int count(const std::vector<bool>& m) {
    int n = 0;
    for (bool b : m) n += b ? 1 : 0;
    return n;
}

} // namespace

TEST_CASE("flat triangle at z=5 renders its plane depth") {
    CameraIntrinsics k = CameraIntrinsics::default_for(64, 64);
    Mesh m = tri_mesh({-2, -2, 5}, {4, -2, 5}, {-2, 4, 5});
    DepthImage d = render_depth(m, Pose{}, k);
    int covered = 0;
    for (double v : d.data)
        if (v > 0.0) {
            ++covered;
            CHECK(std::abs(v - 5.0) < 1e-6);
        }
    CHECK(covered > 500);
    CHECK(d.at(32, 32) == doctest::Approx(5.0));
}

TEST_CASE("perspective-correct depth on a tilted plane") {
    CameraIntrinsics k = CameraIntrinsics::default_for(64, 64);
    auto on_plane = [](double x, double y) { return Eigen::Vector3d(x, y, 5.0 + 0.5 * x); };
    Mesh m = tri_mesh(on_plane(-3, -3), on_plane(3, -3), on_plane(0, 4));
    DepthImage d = render_depth(m, Pose{}, k);
    int covered = 0;
    for (int y = 0; y < d.h; ++y)
        for (int x = 0; x < d.w; ++x) {
            double v = d.at(x, y);
            if (v <= 0.0) continue;
            ++covered;
            double u = (x + 0.5 - k.cx) / k.f;
            double z = 5.0 / (1.0 - 0.5 * u);
            CHECK(std::abs(v - z) < 1e-6 * z);
        }
    CHECK(covered > 200);
}

TEST_CASE("mesh behind camera renders all background") {
    CameraIntrinsics k = CameraIntrinsics::default_for(32, 32);
    Pose p;
    p.t = Eigen::Vector3d(0, 0, -5);
    DepthImage d = render_depth(cube_mesh(0.2), p, k);
    for (double v : d.data) CHECK(v == 0.0);
}

TEST_CASE("z-buffer keeps the nearer of two coplanar-offset quads") {
    CameraIntrinsics k = CameraIntrinsics::default_for(64, 64);
    Mesh m;
    auto add_quad = [&m](double x0, double x1, double y0, double y1, double z) {
        int base = static_cast<int>(m.vertices.size());
        m.vertices.push_back({x0, y0, z});
        m.vertices.push_back({x1, y0, z});
        m.vertices.push_back({x1, y1, z});
        m.vertices.push_back({x0, y1, z});
        m.triangles.push_back({base, base + 1, base + 2});
        m.triangles.push_back({base, base + 2, base + 3});
    };
    add_quad(-1.0, 0.2, -0.8, 0.8, 4.0);
    add_quad(-0.2, 1.0, -0.8, 0.8, 6.0);
    m.id = "quads";
    DepthImage d = render_depth(m, Pose{}, k);
    CHECK(d.at(32, 32) == doctest::Approx(4.0));

    double right_px = k.f * 0.6 / 6.0 + k.cx;
    CHECK(d.at(static_cast<int>(right_px), 32) == doctest::Approx(6.0));
    int near_px = 0, far_px = 0;
    for (double v : d.data) {
        if (std::abs(v - 4.0) < 1e-9) ++near_px;
        if (std::abs(v - 6.0) < 1e-9) ++far_px;
    }
    CHECK(near_px > 0);
    CHECK(far_px > 0);
}

TEST_CASE("near-plane clipping keeps the front part") {
    CameraIntrinsics k = CameraIntrinsics::default_for(64, 64);
    Mesh m = tri_mesh({0, -1, -1}, {2, 1, 5}, {-2, 1, 5});
    DepthImage d = render_depth(m, Pose{}, k);
    int covered = 0;
    for (double v : d.data)
        if (v > 0.0) {
            ++covered;
            CHECK(v >= 1e-3);
            CHECK(std::isfinite(v));
        }
    CHECK(covered > 0);
}

TEST_CASE("shared-edge pixels are covered exactly once") {
    CameraIntrinsics k(8.0, 4.0, 4.0, 8, 8);
    Pose p;
    p.t = Eigen::Vector3d(0, 0, 1);
    auto v =
        [](double px, double py) { return Eigen::Vector3d((px - 4.0) / 8.0, (py - 4.0) / 8.0, 0.0); };
    Eigen::Vector3d a = v(1.5, 1.5), b = v(6.5, 1.5), c = v(6.5, 6.5), dd = v(1.5, 6.5);

    Mesh quad;
    quad.vertices = {a, b, c, dd};
    quad.triangles = {{0, 1, 2}, {0, 2, 3}};
    quad.id = "quad";
    std::vector<bool> mq = mask_of(render_depth(quad, p, k));
    std::vector<bool> m1 = mask_of(render_depth(tri_mesh(a, b, c), p, k));
    std::vector<bool> m2 = mask_of(render_depth(tri_mesh(a, c, dd), p, k));

    CHECK(count(mq) == 25);
    for (std::size_t i = 0; i < mq.size(); ++i) {
        CHECK(!(m1[i] && m2[i]));
        CHECK(mq[i] == (m1[i] || m2[i]));
    }
}

TEST_CASE("flat shading intensities") {
    CameraIntrinsics k = CameraIntrinsics::default_for(32, 32);
    Mesh m = tri_mesh({-2, -2, 5}, {4, -2, 5}, {-2, 4, 5});

    ShadedImage head_on = render_shaded(m, Pose{}, k, Eigen::Vector3d(0, 0, -1));
    CHECK(head_on.at(16, 16) == doctest::Approx(1.0));

    ShadedImage perp = render_shaded(m, Pose{}, k, Eigen::Vector3d(1, 0, 0));
    CHECK(perp.at(16, 16) == doctest::Approx(0.2));

    ShadedImage away = render_shaded(m, Pose{}, k, Eigen::Vector3d(0, 0, 1));
    CHECK(away.at(16, 16) == doctest::Approx(0.2));

    ShadedImage deflt = render_shaded(m, Pose{}, k);
    double nl = 0.86 / std::sqrt(0.3 * 0.3 + 0.4 * 0.4 + 0.86 * 0.86);
    CHECK(deflt.at(16, 16) == doctest::Approx(0.2 + 0.8 * nl));
    for (double v : deflt.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("shaded and depth coverage masks are identical") {
    CameraIntrinsics k = CameraIntrinsics::default_for(64, 64);
    Rng rng(41);
    std::vector<Mesh> corpus = make_corpus();
    for (int trial = 0; trial < 12; ++trial) {
        const Mesh& m = corpus[trial % corpus.size()];
        Pose p;
        p.r = rotation_from_viewpoint(sample_viewpoint(ViewpointRanges{}, rng));
        p.t = Eigen::Vector3d(rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3), rng.uniform(3.0, 8.0));
        std::vector<bool> md = mask_of(render_depth(m, p, k));
        std::vector<bool> ms = mask_of(render_shaded(m, p, k));
        CHECK(md == ms);
        CHECK(count(md) > 0);
    }
}

TEST_CASE("vertex depth consistency") {
    Rng rng(42);
    std::vector<Mesh> corpus = make_corpus();
    for (int trial = 0; trial < 20; ++trial) {
        const Mesh& m = corpus[trial % corpus.size()];
        Pose p;
        p.r = rotation_from_viewpoint(sample_viewpoint(ViewpointRanges{}, rng));
        p.t = Eigen::Vector3d(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(3.0, 8.0));
        testsup::VertexDepthStats st = testsup::vertex_depth_stats(m, p, 1e-3);
        CHECK(st.failures == 0);
        CHECK(st.visible > 0);
    }
}

TEST_CASE("frontal box silhouette matches the analytic area") {
    CameraIntrinsics k = CameraIntrinsics::default_for(1024, 1024);
    Pose p;
    p.t = Eigen::Vector3d(0, 0, 5);
    DepthImage d = render_depth(cube_mesh(0.2), p, k);
    double analytic_side = 2.0 * k.f * 0.2 / 4.8;
    double analytic_area = analytic_side * analytic_side;
    int covered = count(mask_of(d));
    CHECK(std::abs(covered - analytic_area) / analytic_area < 0.02);
}

TEST_CASE("rescaled render stays inside the projected box hull") {
    CameraIntrinsics k = CameraIntrinsics::default_for(64, 64);
    Rng rng(43);
    std::vector<Mesh> corpus = make_corpus();
    for (int trial = 0; trial < 10; ++trial) {
        const Mesh& m = corpus[trial % corpus.size()];
        Dimensions target(rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0), rng.uniform(0.3, 1.0));
        Mesh scaled = rescale_to_dims(m, target);
        Pose p;
        p.r = rotation_from_viewpoint(sample_viewpoint(ViewpointRanges{}, rng));
        p.t = Eigen::Vector3d(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2), rng.uniform(4.0, 8.0));
        DepthImage d = render_depth(scaled, p, k);

        BBox3D box = bbox_corners(target);
        double xmin = 1e9, xmax = -1e9, ymin = 1e9, ymax = -1e9;
        for (const auto& c : box.corners) {
            Eigen::Vector2d px = project(k, p, c);
            xmin = std::min(xmin, px.x());
            xmax = std::max(xmax, px.x());
            ymin = std::min(ymin, px.y());
            ymax = std::max(ymax, px.y());
        }
        for (int y = 0; y < d.h; ++y)
            for (int x = 0; x < d.w; ++x)
                if (d.at(x, y) > 0.0) {
                    CHECK(x + 0.5 >= xmin - 1.0);
                    CHECK(x + 0.5 <= xmax + 1.0);
                    CHECK(y + 0.5 >= ymin - 1.0);
                    CHECK(y + 0.5 <= ymax + 1.0);
                }
    }
}

TEST_CASE("gaussian blur leaves constant images unchanged") {
    ShadedImage img{16, 16, std::vector<double>(256, 0.37)};
    ShadedImage out = gaussian_blur(img, 1.2, 5);
    for (double v : out.data) CHECK(std::abs(v - 0.37) < 1e-12);
}

TEST_CASE("gaussian blur impulse response matches the hand kernel") {
    ShadedImage img{9, 9, std::vector<double>(81, 0.0)};
    img.data[4 * 9 + 4] = 1.0;
    ShadedImage out = gaussian_blur(img, 1.0, 5);

    double raw[5];
    double sum = 0.0;
    for (int i = -2; i <= 2; ++i) {
        raw[i + 2] = std::exp(-0.5 * i * i);
        sum += raw[i + 2];
    }
    for (double& w : raw) w /= sum;

    CHECK(std::abs(out.at(4, 4) - raw[2] * raw[2]) < 1e-12);
    CHECK(std::abs(out.at(3, 4) - raw[1] * raw[2]) < 1e-12);
    CHECK(std::abs(out.at(4, 6) - raw[2] * raw[0]) < 1e-12);
    double total = 0.0;
    for (double v : out.data) total += v;
    CHECK(std::abs(total - 1.0) < 1e-12);
}

TEST_CASE("gaussian blur rejects bad parameters") {
    ShadedImage img{4, 4, std::vector<double>(16, 0.0)};
    auto expect_param = [&](double sigma, int ksize) {
        try {
            gaussian_blur(img, sigma, ksize);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.category() == ErrorCategory::Parameter);
        }
    };
    expect_param(1.0, 4);
    expect_param(1.0, 1);
    expect_param(0.0, 5);
    expect_param(-1.0, 5);
}

TEST_CASE("pfm round trip is byte-stable") {
    CameraIntrinsics k = CameraIntrinsics::default_for(32, 32);
    Pose p;
    p.t = Eigen::Vector3d(0, 0, 5);
    DepthImage d = render_depth(make_corpus_mesh("box_pair"), p, k);

    std::ostringstream s1;
    write_pfm(d, s1);
    std::istringstream in(s1.str());
    DepthImage back = read_pfm(in);
    REQUIRE(back.w == d.w);
    REQUIRE(back.h == d.h);
    for (std::size_t i = 0; i < d.data.size(); ++i)
        CHECK(back.data[i] == static_cast<double>(static_cast<float>(d.data[i])));

    std::ostringstream s2;
    write_pfm(back, s2);
    CHECK(s1.str() == s2.str());

    std::istringstream bad("P5\n2 2\n255\n");
    CHECK_THROWS_AS(read_pfm(bad), Error);
    std::istringstream trunc("Pf\n4 4\n-1.0\nxx");
    CHECK_THROWS_AS(read_pfm(trunc), Error);
}

TEST_CASE("pgm round trip is byte-stable after quantization") {
    CameraIntrinsics k = CameraIntrinsics::default_for(32, 32);
    Pose p;
    p.t = Eigen::Vector3d(0, 0, 5);
    ShadedImage s = render_shaded(make_corpus_mesh("box_pair"), p, k);

    std::ostringstream s1;
    write_pgm(s, s1);
    std::istringstream in(s1.str());
    ShadedImage back = read_pgm(in);
    REQUIRE(back.w == s.w);
    REQUIRE(back.h == s.h);
    for (std::size_t i = 0; i < s.data.size(); ++i)
        CHECK(std::abs(back.data[i] - s.data[i]) <= 0.5 / 255.0 + 1e-12);

    std::ostringstream s2;
    write_pgm(back, s2);
    CHECK(s1.str() == s2.str());

    std::istringstream bad("Pf\n2 2\n-1.0\n");
    CHECK_THROWS_AS(read_pgm(bad), Error);
}

TEST_CASE("image file round trips") {
    namespace fs = std::filesystem;
    fs::path dir = fs::temp_directory_path() / "poseret_render_test";
    fs::create_directories(dir);
    CameraIntrinsics k = CameraIntrinsics::default_for(24, 24);
    Pose p;
    p.t = Eigen::Vector3d(0, 0, 5);
    Mesh m = make_corpus_mesh("arch_gate");

    DepthImage d = render_depth(m, p, k);
    write_pfm_file(d, (dir / "d.pfm").string());
    DepthImage dback = read_pfm_file((dir / "d.pfm").string());
    CHECK(dback.w == d.w);
    for (std::size_t i = 0; i < d.data.size(); ++i)
        CHECK(dback.data[i] == static_cast<double>(static_cast<float>(d.data[i])));

    ShadedImage s = render_shaded(m, p, k);
    write_pgm_file(s, (dir / "s.pgm").string());
    ShadedImage sback = read_pgm_file((dir / "s.pgm").string());
    CHECK(sback.w == s.w);

    CHECK_THROWS_AS(read_pfm_file((dir / "missing.pfm").string()), Error);
    fs::remove_all(dir);
}

TEST_CASE("rendering an empty mesh is rejected") {
    CameraIntrinsics k = CameraIntrinsics::default_for(16, 16);
    Mesh empty;
    CHECK_THROWS_AS(render_depth(empty, Pose{}, k), Error);
    CHECK_THROWS_AS(render_shaded(empty, Pose{}, k), Error);
}
