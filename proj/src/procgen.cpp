#include "poseret/harness.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "poseret/error.hpp"

// The corpus is deliberately free of self-symmetries: every shape combines
// unequal parts at generic offsets, so no two viewpoints in the sampled ranges
// produce the same image and pose regression stays well-posed.

namespace poseret {

namespace {

void add_box(Mesh& m, double cx, double cy, double cz, double sx, double sy, double sz) {
    const int base = static_cast<int>(m.vertices.size());
    for (int i = 0; i < 8; ++i)
        m.vertices.emplace_back(cx + ((i & 1) ? sx : -sx) * 0.5, cy + ((i & 2) ? sy : -sy) * 0.5,
                                cz + ((i & 4) ? sz : -sz) * 0.5);
    static constexpr int quads[6][4] = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4},
                                        {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
    for (const auto& q : quads) {
        m.triangles.push_back({base + q[0], base + q[1], base + q[2]});
        m.triangles.push_back({base + q[0], base + q[2], base + q[3]});
    }
}

// Right-angle wedge: rectangular footprint, full height along the -z edge,
// sloping down toward +z.
void add_wedge(Mesh& m, double cx, double cy, double cz, double sx, double sy, double sz) {
    const int base = static_cast<int>(m.vertices.size());
    const double x0 = cx - sx / 2, x1 = cx + sx / 2;
    const double y0 = cy - sy / 2, y1 = cy + sy / 2;
    const double z0 = cz - sz / 2, z1 = cz + sz / 2;
    m.vertices.emplace_back(x0, y0, z0); // 0
    m.vertices.emplace_back(x1, y0, z0); // 1
    m.vertices.emplace_back(x1, y0, z1); // 2
    m.vertices.emplace_back(x0, y0, z1); // 3
    m.vertices.emplace_back(x0, y1, z0); // 4
    m.vertices.emplace_back(x1, y1, z0); // 5
    const auto tri = [&](int a, int b, int c) { m.triangles.push_back({base + a, base + b, base + c}); };
    tri(0, 3, 2); tri(0, 2, 1); // bottom
    tri(0, 1, 5); tri(0, 5, 4); // back
    tri(4, 5, 2); tri(4, 2, 3); // slope
    tri(0, 4, 3);               // -x side
    tri(1, 2, 5);               // +x side
}

void add_pebble(Mesh& m) {
    const double p = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Eigen::Vector3d> v = {
        {-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
        {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
    for (auto& x : v) x.normalize();
    std::vector<std::array<int, 3>> f = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};

    // One midpoint subdivision.
    std::map<std::pair<int, int>, int> mid;
    const auto midpoint = [&](int a, int b) {
        const auto key = std::minmax(a, b);
        const auto it = mid.find(key);
        if (it != mid.end()) return it->second;
        const int idx = static_cast<int>(v.size());
        v.push_back((v[a] + v[b]).normalized());
        mid.emplace(key, idx);
        return idx;
    };
    std::vector<std::array<int, 3>> f2;
    f2.reserve(f.size() * 4);
    for (const auto& t : f) {
        const int ab = midpoint(t[0], t[1]), bc = midpoint(t[1], t[2]), ca = midpoint(t[2], t[0]);
        f2.push_back({t[0], ab, ca});
        f2.push_back({t[1], bc, ab});
        f2.push_back({t[2], ca, bc});
        f2.push_back({ab, bc, ca});
    }

    Rng jitter(0x70656262u); // fixed: the corpus never varies
    std::vector<double> radius(v.size());
    for (auto& r : radius) r = jitter.uniform(0.72, 1.0);
    const Eigen::Vector3d scale(0.5, 0.37, 0.29);
    const int base = static_cast<int>(m.vertices.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        m.vertices.push_back(v[i].cwiseProduct(scale) * radius[i]);
    for (const auto& t : f2) m.triangles.push_back({base + t[0], base + t[1], base + t[2]});
}

Mesh build(const std::string& id) {
    Mesh m;
    m.id = id;
    if (id == "box_pair") {
        add_box(m, 0, 0, 0, 0.9, 0.55, 0.42);
        add_box(m, 0.31, 0.27, 0.2, 0.38, 0.33, 0.3);
    } else if (id == "step_block") {
        add_box(m, 0, 0, 0, 1.0, 0.3, 0.5);
        add_box(m, -0.15, 0.27, 0.04, 0.64, 0.3, 0.42);
        add_box(m, -0.28, 0.52, 0.1, 0.3, 0.26, 0.34);
    } else if (id == "l_beam") {
        add_box(m, -0.3, 0.1, 0, 0.32, 1.0, 0.3);
        add_box(m, 0.1, -0.33, 0.02, 0.9, 0.3, 0.28);
        add_box(m, 0.38, -0.18, 0.14, 0.18, 0.16, 0.2);
    } else if (id == "t_slab") {
        add_box(m, 0, -0.2, 0, 0.3, 0.7, 0.26);
        add_box(m, 0, 0.32, 0.03, 1.0, 0.3, 0.3);
        add_box(m, 0.4, 0.13, 0.12, 0.2, 0.2, 0.18);
    } else if (id == "cross_arm") {
        add_box(m, 0.06, 0, 0, 1.0, 0.24, 0.22);
        add_box(m, 0, 0.1, 0.02, 0.26, 0.8, 0.2);
        add_box(m, -0.3, 0.33, 0.08, 0.2, 0.18, 0.22);
    } else if (id == "wedge_ramp") {
        add_wedge(m, 0.05, 0.1, 0, 0.9, 0.5, 0.4);
        add_box(m, -0.2, -0.33, 0.05, 0.5, 0.3, 0.5);
    } else if (id == "arch_gate") {
        add_box(m, -0.36, -0.05, 0, 0.26, 0.9, 0.3);
        add_box(m, 0.38, -0.13, 0.04, 0.22, 0.74, 0.26);
        add_box(m, 0.02, 0.42, 0.02, 1.0, 0.24, 0.34);
    } else if (id == "pebble") {
        add_pebble(m);
    } else if (id == "tower_fin") {
        add_box(m, 0.05, 0, 0, 0.4, 1.0, 0.36);
        add_box(m, 0.3, 0.28, 0.02, 0.3, 0.34, 0.1);
        add_box(m, -0.22, -0.42, 0.1, 0.34, 0.2, 0.4);
    } else if (id == "slab_stud") {
        add_box(m, 0, -0.2, 0, 1.0, 0.22, 0.7);
        add_box(m, 0.28, 0.05, 0.17, 0.24, 0.36, 0.22);
        add_box(m, -0.3, -0.02, -0.2, 0.18, 0.3, 0.16);
    } else {
        fail(ErrorCategory::Parameter, "unknown corpus mesh '" + id + "'");
    }
    return normalize_unit_cube(m);
}

} // namespace

std::vector<std::string> corpus_ids() {
    return {"arch_gate", "box_pair", "cross_arm", "l_beam",     "pebble",
            "slab_stud", "step_block", "t_slab",  "tower_fin", "wedge_ramp"};
}

Mesh make_corpus_mesh(const std::string& id) { return build(id); }

std::vector<Mesh> make_corpus() {
    std::vector<Mesh> out;
    for (const std::string& id : corpus_ids()) out.push_back(build(id));
    return out;
}

} // namespace poseret
