#include "poseret/mesh.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace poseret {

namespace {

[[noreturn]] void parse_fail(int line, const std::string& msg) {
    fail(ErrorCategory::Parse, "line " + std::to_string(line) + ": " + msg);
}

// Face tokens may carry texture/normal slots ("i", "i/t", "i/t/n", "i//n");
// only the vertex index is used.
int face_vertex_index(const std::string& token, int line, int vertex_count) {
    const std::string head = token.substr(0, token.find('/'));
    int idx = 0;
    try {
        std::size_t used = 0;
        idx = std::stoi(head, &used);
        if (used != head.size()) parse_fail(line, "bad face index '" + token + "'");
    } catch (const std::exception&) {
        parse_fail(line, "bad face index '" + token + "'");
    }
    if (idx < 0) idx = vertex_count + idx; // relative to vertices seen so far
    else if (idx > 0) idx -= 1;
    else parse_fail(line, "face index 0 is not valid");
    if (idx < 0 || idx >= vertex_count)
        parse_fail(line, "face index out of range");
    return idx;
}

} // namespace

Mesh load_obj(std::istream& in, const std::string& id) {
    Mesh mesh;
    mesh.id = id;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag) || tag[0] == '#') continue;
        if (tag == "v") {
            double x, y, z;
            if (!(ls >> x >> y >> z)) parse_fail(lineno, "vertex needs three coordinates");
            if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
                parse_fail(lineno, "vertex coordinate is not finite");
            mesh.vertices.emplace_back(x, y, z);
        } else if (tag == "f") {
            std::vector<int> poly;
            std::string token;
            while (ls >> token)
                poly.push_back(face_vertex_index(token, lineno, static_cast<int>(mesh.vertices.size())));
            if (poly.size() < 3) parse_fail(lineno, "face needs at least three vertices");
            for (std::size_t i = 1; i + 1 < poly.size(); ++i)
                mesh.triangles.push_back({poly[0], poly[i], poly[i + 1]});
        }
        // all other record types ignored
    }
    if (mesh.vertices.size() < 3) fail(ErrorCategory::Parse, "mesh has fewer than 3 vertices");
    if (mesh.triangles.empty()) fail(ErrorCategory::Parse, "mesh has no faces");
    return mesh;
}

Mesh load_obj_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::Io, "cannot open " + path);
    std::string id = path;
    if (const auto slash = id.find_last_of('/'); slash != std::string::npos)
        id = id.substr(slash + 1);
    if (const auto dot = id.find_last_of('.'); dot != std::string::npos)
        id = id.substr(0, dot);
    return load_obj(in, id);
}

void save_obj(const Mesh& m, std::ostream& out) {
    char buf[96];
    for (const auto& v : m.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.17g %.17g %.17g\n", v.x(), v.y(), v.z());
        out << buf;
    }
    for (const auto& t : m.triangles)
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

void save_obj_file(const Mesh& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorCategory::Io, "cannot open " + path + " for writing");
    save_obj(m, out);
}

Eigen::Vector3d mesh_extents(const Mesh& m) {
    if (m.vertices.empty()) fail(ErrorCategory::DegenerateMesh, "mesh has no vertices");
    Eigen::Vector3d lo = m.vertices.front(), hi = m.vertices.front();
    for (const auto& v : m.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    return hi - lo;
}

Mesh normalize_unit_cube(const Mesh& m) {
    if (m.vertices.empty()) fail(ErrorCategory::DegenerateMesh, "mesh has no vertices");
    Eigen::Vector3d lo = m.vertices.front(), hi = m.vertices.front();
    for (const auto& v : m.vertices) {
        lo = lo.cwiseMin(v);
        hi = hi.cwiseMax(v);
    }
    const Eigen::Vector3d center = 0.5 * (lo + hi);
    const double max_extent = (hi - lo).maxCoeff();
    if (!(max_extent > 0.0))
        fail(ErrorCategory::DegenerateMesh, "mesh has zero extent on all axes");
    Mesh out = m;
    const double s = 1.0 / max_extent;
    for (auto& v : out.vertices) v = s * (v - center);
    return out;
}

Mesh rescale_to_dims(const Mesh& m, const Dimensions& target) {
    const Eigen::Vector3d extent = mesh_extents(m);
    double s = std::numeric_limits<double>::infinity();
    const Eigen::Vector3d tv = target.vec();
    for (int i = 0; i < 3; ++i)
        if (extent[i] > 0.0) s = std::min(s, tv[i] / extent[i]);
    if (!std::isfinite(s))
        fail(ErrorCategory::DegenerateMesh, "mesh has zero extent on all axes");
    Mesh out = m;
    for (auto& v : out.vertices) v *= s;
    return out;
}

} // namespace poseret
