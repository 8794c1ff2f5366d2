#pragma once

#include <Eigen/Core>
#include <array>
#include <iosfwd>
#include <string>
#include <vector>

#include "poseret/geometry.hpp"

namespace poseret {

/// Triangle mesh in model units. Immutable by convention: operations
/// return transformed copies.
struct Mesh {
    std::vector<Eigen::Vector3d> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::string id;
};

/// Parse the OBJ subset: `v x y z` and `f i j k [l ...]` records.
/// Polygons are fan-triangulated, negative indices resolved relative to the
/// vertices seen so far, and other record types ignored. Malformed records,
/// out-of-range indices and face-less files raise a parse error carrying the
/// line number.
Mesh load_obj(std::istream& in, const std::string& id = "");
Mesh load_obj_file(const std::string& path);

/// Writer for the same subset; full-precision coordinates so load/save
/// round-trips are bit-exact.
void save_obj(const Mesh& m, std::ostream& out);
void save_obj_file(const Mesh& m, const std::string& path);

/// Axis-aligned bounding-box edge lengths.
Eigen::Vector3d mesh_extents(const Mesh& m);

/// Center the bounding box at the origin and scale uniformly so the longest
/// axis spans exactly 1.
Mesh normalize_unit_cube(const Mesh& m);

/// Multiply all vertices by min_i(target_i / extent_i) so the mesh fits the
/// target box; expects a normalized mesh.
Mesh rescale_to_dims(const Mesh& m, const Dimensions& target);

} // namespace poseret
