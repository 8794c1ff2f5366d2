#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "poseret/geometry.hpp"
#include "poseret/learning.hpp"
#include "poseret/mesh.hpp"
#include "poseret/render.hpp"
#include "poseret/rng.hpp"

namespace poseret {

/// Viewpoint discretization: full azimuth circle, configurable elevation and
/// theta spans. All values are degrees; centers sit at integer multiples of step.
struct PoseBinGrid {
    int step_deg = 10;
    int el_lo = -30, el_hi = 30;
    int th_lo = -30, th_hi = 30;

    void validate() const;
    int az_bins() const { return 360 / step_deg; }
    int el_bins() const { return (el_hi - el_lo) / step_deg + 1; }
    int th_bins() const { return (th_hi - th_lo) / step_deg + 1; }
    int bin_count() const { return az_bins() * el_bins() * th_bins(); }
};

struct BinTriple {
    int az_deg = 0, el_deg = 0, th_deg = 0;
    bool operator==(const BinTriple&) const = default;
};

/// Nearest center per angle; ties round toward the smaller center; azimuth and
/// theta wrap, then elevation/theta clamp into the grid's span.
BinTriple nearest_bin(const PoseBinGrid& grid, const Viewpoint& vp);

Viewpoint bin_viewpoint(const BinTriple& bin);

struct DBEntry {
    std::string model_id;
    BinTriple bin;
    std::vector<float> descriptor;
};

struct DescriptorDB {
    int descriptor_dim = 0;
    PoseBinGrid grid;
    double t_z = 5.0; // camera distance of the DB renders
    std::vector<DBEntry> entries;
};

/// One depth render + descriptor per (model, bin center), camera at (0,0,t_z).
DescriptorDB build_db(const std::vector<Mesh>& models, const PoseBinGrid& grid,
                      const TinyNet& synth_net, const CameraIntrinsics& k, double t_z,
                      int threads = 1);

void save_db(const DescriptorDB& db, std::ostream& out);
DescriptorDB load_db(std::istream& in);
void save_db_file(const DescriptorDB& db, const std::string& path);
DescriptorDB load_db_file(const std::string& path);

enum class RetrievalMode { GT, Pred, Off, Cano, Rand };

const char* mode_name(RetrievalMode m);
RetrievalMode mode_from_name(const std::string& name);

struct RankedMatch {
    std::string model_id;
    double distance = 0.0;
};

/// Inputs for the mode-specific candidate descriptors. Off reads the DB; the
/// online modes render `models` through `synth_net` at distance t_z.
struct RetrieveContext {
    const DescriptorDB* db = nullptr;
    const std::vector<Mesh>* models = nullptr;
    const TinyNet* synth_net = nullptr;
    const CameraIntrinsics* k = nullptr;
    double t_z = 5.0;
    ViewpointRanges rand_ranges;
    Rng* rng = nullptr; // Rand mode only
};

/// Ranked by ascending Euclidean descriptor distance, ties by model id.
/// GT/Pred render at `vp` (ground-truth resp. estimated viewpoint); Off looks up
/// nearest_bin(vp); Cano renders frontal; Rand renders one random viewpoint per call.
std::vector<RankedMatch> retrieve(const std::vector<float>& query, RetrievalMode mode,
                                  const Viewpoint* vp, const RetrieveContext& ctx, int k_results);

double descriptor_distance(const std::vector<float>& a, const std::vector<float>& b);

/// Rescale to the estimated dimensions and render under the full 6-DoF pose.
ShadedImage align_render(const Mesh& mesh, const Pose& pose, const Dimensions& dims,
                         const CameraIntrinsics& k);

} // namespace poseret
