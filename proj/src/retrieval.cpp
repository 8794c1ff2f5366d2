#include "poseret/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "poseret/detail/binio.hpp"
#include "poseret/error.hpp"

namespace poseret {

namespace {

constexpr char kDbMagic[5] = {'W', 'P', 'D', 'B', '1'};

int round_half_down(double x) { return static_cast<int>(std::ceil(x - 0.5)); }

int clampi(int v, int lo, int hi) { return v < lo ? lo : (v > hi ? hi : v); }

} // namespace

void PoseBinGrid::validate() const {
    if (step_deg <= 0 || 360 % step_deg != 0)
        fail(ErrorCategory::Parameter, "bin step must be positive and divide 360");
    const auto aligned = [this](int v) { return v % step_deg == 0; };
    if (!aligned(el_lo) || !aligned(el_hi) || !aligned(th_lo) || !aligned(th_hi))
        fail(ErrorCategory::Parameter, "grid bounds must be multiples of the step");
    if (el_lo > el_hi || el_lo < -90 || el_hi > 90)
        fail(ErrorCategory::Parameter, "elevation span must lie inside [-90, 90]");
    if (th_lo > th_hi || th_lo < -180 || th_hi >= 180)
        fail(ErrorCategory::Parameter, "theta span must lie inside [-180, 180)");
}

BinTriple nearest_bin(const PoseBinGrid& grid, const Viewpoint& vp) {
    grid.validate();
    const double deg = 180.0 / kPi;
    const int step = grid.step_deg;

    int az = round_half_down(vp.azimuth * deg / step) * step;
    az %= 360;
    if (az < 0) az += 360;

    const int el = clampi(round_half_down(vp.elevation * deg / step) * step, grid.el_lo, grid.el_hi);

    int th = round_half_down(vp.theta * deg / step) * step;
    if (th >= 180) th -= 360;
    if (th < -180) th += 360;
    return BinTriple{az, el, clampi(th, grid.th_lo, grid.th_hi)};
}

Viewpoint bin_viewpoint(const BinTriple& bin) {
    const double rad = kPi / 180.0;
    return Viewpoint(bin.az_deg * rad, bin.el_deg * rad, bin.th_deg * rad);
}

DescriptorDB build_db(const std::vector<Mesh>& models, const PoseBinGrid& grid,
                      const TinyNet& synth_net, const CameraIntrinsics& k, double t_z,
                      int threads) {
    grid.validate();
    if (models.empty()) fail(ErrorCategory::EmptyInput, "descriptor database needs at least one model");
    if (!(t_z > 0.0)) fail(ErrorCategory::BehindCamera, "database render distance must be positive");

    std::vector<BinTriple> bins;
    bins.reserve(grid.bin_count());
    for (int az = 0; az < 360; az += grid.step_deg)
        for (int el = grid.el_lo; el <= grid.el_hi; el += grid.step_deg)
            for (int th = grid.th_lo; th <= grid.th_hi; th += grid.step_deg)
                bins.push_back(BinTriple{az, el, th});

    DescriptorDB db;
    db.descriptor_dim = synth_net.cfg.descriptor_dim;
    db.grid = grid;
    db.t_z = t_z;
    db.entries.resize(models.size() * bins.size());

    const int total = static_cast<int>(db.entries.size());
    const int nb = static_cast<int>(bins.size());
    parallel_for(total, threads, [&](int i, int) {
        const std::size_t mi = static_cast<std::size_t>(i) / nb;
        const BinTriple& bin = bins[static_cast<std::size_t>(i) % nb];
        const Pose pose{rotation_from_viewpoint(bin_viewpoint(bin)), Eigen::Vector3d(0, 0, t_z)};
        const DepthImage depth = render_depth(models[mi], pose, k);
        DBEntry& e = db.entries[i];
        e.model_id = models[mi].id;
        e.bin = bin;
        e.descriptor = descriptor_of(synth_net, depth_to_input(depth));
    });
    return db;
}

void save_db(const DescriptorDB& db, std::ostream& out) {
    out.write(kDbMagic, 5);
    detail::write_u32_le(out, static_cast<std::uint32_t>(db.descriptor_dim));
    detail::write_u32_le(out, static_cast<std::uint32_t>(db.grid.step_deg));
    detail::write_i16_le(out, static_cast<std::int16_t>(db.grid.el_lo));
    detail::write_i16_le(out, static_cast<std::int16_t>(db.grid.el_hi));
    detail::write_i16_le(out, static_cast<std::int16_t>(db.grid.th_lo));
    detail::write_i16_le(out, static_cast<std::int16_t>(db.grid.th_hi));
    detail::write_f64_le(out, db.t_z);
    detail::write_u32_le(out, static_cast<std::uint32_t>(db.entries.size()));
    for (const DBEntry& e : db.entries) {
        detail::write_u32_le(out, static_cast<std::uint32_t>(e.model_id.size()));
        out.write(e.model_id.data(), static_cast<std::streamsize>(e.model_id.size()));
        detail::write_i16_le(out, static_cast<std::int16_t>(e.bin.az_deg));
        detail::write_i16_le(out, static_cast<std::int16_t>(e.bin.el_deg));
        detail::write_i16_le(out, static_cast<std::int16_t>(e.bin.th_deg));
        for (float f : e.descriptor) detail::write_f32_le(out, f);
    }
}

DescriptorDB load_db(std::istream& in) {
    char magic[5] = {};
    in.read(magic, 5);
    if (!in || std::memcmp(magic, kDbMagic, 5) != 0)
        fail(ErrorCategory::Parse, "not a descriptor database file");

    DescriptorDB db;
    db.descriptor_dim = static_cast<int>(detail::read_u32_le(in));
    db.grid.step_deg = static_cast<int>(detail::read_u32_le(in));
    db.grid.el_lo = detail::read_i16_le(in);
    db.grid.el_hi = detail::read_i16_le(in);
    db.grid.th_lo = detail::read_i16_le(in);
    db.grid.th_hi = detail::read_i16_le(in);
    db.t_z = detail::read_f64_le(in);
    if (!in) fail(ErrorCategory::Parse, "truncated database header");
    db.grid.validate();
    if (db.descriptor_dim <= 0 || !(db.t_z > 0.0))
        fail(ErrorCategory::Parse, "database header has invalid fields");

    const std::uint32_t count = detail::read_u32_le(in);
    db.entries.resize(count);
    for (DBEntry& e : db.entries) {
        const std::uint32_t len = detail::read_u32_le(in);
        if (!in || len > (1u << 20)) fail(ErrorCategory::Parse, "invalid model id length");
        e.model_id.resize(len);
        in.read(e.model_id.data(), len);
        e.bin.az_deg = detail::read_i16_le(in);
        e.bin.el_deg = detail::read_i16_le(in);
        e.bin.th_deg = detail::read_i16_le(in);
        e.descriptor.resize(db.descriptor_dim);
        for (float& f : e.descriptor) f = detail::read_f32_le(in);
    }
    if (!in) fail(ErrorCategory::Parse, "truncated database payload");
    return db;
}

void save_db_file(const DescriptorDB& db, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::Io, "cannot open " + path + " for writing");
    save_db(db, out);
    if (!out) fail(ErrorCategory::Io, "failed writing " + path);
}

DescriptorDB load_db_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::Io, "cannot open " + path);
    return load_db(in);
}

const char* mode_name(RetrievalMode m) {
    switch (m) {
    case RetrievalMode::GT: return "gt";
    case RetrievalMode::Pred: return "pred";
    case RetrievalMode::Off: return "off";
    case RetrievalMode::Cano: return "cano";
    case RetrievalMode::Rand: return "rand";
    }
    return "?";
}

RetrievalMode mode_from_name(const std::string& name) {
    if (name == "gt") return RetrievalMode::GT;
    if (name == "pred") return RetrievalMode::Pred;
    if (name == "off") return RetrievalMode::Off;
    if (name == "cano") return RetrievalMode::Cano;
    if (name == "rand") return RetrievalMode::Rand;
    fail(ErrorCategory::Configuration, "unknown retrieval mode '" + name + "'");
}

double descriptor_distance(const std::vector<float>& a, const std::vector<float>& b) {
    if (a.size() != b.size()) fail(ErrorCategory::Shape, "descriptor length mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
        acc += d * d;
    }
    return std::sqrt(acc);
}

std::vector<RankedMatch> retrieve(const std::vector<float>& query, RetrievalMode mode,
                                  const Viewpoint* vp, const RetrieveContext& ctx, int k_results) {
    if (k_results < 1) fail(ErrorCategory::Parameter, "k_results must be at least 1");
    if (query.empty()) fail(ErrorCategory::EmptyInput, "empty query descriptor");

    std::vector<RankedMatch> ranked;

    if (mode == RetrievalMode::Off) {
        if (!ctx.db) fail(ErrorCategory::Configuration, "Off mode needs a descriptor database");
        if (!vp) fail(ErrorCategory::Configuration, "Off mode needs an estimated viewpoint");
        const BinTriple bin = nearest_bin(ctx.db->grid, *vp);
        for (const DBEntry& e : ctx.db->entries)
            if (e.bin == bin)
                ranked.push_back({e.model_id, descriptor_distance(query, e.descriptor)});
    } else {
        if (!ctx.models || !ctx.synth_net || !ctx.k)
            fail(ErrorCategory::Configuration, "online modes need models, a synth net, and intrinsics");
        if ((mode == RetrievalMode::GT || mode == RetrievalMode::Pred) && !vp)
            fail(ErrorCategory::Configuration, "GT/Pred modes need a viewpoint");
        Viewpoint render_vp(0.0, 0.0, 0.0);
        switch (mode) {
        case RetrievalMode::GT:
        case RetrievalMode::Pred:
            render_vp = *vp;
            break;
        case RetrievalMode::Cano:
            break;
        case RetrievalMode::Rand:
            if (!ctx.rng) fail(ErrorCategory::Configuration, "Rand mode needs a seeded rng");
            render_vp = sample_viewpoint(ctx.rand_ranges, *ctx.rng);
            break;
        case RetrievalMode::Off:
            break;
        }
        const Pose pose{rotation_from_viewpoint(render_vp), Eigen::Vector3d(0, 0, ctx.t_z)};
        for (const Mesh& m : *ctx.models) {
            const DepthImage depth = render_depth(m, pose, *ctx.k);
            const std::vector<float> d = descriptor_of(*ctx.synth_net, depth_to_input(depth));
            ranked.push_back({m.id, descriptor_distance(query, d)});
        }
    }

    std::sort(ranked.begin(), ranked.end(), [](const RankedMatch& a, const RankedMatch& b) {
        if (a.distance != b.distance) return a.distance < b.distance;
        return a.model_id < b.model_id;
    });
    if (static_cast<int>(ranked.size()) > k_results) ranked.resize(k_results);
    return ranked;
}

ShadedImage align_render(const Mesh& mesh, const Pose& pose, const Dimensions& dims,
                         const CameraIntrinsics& k) {
    if (!(pose.t.z() > 0.0)) fail(ErrorCategory::BehindCamera, "alignment pose must sit in front of the camera");
    const Mesh scaled = rescale_to_dims(mesh, dims);
    return render_shaded(scaled, pose, k);
}

} // namespace poseret
