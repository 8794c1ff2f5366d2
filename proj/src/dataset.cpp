#include "poseret/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

#include "json.hpp"
#include "poseret/detail/strfmt.hpp"
#include "poseret/error.hpp"
#include "poseret/render.hpp"

namespace fs = std::filesystem;

namespace poseret {

namespace {

using detail::fmt17;
using ordered_json = nlohmann::ordered_json;

double parse_num(const std::string& s, const char* what) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        fail(ErrorCategory::Parse, std::string("manifest field '") + what + "' is not a number: " + s);
    return v;
}

std::string pad4(int v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d", v);
    return buf;
}

} // namespace

std::vector<std::string> DatasetManifest::mesh_ids() const {
    std::set<std::string> ids;
    for (const SampleRecord& r : records) ids.insert(r.mesh_id);
    return {ids.begin(), ids.end()};
}

std::vector<const SampleRecord*> DatasetManifest::split(const std::string& tag) const {
    std::vector<const SampleRecord*> out;
    for (const SampleRecord& r : records)
        if (r.split == tag) out.push_back(&r);
    return out;
}

DatasetManifest generate_dataset(const std::vector<Mesh>& meshes, const GenConfig& gen,
                                 std::uint64_t seed, const std::string& out_dir, int threads) {
    if (meshes.empty()) fail(ErrorCategory::EmptyInput, "dataset generation needs at least one mesh");
    if (gen.train_per_mesh < 1 || gen.val_per_mesh < 0)
        fail(ErrorCategory::Parameter, "need train_per_mesh >= 1 and val_per_mesh >= 0");
    if (!(gen.t_z_lo > 0.0) || gen.t_z_hi < gen.t_z_lo)
        fail(ErrorCategory::Parameter, "invalid camera distance range");
    if (gen.blur_kernels.empty()) fail(ErrorCategory::Parameter, "blur kernel list is empty");
    if (!(gen.margin_px >= 0.0) || gen.margin_px * 2 >= std::min(gen.k.w, gen.k.h))
        fail(ErrorCategory::Parameter, "frame margin leaves no usable image area");

    fs::create_directories(fs::path(out_dir) / "images");

    struct Staged {
        const Mesh* mesh;
        SampleRecord rec;
        double blur_sigma;
        int blur_ksize;
    };
    std::vector<Staged> staged;
    Rng rng(seed);

    for (const Mesh& mesh : meshes) {
        const Eigen::Vector3d ext = mesh_extents(mesh);
        const Dimensions dims(ext.x(), ext.y(), ext.z());
        const BBox3D box = bbox_corners(dims);
        const double radius = 0.5 * ext.norm();

        const int total = gen.train_per_mesh + gen.val_per_mesh;
        for (int i = 0; i < total; ++i) {
            const bool train = i < gen.train_per_mesh;
            Staged s;
            s.mesh = &mesh;
            SampleRecord& r = s.rec;
            r.mesh_id = mesh.id;
            r.split = train ? "train" : "val";
            const int local = train ? i : i - gen.train_per_mesh;
            r.id = mesh.id + "_" + r.split + "_" + pad4(local);
            r.dims = {ext.x(), ext.y(), ext.z()};

            r.vp = sample_viewpoint(gen.ranges, rng);
            const double t_z = rng.uniform(gen.t_z_lo, gen.t_z_hi);
            const Rotation rot = rotation_from_viewpoint(r.vp);

            // Keep every projected corner inside the frame margin.
            const double bx = std::max(
                0.0, (gen.k.cx - gen.margin_px) * (t_z - radius) / gen.k.f - radius);
            const double by = std::max(
                0.0, (gen.k.cy - gen.margin_px) * (t_z - radius) / gen.k.f - radius);
            bool placed = false;
            for (int attempt = 0; attempt < 100 && !placed; ++attempt) {
                const Eigen::Vector3d t(rng.uniform(-bx, bx), rng.uniform(-by, by), t_z);
                const Pose pose{rot, t};
                placed = true;
                for (int c = 0; c < 8 && placed; ++c) {
                    const Eigen::Vector2d px = project(gen.k, pose, box.corners[c]);
                    placed = px.x() >= gen.margin_px && px.x() <= gen.k.w - gen.margin_px &&
                             px.y() >= gen.margin_px && px.y() <= gen.k.h - gen.margin_px;
                }
                if (placed) r.t = t;
            }
            if (!placed) r.t = Eigen::Vector3d(0.0, 0.0, t_z);

            const Pose pose{rot, r.t};
            for (int c = 0; c < 8; ++c)
                r.proj[c] = normalize_projection(project(gen.k, pose, box.corners[c]), gen.k);

            s.blur_sigma = rng.uniform(gen.blur_sigma_lo, gen.blur_sigma_hi);
            s.blur_ksize = gen.blur_kernels[rng.uniform_index(gen.blur_kernels.size())];
            r.shaded_path = "images/" + r.id + ".pgm";
            r.depth_path = "images/" + r.id + ".pfm";
            staged.push_back(std::move(s));
        }
    }

    parallel_for(static_cast<int>(staged.size()), threads, [&](int i, int) {
        const Staged& s = staged[i];
        const Pose pose = s.rec.pose();
        const ShadedImage shaded = render_shaded(*s.mesh, pose, gen.k);
        const ShadedImage blurred = gaussian_blur(shaded, s.blur_sigma, s.blur_ksize);
        write_pgm_file(blurred, (fs::path(out_dir) / s.rec.shaded_path).string());
        write_pfm_file(render_depth(*s.mesh, pose, gen.k), (fs::path(out_dir) / s.rec.depth_path).string());
    });

    DatasetManifest m;
    m.seed = seed;
    m.k = gen.k;
    m.root = out_dir;
    m.records.reserve(staged.size());
    for (Staged& s : staged) m.records.push_back(std::move(s.rec));
    save_manifest(m, (fs::path(out_dir) / "manifest.json").string());
    return m;
}

void save_manifest(const DatasetManifest& m, const std::string& path) {
    ordered_json doc;
    doc["seed"] = std::to_string(m.seed);
    doc["intrinsics"] = {{"f", fmt17(m.k.f)},
                         {"cx", fmt17(m.k.cx)},
                         {"cy", fmt17(m.k.cy)},
                         {"w", std::to_string(m.k.w)},
                         {"h", std::to_string(m.k.h)}};
    ordered_json recs = ordered_json::array();
    for (const SampleRecord& r : m.records) {
        ordered_json j;
        j["id"] = r.id;
        j["mesh"] = r.mesh_id;
        j["split"] = r.split;
        j["azimuth"] = fmt17(r.vp.azimuth);
        j["elevation"] = fmt17(r.vp.elevation);
        j["theta"] = fmt17(r.vp.theta);
        j["t"] = {fmt17(r.t.x()), fmt17(r.t.y()), fmt17(r.t.z())};
        j["dims"] = {fmt17(r.dims[0]), fmt17(r.dims[1]), fmt17(r.dims[2])};
        ordered_json proj = ordered_json::array();
        for (const auto& p : r.proj) {
            proj.push_back(fmt17(p.x()));
            proj.push_back(fmt17(p.y()));
        }
        j["proj"] = std::move(proj);
        j["shaded"] = r.shaded_path;
        j["depth"] = r.depth_path;
        recs.push_back(std::move(j));
    }
    doc["records"] = std::move(recs);

    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::Io, "cannot open " + path + " for writing");
    out << doc.dump(2) << '\n';
    if (!out) fail(ErrorCategory::Io, "failed writing " + path);
}

DatasetManifest load_manifest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::Io, "cannot open " + path);
    ordered_json doc;
    try {
        in >> doc;
    } catch (const std::exception& e) {
        fail(ErrorCategory::Parse, std::string("manifest is not valid JSON: ") + e.what());
    }

    try {
        DatasetManifest m;
        m.root = fs::path(path).parent_path().string();
        if (m.root.empty()) m.root = ".";
        m.seed = std::strtoull(doc.at("seed").get<std::string>().c_str(), nullptr, 10);
        const auto& ki = doc.at("intrinsics");
        m.k = CameraIntrinsics(parse_num(ki.at("f").get<std::string>(), "f"),
                               parse_num(ki.at("cx").get<std::string>(), "cx"),
                               parse_num(ki.at("cy").get<std::string>(), "cy"),
                               std::stoi(ki.at("w").get<std::string>()),
                               std::stoi(ki.at("h").get<std::string>()));
        for (const auto& j : doc.at("records")) {
            SampleRecord r;
            r.id = j.at("id").get<std::string>();
            r.mesh_id = j.at("mesh").get<std::string>();
            r.split = j.at("split").get<std::string>();
            r.vp = Viewpoint(parse_num(j.at("azimuth").get<std::string>(), "azimuth"),
                             parse_num(j.at("elevation").get<std::string>(), "elevation"),
                             parse_num(j.at("theta").get<std::string>(), "theta"));
            const auto& t = j.at("t");
            r.t = Eigen::Vector3d(parse_num(t.at(0).get<std::string>(), "t"),
                                  parse_num(t.at(1).get<std::string>(), "t"),
                                  parse_num(t.at(2).get<std::string>(), "t"));
            const auto& d = j.at("dims");
            for (int a = 0; a < 3; ++a) r.dims[a] = parse_num(d.at(a).get<std::string>(), "dims");
            const auto& p = j.at("proj");
            if (p.size() != 16) fail(ErrorCategory::Parse, "record " + r.id + " needs 16 projection values");
            for (int c = 0; c < 8; ++c)
                r.proj[c] = Eigen::Vector2d(parse_num(p.at(2 * c).get<std::string>(), "proj"),
                                            parse_num(p.at(2 * c + 1).get<std::string>(), "proj"));
            r.shaded_path = j.at("shaded").get<std::string>();
            r.depth_path = j.at("depth").get<std::string>();
            m.records.push_back(std::move(r));
        }
        return m;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        fail(ErrorCategory::Parse, std::string("manifest structure invalid: ") + e.what());
    }
}

double audit_manifest(const DatasetManifest& m) {
    double worst = 0.0;
    for (const SampleRecord& r : m.records) {
        for (const char* p : {r.shaded_path.c_str(), r.depth_path.c_str()})
            if (!fs::exists(fs::path(m.root) / p))
                fail(ErrorCategory::Io, "manifest references missing file " + std::string(p));
        const Pose pose = r.pose();
        const BBox3D box = bbox_corners(r.dims_obj());
        for (int c = 0; c < 8; ++c) {
            const Eigen::Vector2d px = normalize_projection(project(m.k, pose, box.corners[c]), m.k);
            worst = std::max(worst, (px - r.proj[c]).cwiseAbs().maxCoeff());
        }
    }
    return worst;
}

std::vector<PoseSample> load_pose_samples(const DatasetManifest& m, const std::string& split) {
    std::vector<PoseSample> out;
    for (const SampleRecord& r : m.records) {
        if (r.split != split) continue;
        PoseSample s;
        s.input = shaded_to_input(read_pgm_file((fs::path(m.root) / r.shaded_path).string()));
        s.proj = r.proj;
        s.dims = Eigen::Vector3d(r.dims[0], r.dims[1], r.dims[2]);
        out.push_back(std::move(s));
    }
    return out;
}

EmbedData load_embed_samples(const DatasetManifest& m, const std::string& split) {
    EmbedData out;
    out.model_ids = m.mesh_ids();
    for (const SampleRecord& r : m.records) {
        if (r.split != split) continue;
        EmbedSample s;
        s.camera_input = shaded_to_input(read_pgm_file((fs::path(m.root) / r.shaded_path).string()));
        s.depth_input = depth_to_input(read_pfm_file((fs::path(m.root) / r.depth_path).string()));
        const auto it = std::lower_bound(out.model_ids.begin(), out.model_ids.end(), r.mesh_id);
        s.model_index = static_cast<int>(it - out.model_ids.begin());
        out.samples.push_back(std::move(s));
        out.poses.push_back(r.pose());
    }
    return out;
}

} // namespace poseret
