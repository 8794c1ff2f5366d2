#include "poseret/harness.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>

#include "poseret/detail/strfmt.hpp"
#include "poseret/error.hpp"
#include "poseret/render.hpp"

namespace fs = std::filesystem;

namespace poseret {

namespace {

enum : std::uint64_t { kSeedData = 1, kSeedPose = 2, kSeedEmbed = 3, kSeedEval = 4 };

// Per-stage seed streams (splitmix64), so a stage rerun in isolation matches
// the same stage inside a full pipeline run.
std::uint64_t stage_seed(std::uint64_t seed, std::uint64_t stage) {
    std::uint64_t x = seed + 0x9e3779b97f4a7c15ull * (stage + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::Io, "cannot open " + path + " for writing");
    out << text;
    if (!out) fail(ErrorCategory::Io, "failed writing " + path);
}

std::string loss_csv(const std::vector<double>& trace) {
    std::string s = "epoch,loss\n";
    for (std::size_t i = 0; i < trace.size(); ++i)
        s += std::to_string(i) + "," + detail::fmt17(trace[i]) + "\n";
    return s;
}

// The dataset's model index ordering is the sorted mesh-id list; the loaded
// mesh list must line up with it before indices can address meshes.
void check_alignment(const std::vector<std::string>& ids, const std::vector<Mesh>& meshes) {
    if (ids.size() != meshes.size())
        fail(ErrorCategory::Configuration, "dataset and mesh directory disagree on the model set");
    for (std::size_t i = 0; i < ids.size(); ++i)
        if (ids[i] != meshes[i].id)
            fail(ErrorCategory::Configuration,
                 "dataset model '" + ids[i] + "' does not match mesh '" + meshes[i].id + "'");
}

std::string manifest_path(const fs::path& out) { return (out / "data" / "manifest.json").string(); }

} // namespace

std::vector<Mesh> load_meshes_dir(const std::string& dir) {
    if (!fs::is_directory(dir)) fail(ErrorCategory::Io, "not a directory: " + dir);
    std::vector<std::string> paths;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.path().extension() == ".obj") paths.push_back(entry.path().string());
    if (paths.empty()) fail(ErrorCategory::EmptyInput, "no .obj files under " + dir);
    std::vector<Mesh> meshes;
    meshes.reserve(paths.size());
    for (const std::string& p : paths) meshes.push_back(normalize_unit_cube(load_obj_file(p)));
    std::sort(meshes.begin(), meshes.end(), [](const Mesh& a, const Mesh& b) { return a.id < b.id; });
    for (std::size_t i = 1; i < meshes.size(); ++i)
        if (meshes[i].id == meshes[i - 1].id)
            fail(ErrorCategory::Configuration, "duplicate mesh id '" + meshes[i].id + "' in " + dir);
    return meshes;
}

void stage_gen_meshes(const PipelineConfig& cfg, const std::string& out_dir) {
    std::vector<std::string> ids = corpus_ids();
    if (cfg.mesh_limit > 0 && cfg.mesh_limit < static_cast<int>(ids.size()))
        ids.resize(cfg.mesh_limit);
    const fs::path dir = fs::path(out_dir) / "meshes";
    fs::create_directories(dir);
    for (const std::string& id : ids)
        save_obj_file(make_corpus_mesh(id), (dir / (id + ".obj")).string());
}

DatasetManifest stage_gen_data(const PipelineConfig& cfg, const std::string& out_dir) {
    const fs::path out(out_dir);
    const std::vector<Mesh> meshes = load_meshes_dir((out / "meshes").string());
    GenConfig gen = cfg.gen;
    gen.k = cfg.intrinsics();
    return generate_dataset(meshes, gen, stage_seed(cfg.seed, kSeedData), (out / "data").string(),
                            cfg.threads);
}

std::vector<double> stage_train_pose(const PipelineConfig& cfg, const std::string& out_dir) {
    const fs::path out(out_dir);
    const DatasetManifest m = load_manifest(manifest_path(out));
    const std::vector<PoseSample> train = load_pose_samples(m, "train");
    Rng rng(stage_seed(cfg.seed, kSeedPose));
    TinyNet net = TinyNet::init(cfg.net, rng);
    TrainSchedule sched = cfg.pose_sched;
    sched.threads = cfg.threads;
    std::vector<double> trace = train_pose(net, train, cfg.loss, sched, rng);
    save_weights_file(net, (out / "pose.wts").string());
    write_text((out / "pose_loss.csv").string(), loss_csv(trace));
    return trace;
}

std::vector<double> stage_train_embed(const PipelineConfig& cfg, const std::string& out_dir) {
    const fs::path out(out_dir);
    const DatasetManifest m = load_manifest(manifest_path(out));
    const std::vector<Mesh> meshes = load_meshes_dir((out / "meshes").string());
    const TinyNet real = load_weights_file((out / "pose.wts").string());
    const EmbedData data = load_embed_samples(m, "train");
    check_alignment(data.model_ids, meshes);

    NetConfig synth_cfg = cfg.net;
    synth_cfg.pose_head = false;
    Rng rng(stage_seed(cfg.seed, kSeedEmbed));
    TinyNet synth = TinyNet::init(synth_cfg, rng);
    const CameraIntrinsics k = m.k;
    const NegativeProvider negative = [&](int si, int mi) {
        return depth_to_input(render_depth(meshes[mi], data.poses[si], k));
    };
    TrainSchedule sched = cfg.embed_sched;
    sched.threads = cfg.threads;
    std::vector<double> trace = train_embedders(real, synth, data.samples,
                                                static_cast<int>(meshes.size()), negative, cfg.loss,
                                                sched, rng);
    save_weights_file(synth, (out / "synth.wts").string());
    write_text((out / "embed_loss.csv").string(), loss_csv(trace));
    return trace;
}

void stage_build_db(const PipelineConfig& cfg, const std::string& out_dir) {
    const fs::path out(out_dir);
    const DatasetManifest m = load_manifest(manifest_path(out));
    const std::vector<Mesh> meshes = load_meshes_dir((out / "meshes").string());
    const TinyNet synth = load_weights_file((out / "synth.wts").string());
    const DescriptorDB db = build_db(meshes, cfg.grid, synth, m.k, cfg.db_t_z, cfg.threads);
    save_db_file(db, (out / "db.wpdb").string());
}

EvalReport stage_eval(const PipelineConfig& cfg, const std::string& out_dir, bool oracle) {
    const fs::path out(out_dir);
    const EvalReport report = eval_from_dir(out_dir, cfg, oracle);
    const std::string base = oracle ? "eval_oracle" : "eval";
    write_text((out / (base + ".csv")).string(), eval_report_csv(report));
    write_text((out / (base + ".txt")).string(), eval_report_table(report));
    return report;
}

PipelineArtifacts run_pipeline(const PipelineConfig& cfg, const std::string& out_dir,
                               bool oracle_eval) {
    cfg.validate();
    fs::create_directories(out_dir);

    PipelineArtifacts art;
    stage_gen_meshes(cfg, out_dir);
    art.manifest = stage_gen_data(cfg, out_dir);
    art.pose_loss_trace = stage_train_pose(cfg, out_dir);
    art.embed_loss_trace = stage_train_embed(cfg, out_dir);
    stage_build_db(cfg, out_dir);
    art.report = stage_eval(cfg, out_dir, oracle_eval);
    return art;
}

EvalReport eval_from_dir(const std::string& out_dir, const PipelineConfig& cfg, bool oracle) {
    const fs::path out(out_dir);
    const DatasetManifest m = load_manifest(manifest_path(out));
    const std::vector<Mesh> meshes = load_meshes_dir((out / "meshes").string());
    check_alignment(m.mesh_ids(), meshes);

    std::optional<TinyNet> pose_net;
    if (!oracle) pose_net = load_weights_file((out / "pose.wts").string());
    std::optional<TinyNet> synth_net;
    if (!cfg.eval_modes.empty()) synth_net = load_weights_file((out / "synth.wts").string());
    std::optional<DescriptorDB> db;
    for (RetrievalMode mode : cfg.eval_modes)
        if (mode == RetrievalMode::Off && !db) db = load_db_file((out / "db.wpdb").string());

    EvalInputs in;
    in.manifest = &m;
    in.pose_net = pose_net ? &*pose_net : nullptr;
    in.synth_net = synth_net ? &*synth_net : nullptr;
    in.db = db ? &*db : nullptr;
    in.meshes = &meshes;

    EvalOptions opts;
    opts.modes = cfg.eval_modes;
    opts.oracle = oracle;
    opts.seed = stage_seed(cfg.seed, kSeedEval);
    opts.dims_clamp_lo = cfg.dims_clamp_lo;
    opts.t_z = cfg.db_t_z;
    opts.rand_ranges = cfg.gen.ranges;
    opts.threads = cfg.threads;
    return evaluate_pipeline(in, opts);
}

} // namespace poseret
