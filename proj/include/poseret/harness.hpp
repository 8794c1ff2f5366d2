#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "poseret/geometry.hpp"
#include "poseret/learning.hpp"
#include "poseret/mesh.hpp"
#include "poseret/retrieval.hpp"
#include "poseret/rng.hpp"

namespace poseret {

/// Procedurally built asymmetric corpus, canonically normalized, fixed order.
std::vector<Mesh> make_corpus();
Mesh make_corpus_mesh(const std::string& id);
std::vector<std::string> corpus_ids();

/// Every .obj under dir, canonically normalized, sorted by mesh id.
std::vector<Mesh> load_meshes_dir(const std::string& dir);

struct SampleRecord {
    std::string id, mesh_id, split;
    Viewpoint vp{0.0, 0.0, 0.0};
    Eigen::Vector3d t = Eigen::Vector3d::Zero();
    std::array<double, 3> dims = {1.0, 1.0, 1.0};
    std::array<Eigen::Vector2d, 8> proj; // normalized corner projections
    std::string shaded_path, depth_path; // relative to the manifest directory

    Pose pose() const { return Pose{rotation_from_viewpoint(vp), t}; }
    Dimensions dims_obj() const { return Dimensions(dims[0], dims[1], dims[2]); }
};

struct DatasetManifest {
    std::uint64_t seed = 0;
    CameraIntrinsics k = CameraIntrinsics::default_for(64, 64);
    std::vector<SampleRecord> records;
    std::string root; // directory holding the manifest; set on load, not serialized

    std::vector<std::string> mesh_ids() const;            // sorted, unique
    std::vector<const SampleRecord*> split(const std::string& tag) const;
};

struct GenConfig {
    int train_per_mesh = 200;
    int val_per_mesh = 50;
    ViewpointRanges ranges;
    CameraIntrinsics k = CameraIntrinsics::default_for(64, 64);
    double t_z_lo = 4.0, t_z_hi = 7.0;
    double margin_px = 3.0;            // projections stay this far inside the frame
    double blur_sigma_lo = 0.5, blur_sigma_hi = 1.5;
    std::vector<int> blur_kernels = {3, 5, 7};
};

/// Renders shaded (blurred, 8-bit) + depth images and the manifest into out_dir.
DatasetManifest generate_dataset(const std::vector<Mesh>& meshes, const GenConfig& gen,
                                 std::uint64_t seed, const std::string& out_dir, int threads = 1);

void save_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest load_manifest(const std::string& path);

/// Re-projects every record; returns the largest deviation from the stored
/// projections. Throws if a referenced image file is missing.
double audit_manifest(const DatasetManifest& m);

std::vector<PoseSample> load_pose_samples(const DatasetManifest& m, const std::string& split);

struct EmbedData {
    std::vector<EmbedSample> samples;
    std::vector<Pose> poses;            // per sample, for negative rendering
    std::vector<std::string> model_ids; // model_index ordering
};
EmbedData load_embed_samples(const DatasetManifest& m, const std::string& split);

double med_err(std::vector<double> errors);
double acc_pi6(const std::vector<double>& errors);
double top1_acc(const std::vector<std::pair<std::string, std::string>>& retrieved_vs_gt);
std::array<double, 3> dim_mae(const std::vector<std::array<double, 3>>& pred,
                              const std::vector<std::array<double, 3>>& gt);

struct CategoryStats {
    std::string category;
    int sample_count = 0;
    int failure_count = 0;
    double med_err_rad = 0.0;
    double med_err_deg = 0.0;
    double acc = 0.0; // Acc_pi/6
    std::map<std::string, double> top1;
    std::array<double, 3> mae = {0.0, 0.0, 0.0};

    bool operator==(const CategoryStats&) const = default;
};

struct EvalReport {
    std::vector<CategoryStats> categories; // sorted by category name
    CategoryStats mean;                    // unweighted mean over categories

    bool operator==(const EvalReport&) const = default;
};

std::string eval_report_csv(const EvalReport& r);
std::string eval_report_table(const EvalReport& r);

struct EvalOptions {
    std::vector<RetrievalMode> modes = {RetrievalMode::GT, RetrievalMode::Pred, RetrievalMode::Off,
                                        RetrievalMode::Cano, RetrievalMode::Rand};
    bool oracle = false; // inject ground truth in place of net predictions
    std::uint64_t seed = 0;
    double dims_clamp_lo = 0.05;
    double t_z = 5.0; // online render distance when no DB supplies one
    ViewpointRanges rand_ranges; // Rand mode draws from here
    int threads = 1;
};

struct EvalInputs {
    const DatasetManifest* manifest = nullptr; // val split is evaluated
    const TinyNet* pose_net = nullptr;         // may be null in oracle mode
    const TinyNet* synth_net = nullptr;
    const DescriptorDB* db = nullptr;          // Off mode
    const std::vector<Mesh>* meshes = nullptr; // online modes
};

EvalReport evaluate_pipeline(const EvalInputs& in, const EvalOptions& opts);

using ConfigMap = std::map<std::string, std::string>;

/// Flat key=value lines; '#' comments; later keys win.
ConfigMap parse_config(std::istream& in);
ConfigMap parse_config_file(const std::string& path);

/// Every knob of the pipeline with its default; rejects unknown keys.
struct PipelineConfig {
    std::uint64_t seed = 1;
    int image_size = 64;
    double focal = 0.0; // 0 -> 1.2 * image_size

    NetConfig net;            // pose net; synth net shares trunk shape, no head
    LossConfig loss;
    TrainSchedule pose_sched; // batch 16, 60 epochs, lr 1e-4, drops 30/54
    TrainSchedule embed_sched{16, 30, 1e-4, {15, 27}, 1};
    GenConfig gen;
    PoseBinGrid grid;
    double db_t_z = 5.0;
    std::vector<RetrievalMode> eval_modes = {RetrievalMode::GT, RetrievalMode::Pred,
                                             RetrievalMode::Off, RetrievalMode::Cano,
                                             RetrievalMode::Rand};
    double dims_clamp_lo = 0.05;
    int mesh_limit = 0; // 0 = full corpus
    int threads = 1;

    static PipelineConfig from_map(const ConfigMap& m);
    CameraIntrinsics intrinsics() const;
    void validate() const;
};

struct PipelineArtifacts {
    DatasetManifest manifest;
    std::vector<double> pose_loss_trace;
    std::vector<double> embed_loss_trace;
    EvalReport report;
};

/// Pipeline stages. Each reads its inputs from the files earlier stages left
/// under out_dir and writes its own artifacts back there; the CLI subcommands
/// invoke them one at a time and run_pipeline is their composition.
void stage_gen_meshes(const PipelineConfig& cfg, const std::string& out_dir);
DatasetManifest stage_gen_data(const PipelineConfig& cfg, const std::string& out_dir);
std::vector<double> stage_train_pose(const PipelineConfig& cfg, const std::string& out_dir);
std::vector<double> stage_train_embed(const PipelineConfig& cfg, const std::string& out_dir);
void stage_build_db(const PipelineConfig& cfg, const std::string& out_dir);
EvalReport stage_eval(const PipelineConfig& cfg, const std::string& out_dir, bool oracle);

PipelineArtifacts run_pipeline(const PipelineConfig& cfg, const std::string& out_dir,
                               bool oracle_eval = false);

/// Evaluation against the artifacts under out_dir, without writing anything.
EvalReport eval_from_dir(const std::string& out_dir, const PipelineConfig& cfg, bool oracle);

} // namespace poseret
