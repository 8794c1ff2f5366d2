#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "poseret/detail/strfmt.hpp"
#include "poseret/error.hpp"
#include "poseret/harness.hpp"
#include "poseret/pnp.hpp"

namespace fs = std::filesystem;
using poseret::detail::fmt17;

namespace {

struct Options {
    std::string out = "out";
    std::string config;
    std::uint64_t seed = 0;
    bool seed_set = false;

    bool oracle = false;           // eval
    std::string pred_path;         // estimate
    std::string sample_id;         // estimate / retrieve / align
    std::string image_path;        // retrieve
    std::string mode = "pred";     // retrieve
    int top_k = 5;                 // retrieve
    std::string model_id;          // align
    std::string output_path;       // align
};

poseret::PipelineConfig make_config(const Options& opt) {
    poseret::PipelineConfig cfg;
    if (!opt.config.empty())
        cfg = poseret::PipelineConfig::from_map(poseret::parse_config_file(opt.config));
    if (opt.seed_set) cfg.seed = opt.seed;
    cfg.validate();
    return cfg;
}

const poseret::SampleRecord& find_record(const poseret::DatasetManifest& m, const std::string& id) {
    for (const auto& r : m.records)
        if (r.id == id) return r;
    poseret::fail(poseret::ErrorCategory::Configuration, "no sample '" + id + "' in the manifest");
}

std::string manifest_path(const Options& opt) {
    return (fs::path(opt.out) / "data" / "manifest.json").string();
}

void print_estimate(const poseret::PoseEstimate& est) {
    const poseret::Viewpoint vp = poseret::viewpoint_from_rotation(est.pose.r);
    std::cout << "azimuth=" << fmt17(vp.azimuth) << "\n"
              << "elevation=" << fmt17(vp.elevation) << "\n"
              << "theta=" << fmt17(vp.theta) << "\n"
              << "t=" << fmt17(est.pose.t.x()) << " " << fmt17(est.pose.t.y()) << " "
              << fmt17(est.pose.t.z()) << "\n"
              << "dims=" << fmt17(est.dims.vec().x()) << " " << fmt17(est.dims.vec().y()) << " "
              << fmt17(est.dims.vec().z()) << "\n"
              << "rms=" << fmt17(est.rms) << "\n"
              << "converged=" << (est.converged ? 1 : 0) << "\n";
}

void cmd_estimate(const Options& opt, const poseret::PipelineConfig& cfg) {
    if (!opt.sample_id.empty()) {
        const auto m = poseret::load_manifest(manifest_path(opt));
        const auto& rec = find_record(m, opt.sample_id);
        print_estimate(
            poseret::estimate_pose(poseret::Prediction19{rec.proj, rec.dims_obj()}, m.k));
        return;
    }
    std::ifstream in(opt.pred_path);
    if (!in) poseret::fail(poseret::ErrorCategory::Io, "cannot open " + opt.pred_path);
    std::vector<double> v;
    double x = 0.0;
    while (in >> x) v.push_back(x);
    print_estimate(poseret::estimate_pose(poseret::prediction_from_head(v, cfg.dims_clamp_lo),
                                          cfg.intrinsics()));
}

struct QueryState {
    std::vector<float> descriptor;
    std::optional<poseret::PoseEstimate> est;
};

QueryState query_from_image(const poseret::TinyNet& pose_net, const std::string& path,
                            const poseret::CameraIntrinsics& k, double dims_clamp_lo,
                            bool want_pose) {
    const auto input = poseret::shaded_to_input(poseret::read_pgm_file(path));
    const poseret::ForwardOut fw = poseret::net_forward(pose_net, input);
    QueryState q;
    q.descriptor.resize(fw.features.size());
    for (std::size_t i = 0; i < q.descriptor.size(); ++i)
        q.descriptor[i] = static_cast<float>(fw.features[i]);
    if (want_pose)
        q.est = poseret::estimate_pose(poseret::prediction_from_head(fw.head, dims_clamp_lo), k);
    return q;
}

void cmd_retrieve(const Options& opt, const poseret::PipelineConfig& cfg) {
    const poseret::RetrievalMode mode = poseret::mode_from_name(opt.mode);
    if (mode == poseret::RetrievalMode::GT && opt.sample_id.empty())
        poseret::fail(poseret::ErrorCategory::Configuration, "gt mode needs --sample");

    std::string image = opt.image_path;
    poseret::CameraIntrinsics k = cfg.intrinsics();
    std::optional<poseret::DatasetManifest> m;
    const poseret::SampleRecord* rec = nullptr;
    if (!opt.sample_id.empty()) {
        m = poseret::load_manifest(manifest_path(opt));
        rec = &find_record(*m, opt.sample_id);
        image = (fs::path(m->root) / rec->shaded_path).string();
        k = m->k;
    }

    const auto pose_net = poseret::load_weights_file((fs::path(opt.out) / "pose.wts").string());
    const auto synth_net = poseret::load_weights_file((fs::path(opt.out) / "synth.wts").string());
    const auto meshes = poseret::load_meshes_dir((fs::path(opt.out) / "meshes").string());
    std::optional<poseret::DescriptorDB> db;
    if (mode == poseret::RetrievalMode::Off)
        db = poseret::load_db_file((fs::path(opt.out) / "db.wpdb").string());

    const bool want_pose =
        mode == poseret::RetrievalMode::Pred || mode == poseret::RetrievalMode::Off;
    const QueryState q = query_from_image(pose_net, image, k, cfg.dims_clamp_lo, want_pose);

    poseret::Viewpoint vp;
    const poseret::Viewpoint* vp_ptr = nullptr;
    if (mode == poseret::RetrievalMode::GT) {
        vp = rec->vp;
        vp_ptr = &vp;
    } else if (want_pose) {
        vp = poseret::viewpoint_from_rotation(q.est->pose.r);
        vp_ptr = &vp;
    }

    poseret::Rng rng(cfg.seed);
    poseret::RetrieveContext ctx;
    ctx.db = db ? &*db : nullptr;
    ctx.models = &meshes;
    ctx.synth_net = &synth_net;
    ctx.k = &k;
    ctx.t_z = db ? db->t_z : cfg.db_t_z;
    ctx.rand_ranges = cfg.gen.ranges;
    ctx.rng = &rng;

    const auto ranked = poseret::retrieve(q.descriptor, mode, vp_ptr, ctx, opt.top_k);
    for (std::size_t i = 0; i < ranked.size(); ++i)
        std::cout << i + 1 << " " << ranked[i].model_id << " " << fmt17(ranked[i].distance) << "\n";
}

void cmd_align(const Options& opt, const poseret::PipelineConfig& cfg) {
    const auto m = poseret::load_manifest(manifest_path(opt));
    const auto& rec = find_record(m, opt.sample_id);
    const auto meshes = poseret::load_meshes_dir((fs::path(opt.out) / "meshes").string());
    const auto pose_net = poseret::load_weights_file((fs::path(opt.out) / "pose.wts").string());

    const QueryState q =
        query_from_image(pose_net, (fs::path(m.root) / rec.shaded_path).string(), m.k,
                         cfg.dims_clamp_lo, true);

    std::string chosen = opt.model_id;
    if (chosen.empty()) {
        const auto synth_net =
            poseret::load_weights_file((fs::path(opt.out) / "synth.wts").string());
        poseret::RetrieveContext ctx;
        ctx.models = &meshes;
        ctx.synth_net = &synth_net;
        ctx.k = &m.k;
        ctx.t_z = cfg.db_t_z;
        const poseret::Viewpoint vp = poseret::viewpoint_from_rotation(q.est->pose.r);
        const auto ranked =
            poseret::retrieve(q.descriptor, poseret::RetrievalMode::Pred, &vp, ctx, 1);
        chosen = ranked.at(0).model_id;
    }
    const poseret::Mesh* mesh = nullptr;
    for (const auto& cand : meshes)
        if (cand.id == chosen) mesh = &cand;
    if (!mesh)
        poseret::fail(poseret::ErrorCategory::Configuration, "no mesh '" + chosen + "' in the corpus");

    const auto img = poseret::align_render(*mesh, q.est->pose, q.est->dims, m.k);
    std::string out_path = opt.output_path;
    if (out_path.empty())
        out_path = (fs::path(opt.out) / ("align_" + opt.sample_id + ".pgm")).string();
    poseret::write_pgm_file(img, out_path);
    std::cout << "model=" << chosen << "\n" << "image=" << out_path << "\n";
}

} // namespace

int main(int argc, char** argv) {
    Options opt;
    CLI::App app{"6-DoF pose estimation and pose-conditioned 3D model retrieval"};
    app.require_subcommand(1);
    auto* seed_opt = app.add_option("--seed", opt.seed, "override the config seed");
    app.add_option("--config", opt.config, "key=value config file");
    app.add_option("--out", opt.out, "artifact directory (default: out)");

    auto* gen_meshes = app.add_subcommand("gen-meshes", "write the procedural mesh corpus");
    auto* gen_data = app.add_subcommand("gen-data", "render the train/val dataset");
    auto* train_pose = app.add_subcommand("train-pose", "train the camera-domain network");
    auto* train_embed = app.add_subcommand("train-embed", "train the depth-domain network");
    auto* build_db = app.add_subcommand("build-db", "precompute the descriptor database");
    auto* estimate = app.add_subcommand("estimate", "recover a 6-DoF pose from 19 predictions");
    estimate->add_option("--pred", opt.pred_path, "file with 19 whitespace-separated values");
    estimate->add_option("--sample", opt.sample_id, "use a dataset sample's stored values");
    auto* retrieve = app.add_subcommand("retrieve", "rank corpus models for a query image");
    retrieve->add_option("--sample", opt.sample_id, "dataset sample id");
    retrieve->add_option("--image", opt.image_path, "query PGM outside the dataset");
    retrieve->add_option("--mode", opt.mode, "gt | pred | off | cano | rand (default: pred)");
    retrieve->add_option("--top-k", opt.top_k, "results to print (default: 5)");
    auto* align = app.add_subcommand("align", "render a model under the estimated pose");
    align->add_option("--sample", opt.sample_id, "dataset sample id")->required();
    align->add_option("--model", opt.model_id, "mesh id (default: top retrieval)");
    align->add_option("--output", opt.output_path, "output PGM path");
    auto* eval = app.add_subcommand("eval", "evaluate the pipeline on the val split");
    eval->add_flag("--oracle", opt.oracle, "inject ground truth in place of predictions");

    for (auto* sub : app.get_subcommands({})) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);
    opt.seed_set = seed_opt->count() > 0;

    try {
        const poseret::PipelineConfig cfg = make_config(opt);
        if (gen_meshes->parsed()) {
            poseret::stage_gen_meshes(cfg, opt.out);
            std::cout << "meshes=" << (fs::path(opt.out) / "meshes").string() << "\n";
        } else if (gen_data->parsed()) {
            const auto m = poseret::stage_gen_data(cfg, opt.out);
            std::cout << "records=" << m.records.size() << "\n";
        } else if (train_pose->parsed()) {
            const auto trace = poseret::stage_train_pose(cfg, opt.out);
            std::cout << "final_loss=" << fmt17(trace.back()) << "\n";
        } else if (train_embed->parsed()) {
            const auto trace = poseret::stage_train_embed(cfg, opt.out);
            std::cout << "final_loss=" << fmt17(trace.back()) << "\n";
        } else if (build_db->parsed()) {
            poseret::stage_build_db(cfg, opt.out);
            std::cout << "db=" << (fs::path(opt.out) / "db.wpdb").string() << "\n";
        } else if (estimate->parsed()) {
            if (opt.sample_id.empty() == opt.pred_path.empty())
                poseret::fail(poseret::ErrorCategory::Configuration,
                              "estimate needs exactly one of --pred / --sample");
            cmd_estimate(opt, cfg);
        } else if (retrieve->parsed()) {
            if (opt.sample_id.empty() == opt.image_path.empty())
                poseret::fail(poseret::ErrorCategory::Configuration,
                              "retrieve needs exactly one of --sample / --image");
            cmd_retrieve(opt, cfg);
        } else if (align->parsed()) {
            cmd_align(opt, cfg);
        } else if (eval->parsed()) {
            const auto report = poseret::stage_eval(cfg, opt.out, opt.oracle);
            std::cout << poseret::eval_report_table(report);
        }
    } catch (const poseret::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: internal: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
