#include "poseret/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>

#include "poseret/detail/strfmt.hpp"
#include "poseret/error.hpp"
#include "poseret/pnp.hpp"
#include "poseret/render.hpp"

namespace fs = std::filesystem;

namespace poseret {

namespace {

struct SampleOut {
    bool pose_ok = false;
    bool failed = false; // unrecoverable sample failure
    double err = 0.0;
    std::array<double, 3> abs_dim_err{};
    std::map<std::string, bool> hit;
};

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t i) {
    std::uint64_t x = seed ^ (0x9e3779b97f4a7c15ull * (i + 1));
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    return x;
}

} // namespace

EvalReport evaluate_pipeline(const EvalInputs& in, const EvalOptions& opts) {
    if (!in.manifest) fail(ErrorCategory::Configuration, "evaluation needs a dataset manifest");
    const auto val = in.manifest->split("val");
    if (val.empty()) fail(ErrorCategory::EmptyInput, "validation split is empty");
    if (!opts.oracle && !in.pose_net)
        fail(ErrorCategory::Configuration, "evaluation needs a pose net unless oracle mode is on");

    bool needs_online = false, needs_db = false;
    for (RetrievalMode m : opts.modes)
        (m == RetrievalMode::Off ? needs_db : needs_online) = true;
    if (!opts.modes.empty() && !in.synth_net)
        fail(ErrorCategory::Configuration, "retrieval modes need a synth net");
    if (needs_online && !in.meshes)
        fail(ErrorCategory::Configuration, "online retrieval modes need the mesh list");
    if (needs_db && !in.db)
        fail(ErrorCategory::Configuration, "Off mode needs a descriptor database");
    if (opts.oracle && !opts.modes.empty() && !in.meshes)
        fail(ErrorCategory::Configuration, "oracle retrieval needs the mesh list");

    const CameraIntrinsics& k = in.manifest->k;
    const double t_z = in.db ? in.db->t_z : opts.t_z;
    const int n = static_cast<int>(val.size());
    std::vector<SampleOut> results(n);

    parallel_for(n, opts.threads, [&](int i, int) {
        const SampleRecord& rec = *val[i];
        SampleOut& out = results[i];
        try {
            // Query descriptor: camera-domain features, or in oracle mode the
            // exact candidate-side computation at the ground-truth viewpoint.
            std::vector<float> query;
            Prediction19 pred{rec.proj, rec.dims_obj()};
            if (opts.oracle) {
                const Mesh* mesh = nullptr;
                for (const Mesh& m : *in.meshes)
                    if (m.id == rec.mesh_id) mesh = &m;
                if (!mesh) fail(ErrorCategory::Configuration, "mesh " + rec.mesh_id + " not in the mesh list");
                const Pose pose{rotation_from_viewpoint(rec.vp), Eigen::Vector3d(0, 0, t_z)};
                query = descriptor_of(*in.synth_net, depth_to_input(render_depth(*mesh, pose, k)));
            } else {
                const auto input = shaded_to_input(
                    read_pgm_file((fs::path(in.manifest->root) / rec.shaded_path).string()));
                const ForwardOut fw = net_forward(*in.pose_net, input);
                query.resize(fw.features.size());
                for (std::size_t j = 0; j < query.size(); ++j)
                    query[j] = static_cast<float>(fw.features[j]);
                pred = prediction_from_head(fw.head, opts.dims_clamp_lo);
            }

            Viewpoint est_vp = rec.vp;
            try {
                const PoseEstimate est = estimate_pose(pred, k);
                out.pose_ok = true;
                out.err = geodesic_distance(est.pose.r, rec.pose().r);
                est_vp = viewpoint_from_rotation(est.pose.r);
                for (int a = 0; a < 3; ++a)
                    out.abs_dim_err[a] = std::abs(est.dims.vec()(a) - rec.dims[a]);
            } catch (const Error&) {
                out.pose_ok = false;
            }

            RetrieveContext ctx;
            ctx.db = in.db;
            ctx.models = in.meshes;
            ctx.synth_net = in.synth_net;
            ctx.k = &k;
            ctx.t_z = t_z;
            ctx.rand_ranges = opts.rand_ranges;
            Rng rand_rng(mix_seed(opts.seed, static_cast<std::uint64_t>(i)));
            ctx.rng = &rand_rng;

            for (RetrievalMode mode : opts.modes) {
                const bool needs_pose = mode == RetrievalMode::Pred || mode == RetrievalMode::Off;
                if (needs_pose && !out.pose_ok) {
                    out.hit[mode_name(mode)] = false;
                    continue;
                }
                const Viewpoint* vp = nullptr;
                if (mode == RetrievalMode::GT) vp = &rec.vp;
                if (needs_pose) vp = &est_vp;
                const auto ranked = retrieve(query, mode, vp, ctx, 1);
                out.hit[mode_name(mode)] = !ranked.empty() && ranked[0].model_id == rec.mesh_id;
            }
        } catch (const Error&) {
            out.failed = true;
            out.pose_ok = false;
            for (RetrievalMode mode : opts.modes) out.hit[mode_name(mode)] = false;
        }
    });

    std::map<std::string, std::vector<int>> by_cat;
    for (int i = 0; i < n; ++i) by_cat[val[i]->mesh_id].push_back(i);

    EvalReport report;
    for (const auto& [cat, idx] : by_cat) {
        CategoryStats st;
        st.category = cat;
        st.sample_count = static_cast<int>(idx.size());
        std::vector<double> errs;
        std::vector<std::array<double, 3>> dp, dg;
        std::map<std::string, int> hits;
        for (int i : idx) {
            const SampleOut& r = results[i];
            if (r.failed) {
                ++st.failure_count;
            } else if (r.pose_ok) {
                errs.push_back(r.err);
                dp.push_back(r.abs_dim_err);
                dg.push_back({0.0, 0.0, 0.0});
            } else {
                ++st.failure_count;
            }
            for (const auto& [mode, hit] : r.hit) hits[mode] += hit ? 1 : 0;
        }
        if (!errs.empty()) {
            st.med_err_rad = med_err(errs);
            st.med_err_deg = st.med_err_rad * 180.0 / kPi;
            st.mae = dim_mae(dp, dg);
        }
        // Failures count as misses: accuracy is over all attempted samples.
        std::size_t acc_hits = 0;
        for (double e : errs)
            if (e < kPi / 6.0) ++acc_hits;
        st.acc = static_cast<double>(acc_hits) / st.sample_count;
        for (RetrievalMode mode : opts.modes)
            st.top1[mode_name(mode)] =
                static_cast<double>(hits[mode_name(mode)]) / st.sample_count;
        report.categories.push_back(std::move(st));
    }

    CategoryStats& mean = report.mean;
    mean.category = "mean";
    const double nc = static_cast<double>(report.categories.size());
    for (const CategoryStats& st : report.categories) {
        mean.sample_count += st.sample_count;
        mean.failure_count += st.failure_count;
        mean.med_err_rad += st.med_err_rad / nc;
        mean.med_err_deg += st.med_err_deg / nc;
        mean.acc += st.acc / nc;
        for (int a = 0; a < 3; ++a) mean.mae[a] += st.mae[a] / nc;
        for (const auto& [mode, acc] : st.top1) mean.top1[mode] += acc / nc;
    }
    return report;
}

namespace {

std::vector<std::string> report_modes(const EvalReport& r) {
    std::vector<std::string> out;
    for (const char* m : {"gt", "pred", "off", "cano", "rand"})
        if (r.mean.top1.count(m)) out.push_back(m);
    return out;
}

} // namespace

std::string eval_report_csv(const EvalReport& r) {
    const auto modes = report_modes(r);
    std::string s = "category,samples,failures,med_err_rad,med_err_deg,acc_pi6,mae_dx,mae_dy,mae_dz";
    for (const auto& m : modes) s += ",top1_" + m;
    s += "\n";
    const auto row = [&](const CategoryStats& st) {
        s += st.category + "," + std::to_string(st.sample_count) + "," +
             std::to_string(st.failure_count) + "," + detail::fmt17(st.med_err_rad) + "," +
             detail::fmt17(st.med_err_deg) + "," + detail::fmt17(st.acc);
        for (int a = 0; a < 3; ++a) s += "," + detail::fmt17(st.mae[a]);
        for (const auto& m : modes) {
            const auto it = st.top1.find(m);
            s += "," + (it == st.top1.end() ? std::string() : detail::fmt17(it->second));
        }
        s += "\n";
    };
    for (const CategoryStats& st : r.categories) row(st);
    row(r.mean);
    return s;
}

std::string eval_report_table(const EvalReport& r) {
    const auto modes = report_modes(r);
    char buf[256];
    std::string s;
    std::snprintf(buf, sizeof(buf), "%-12s %7s %5s %9s %8s %8s", "category", "samples", "fail",
                  "med(deg)", "acc_pi6", "mae_max");
    s += buf;
    for (const auto& m : modes) {
        std::snprintf(buf, sizeof(buf), " %9s", ("t1:" + m).c_str());
        s += buf;
    }
    s += "\n";
    const auto row = [&](const CategoryStats& st) {
        const double mae_max = std::max({st.mae[0], st.mae[1], st.mae[2]});
        std::snprintf(buf, sizeof(buf), "%-12s %7d %5d %9.3f %8.4f %8.4f", st.category.c_str(),
                      st.sample_count, st.failure_count, st.med_err_deg, st.acc, mae_max);
        s += buf;
        for (const auto& m : modes) {
            const auto it = st.top1.find(m);
            std::snprintf(buf, sizeof(buf), " %9.4f", it == st.top1.end() ? 0.0 : it->second);
            s += buf;
        }
        s += "\n";
    };
    for (const CategoryStats& st : r.categories) row(st);
    row(r.mean);
    return s;
}

} // namespace poseret
