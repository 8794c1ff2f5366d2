#include "poseret/harness.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "poseret/error.hpp"

namespace poseret {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

struct Reader {
    const ConfigMap& m;
    std::set<std::string> seen;

    std::string str(const std::string& key, const std::string& dflt) {
        seen.insert(key);
        const auto it = m.find(key);
        return it == m.end() ? dflt : it->second;
    }
    double num(const std::string& key, double dflt) {
        seen.insert(key);
        const auto it = m.find(key);
        if (it == m.end()) return dflt;
        char* end = nullptr;
        const double v = std::strtod(it->second.c_str(), &end);
        if (end == it->second.c_str() || *end != '\0')
            fail(ErrorCategory::Configuration, "config key '" + key + "' is not a number: " + it->second);
        return v;
    }
    int integer(const std::string& key, int dflt) {
        const double v = num(key, dflt);
        const int i = static_cast<int>(v);
        if (static_cast<double>(i) != v)
            fail(ErrorCategory::Configuration, "config key '" + key + "' must be an integer");
        return i;
    }
    std::uint64_t u64(const std::string& key, std::uint64_t dflt) {
        seen.insert(key);
        const auto it = m.find(key);
        if (it == m.end()) return dflt;
        char* end = nullptr;
        const std::uint64_t v = std::strtoull(it->second.c_str(), &end, 10);
        if (end == it->second.c_str() || *end != '\0')
            fail(ErrorCategory::Configuration, "config key '" + key + "' is not an unsigned integer");
        return v;
    }
    std::vector<int> int_list(const std::string& key, std::vector<int> dflt) {
        seen.insert(key);
        const auto it = m.find(key);
        if (it == m.end()) return dflt;
        std::vector<int> out;
        std::stringstream ss(it->second);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            tok = trim(tok);
            if (tok.empty()) continue;
            char* end = nullptr;
            out.push_back(static_cast<int>(std::strtol(tok.c_str(), &end, 10)));
            if (end == tok.c_str() || *end != '\0')
                fail(ErrorCategory::Configuration, "config key '" + key + "' has a non-integer entry");
        }
        return out;
    }
};

} // namespace

ConfigMap parse_config(std::istream& in) {
    ConfigMap out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            fail(ErrorCategory::Parse, "config line " + std::to_string(lineno) + " is not key=value");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty())
            fail(ErrorCategory::Parse, "config line " + std::to_string(lineno) + " has an empty key");
        out[key] = trim(line.substr(eq + 1));
    }
    return out;
}

ConfigMap parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorCategory::Io, "cannot open " + path);
    return parse_config(in);
}

PipelineConfig PipelineConfig::from_map(const ConfigMap& m) {
    PipelineConfig c;
    Reader r{m, {}};

    c.seed = r.u64("seed", c.seed);
    c.image_size = r.integer("image_size", c.image_size);
    c.focal = r.num("focal", c.focal);
    c.threads = r.integer("threads", c.threads);
    c.mesh_limit = r.integer("mesh_limit", c.mesh_limit);

    c.net.input = c.image_size;
    c.net.first_kernel = r.integer("net.first_kernel", c.net.first_kernel);
    c.net.channels = r.int_list("net.channels", c.net.channels);
    c.net.descriptor_dim = r.integer("net.descriptor_dim", c.net.descriptor_dim);

    c.loss.alpha = r.num("loss.alpha", c.loss.alpha);
    c.loss.beta = r.num("loss.beta", c.loss.beta);
    c.loss.gamma = r.num("loss.gamma", c.loss.gamma);
    c.loss.margin = r.num("loss.margin", c.loss.margin);
    c.loss.delta = r.num("loss.delta", c.loss.delta);

    c.pose_sched.batch = r.integer("pose.batch", c.pose_sched.batch);
    c.pose_sched.epochs = r.integer("pose.epochs", c.pose_sched.epochs);
    c.pose_sched.lr = r.num("pose.lr", c.pose_sched.lr);
    c.pose_sched.lr_drops = r.int_list("pose.drops", c.pose_sched.lr_drops);
    c.pose_sched.threads = c.threads;

    c.embed_sched.batch = r.integer("embed.batch", c.embed_sched.batch);
    c.embed_sched.epochs = r.integer("embed.epochs", c.embed_sched.epochs);
    c.embed_sched.lr = r.num("embed.lr", c.embed_sched.lr);
    c.embed_sched.lr_drops = r.int_list("embed.drops", c.embed_sched.lr_drops);
    c.embed_sched.threads = c.threads;

    c.gen.train_per_mesh = r.integer("gen.train_per_mesh", c.gen.train_per_mesh);
    c.gen.val_per_mesh = r.integer("gen.val_per_mesh", c.gen.val_per_mesh);
    c.gen.t_z_lo = r.num("gen.t_z_lo", c.gen.t_z_lo);
    c.gen.t_z_hi = r.num("gen.t_z_hi", c.gen.t_z_hi);
    c.gen.margin_px = r.num("gen.margin_px", c.gen.margin_px);
    c.gen.blur_sigma_lo = r.num("gen.blur_lo", c.gen.blur_sigma_lo);
    c.gen.blur_sigma_hi = r.num("gen.blur_hi", c.gen.blur_sigma_hi);
    c.gen.blur_kernels = r.int_list("gen.blur_kernels", c.gen.blur_kernels);

    const double d2r = kPi / 180.0;
    c.gen.ranges.az_lo = r.num("ranges.az_lo", c.gen.ranges.az_lo / d2r) * d2r;
    c.gen.ranges.az_hi = r.num("ranges.az_hi", c.gen.ranges.az_hi / d2r) * d2r;
    c.gen.ranges.el_lo = r.num("ranges.el_lo", c.gen.ranges.el_lo / d2r) * d2r;
    c.gen.ranges.el_hi = r.num("ranges.el_hi", c.gen.ranges.el_hi / d2r) * d2r;
    c.gen.ranges.th_lo = r.num("ranges.th_lo", c.gen.ranges.th_lo / d2r) * d2r;
    c.gen.ranges.th_hi = r.num("ranges.th_hi", c.gen.ranges.th_hi / d2r) * d2r;

    c.grid.step_deg = r.integer("grid.step", c.grid.step_deg);
    c.grid.el_lo = r.integer("grid.el_lo", c.grid.el_lo);
    c.grid.el_hi = r.integer("grid.el_hi", c.grid.el_hi);
    c.grid.th_lo = r.integer("grid.th_lo", c.grid.th_lo);
    c.grid.th_hi = r.integer("grid.th_hi", c.grid.th_hi);

    c.db_t_z = r.num("db.t_z", c.db_t_z);
    c.dims_clamp_lo = r.num("dims_clamp_lo", c.dims_clamp_lo);

    const std::string modes = r.str("eval.modes", "gt,pred,off,cano,rand");
    c.eval_modes.clear();
    std::stringstream ss(modes);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) c.eval_modes.push_back(mode_from_name(tok));
    }

    for (const auto& [key, value] : m)
        if (!r.seen.count(key))
            fail(ErrorCategory::Configuration, "unknown config key '" + key + "'");

    c.validate();
    return c;
}

CameraIntrinsics PipelineConfig::intrinsics() const {
    const double f = focal > 0.0 ? focal : 1.2 * image_size;
    return CameraIntrinsics(f, image_size / 2.0, image_size / 2.0, image_size, image_size);
}

void PipelineConfig::validate() const {
    NetConfig pose_net = net;
    pose_net.pose_head = true;
    pose_net.validate();
    loss.validate();
    pose_sched.validate();
    embed_sched.validate();
    grid.validate();
    if (!(db_t_z > 0.0)) fail(ErrorCategory::Configuration, "db.t_z must be positive");
    if (!(dims_clamp_lo > 0.0 && dims_clamp_lo <= 1.0))
        fail(ErrorCategory::Configuration, "dims_clamp_lo must lie in (0, 1]");
    if (mesh_limit < 0) fail(ErrorCategory::Configuration, "mesh_limit must be nonnegative");
    if (eval_modes.empty()) fail(ErrorCategory::Configuration, "eval.modes must not be empty");
    intrinsics(); // validates focal geometry
}

} // namespace poseret
