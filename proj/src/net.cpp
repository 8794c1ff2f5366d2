#include "poseret/learning.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "poseret/detail/binio.hpp"
#include "poseret/error.hpp"

namespace poseret {

namespace {

constexpr int kHeadOutputs = 19;

int stage_kernel(const NetConfig& cfg, int s) { return s == 0 ? cfg.first_kernel : 3; }
int stage_in_c(const NetConfig& cfg, int s) { return s == 0 ? 1 : cfg.channels[s - 1]; }
int stage_in_w(const NetConfig& cfg, int s) { return cfg.input >> s; }

std::vector<TensorInfo> build_tensors(const NetConfig& cfg) {
    std::vector<TensorInfo> out;
    int offset = 0;
    const auto push = [&](std::string name, std::vector<int> dims, bool is_bias) {
        TensorInfo t;
        t.name = std::move(name);
        t.dims = std::move(dims);
        t.size = 1;
        for (int d : t.dims) t.size *= d;
        t.offset = offset;
        t.is_bias = is_bias;
        offset += t.size;
        out.push_back(std::move(t));
    };
    for (std::size_t s = 0; s < cfg.channels.size(); ++s) {
        const int k = stage_kernel(cfg, static_cast<int>(s));
        const int ic = stage_in_c(cfg, static_cast<int>(s));
        const std::string tag = "conv" + std::to_string(s);
        push(tag + ".w", {cfg.channels[s], ic, k, k}, false);
        push(tag + ".b", {cfg.channels[s]}, true);
    }
    push("fc.w", {cfg.descriptor_dim, cfg.channels.back()}, false);
    push("fc.b", {cfg.descriptor_dim}, true);
    if (cfg.pose_head) {
        push("head.w", {kHeadOutputs, cfg.descriptor_dim}, false);
        push("head.b", {kHeadOutputs}, true);
    }
    return out;
}

void conv_forward(const double* w, const double* b, const double* padded, double* out,
                  int in_c, int out_c, int k, int width, int pw) {
    for (int co = 0; co < out_c; ++co) {
        double* dst = out + static_cast<std::size_t>(co) * width * width;
        std::fill(dst, dst + static_cast<std::size_t>(width) * width, b[co]);
        for (int ci = 0; ci < in_c; ++ci) {
            const double* src = padded + static_cast<std::size_t>(ci) * pw * pw;
            const double* wk = w + ((static_cast<std::size_t>(co) * in_c + ci) * k) * k;
            for (int ky = 0; ky < k; ++ky)
                for (int kx = 0; kx < k; ++kx) {
                    const double wv = wk[ky * k + kx];
                    for (int y = 0; y < width; ++y) {
                        const double* row = src + static_cast<std::size_t>(y + ky) * pw + kx;
                        double* orow = dst + static_cast<std::size_t>(y) * width;
                        for (int x = 0; x < width; ++x) orow[x] += wv * row[x];
                    }
                }
        }
    }
}

void pad_input(const std::vector<double>& src, std::vector<double>& dst, int c, int width, int pad) {
    const int pw = width + 2 * pad;
    dst.assign(static_cast<std::size_t>(c) * pw * pw, 0.0);
    for (int ci = 0; ci < c; ++ci)
        for (int y = 0; y < width; ++y) {
            const double* s = src.data() + (static_cast<std::size_t>(ci) * width + y) * width;
            double* d = dst.data() + (static_cast<std::size_t>(ci) * pw + y + pad) * pw + pad;
            std::copy(s, s + width, d);
        }
}

} // namespace

void NetConfig::validate() const {
    if (input < 8) fail(ErrorCategory::Parameter, "net input edge must be at least 8");
    if (channels.empty()) fail(ErrorCategory::Parameter, "net needs at least one conv stage");
    for (int c : channels)
        if (c < 1) fail(ErrorCategory::Parameter, "channel counts must be positive");
    if (descriptor_dim < 1) fail(ErrorCategory::Parameter, "descriptor_dim must be positive");
    if (first_kernel < 3 || first_kernel % 2 == 0 || first_kernel > input)
        fail(ErrorCategory::Parameter, "first conv kernel must be odd, >= 3, and fit the input");
    const int stages = static_cast<int>(channels.size());
    if (input % (1 << stages) != 0)
        fail(ErrorCategory::Parameter, "input edge must be divisible by 2^stages");
}

TinyNet make_net_unchecked(NetConfig cfg, std::vector<double> params) {
    TinyNet net;
    net.cfg = std::move(cfg);
    net.tensors_ = build_tensors(net.cfg);
    const TensorInfo& last = net.tensors_.back();
    const std::size_t total = static_cast<std::size_t>(last.offset) + last.size;
    if (params.empty()) params.assign(total, 0.0);
    if (params.size() != total)
        fail(ErrorCategory::Shape, "parameter vector does not match the architecture");
    net.params = std::move(params);
    return net;
}

TinyNet TinyNet::init(const NetConfig& cfg, Rng& rng) {
    cfg.validate();
    TinyNet net = make_net_unchecked(cfg, {});
    for (const TensorInfo& t : net.tensors_) {
        double* p = net.params.data() + t.offset;
        if (t.is_bias) {
            const double v = t.name == "head.b" ? 0.5 : 0.0;
            std::fill(p, p + t.size, v);
        } else {
            int fan_in = 1;
            for (std::size_t i = 1; i < t.dims.size(); ++i) fan_in *= t.dims[i];
            const double sd = std::sqrt(2.0 / fan_in);
            for (int i = 0; i < t.size; ++i) p[i] = rng.normal(0.0, sd);
        }
    }
    return net;
}

const std::vector<TensorInfo>& TinyNet::tensors() const { return tensors_; }

int TinyNet::param_count() const { return static_cast<int>(params.size()); }

double TinyNet::weight_sq_norm() const {
    double acc = 0.0;
    for (double v : params) acc += v * v;
    return acc;
}

ForwardOut net_forward(const TinyNet& net, const std::vector<double>& img, NetTrace* trace) {
    const NetConfig& cfg = net.cfg;
    const std::size_t expected = static_cast<std::size_t>(cfg.input) * cfg.input;
    if (img.size() != expected)
        fail(ErrorCategory::Shape, "input image does not match the configured net input size");

    NetTrace local;
    NetTrace& tr = trace ? *trace : local;
    const int stages = static_cast<int>(cfg.channels.size());
    tr.stage_pre.resize(stages);
    tr.stage_pooled.resize(stages + 1);
    tr.stage_pooled[0] = img;

    const auto& tensors = net.tensors();
    for (int s = 0; s < stages; ++s) {
        const int k = stage_kernel(cfg, s);
        const int pad = k / 2;
        const int width = stage_in_w(cfg, s);
        const int pw = width + 2 * pad;
        const int ic = stage_in_c(cfg, s);
        const int oc = cfg.channels[s];

        pad_input(tr.stage_pooled[s], tr.scratch, ic, width, pad);
        tr.stage_pre[s].assign(static_cast<std::size_t>(oc) * width * width, 0.0);
        const double* w = net.params.data() + tensors[2 * s].offset;
        const double* b = net.params.data() + tensors[2 * s + 1].offset;
        conv_forward(w, b, tr.scratch.data(), tr.stage_pre[s].data(), ic, oc, k, width, pw);

        const int hw = width / 2;
        tr.stage_pooled[s + 1].assign(static_cast<std::size_t>(oc) * hw * hw, 0.0);
        for (int c = 0; c < oc; ++c) {
            const double* z = tr.stage_pre[s].data() + static_cast<std::size_t>(c) * width * width;
            double* p = tr.stage_pooled[s + 1].data() + static_cast<std::size_t>(c) * hw * hw;
            for (int y = 0; y < hw; ++y)
                for (int x = 0; x < hw; ++x) {
                    const double a = std::max(0.0, z[(2 * y) * width + 2 * x]);
                    const double bb = std::max(0.0, z[(2 * y) * width + 2 * x + 1]);
                    const double cc = std::max(0.0, z[(2 * y + 1) * width + 2 * x]);
                    const double dd = std::max(0.0, z[(2 * y + 1) * width + 2 * x + 1]);
                    p[y * hw + x] = 0.25 * (a + bb + cc + dd);
                }
        }
    }

    const int pw = cfg.input >> stages;
    const int C = cfg.channels.back();
    tr.global_pooled.assign(C, 0.0);
    for (int c = 0; c < C; ++c) {
        const double* p = tr.stage_pooled[stages].data() + static_cast<std::size_t>(c) * pw * pw;
        double acc = 0.0;
        for (int i = 0; i < pw * pw; ++i) acc += p[i];
        tr.global_pooled[c] = acc / (pw * pw);
    }

    const TensorInfo& fcw = tensors[2 * stages];
    const TensorInfo& fcb = tensors[2 * stages + 1];
    const int D = cfg.descriptor_dim;
    tr.fc_pre.assign(D, 0.0);
    tr.features.assign(D, 0.0);
    for (int j = 0; j < D; ++j) {
        const double* wr = net.params.data() + fcw.offset + static_cast<std::size_t>(j) * C;
        double acc = net.params[fcb.offset + j];
        for (int c = 0; c < C; ++c) acc += wr[c] * tr.global_pooled[c];
        tr.fc_pre[j] = acc;
        tr.features[j] = std::max(0.0, acc);
    }

    tr.head.clear();
    if (cfg.pose_head) {
        const TensorInfo& hw = tensors[2 * stages + 2];
        const TensorInfo& hb = tensors[2 * stages + 3];
        tr.head.assign(kHeadOutputs, 0.0);
        for (int o = 0; o < kHeadOutputs; ++o) {
            const double* wr = net.params.data() + hw.offset + static_cast<std::size_t>(o) * D;
            double acc = net.params[hb.offset + o];
            for (int j = 0; j < D; ++j) acc += wr[j] * tr.features[j];
            tr.head[o] = acc;
        }
    }

    return ForwardOut{tr.features, tr.head};
}

std::vector<double> net_backward(const TinyNet& net, const NetTrace& trace,
                                 const std::vector<double>& d_features,
                                 const std::vector<double>& d_head,
                                 std::vector<double>* grad_out) {
    const NetConfig& cfg = net.cfg;
    const int stages = static_cast<int>(cfg.channels.size());
    const int D = cfg.descriptor_dim;
    const int C = cfg.channels.back();
    if (!d_features.empty() && static_cast<int>(d_features.size()) != D)
        fail(ErrorCategory::Shape, "feature gradient has wrong length");
    if (!d_head.empty() && (!cfg.pose_head || static_cast<int>(d_head.size()) != kHeadOutputs))
        fail(ErrorCategory::Shape, "head gradient has wrong length");
    if (trace.fc_pre.empty())
        fail(ErrorCategory::Shape, "trace was not produced by net_forward");

    std::vector<double> local;
    std::vector<double>& grad = grad_out ? *grad_out : local;
    grad.assign(net.params.size(), 0.0);
    const auto& tensors = net.tensors();

    std::vector<double> d_feat(D, 0.0);
    if (!d_features.empty()) d_feat = d_features;
    if (!d_head.empty()) {
        const TensorInfo& hw = tensors[2 * stages + 2];
        const TensorInfo& hb = tensors[2 * stages + 3];
        for (int o = 0; o < kHeadOutputs; ++o) {
            const double g = d_head[o];
            grad[hb.offset + o] += g;
            const double* wr = net.params.data() + hw.offset + static_cast<std::size_t>(o) * D;
            double* gw = grad.data() + hw.offset + static_cast<std::size_t>(o) * D;
            for (int j = 0; j < D; ++j) {
                gw[j] += g * trace.features[j];
                d_feat[j] += g * wr[j];
            }
        }
    }

    const TensorInfo& fcw = tensors[2 * stages];
    const TensorInfo& fcb = tensors[2 * stages + 1];
    std::vector<double> d_g(C, 0.0);
    for (int j = 0; j < D; ++j) {
        const double dz = trace.fc_pre[j] > 0.0 ? d_feat[j] : 0.0;
        if (dz == 0.0) continue;
        grad[fcb.offset + j] += dz;
        const double* wr = net.params.data() + fcw.offset + static_cast<std::size_t>(j) * C;
        double* gw = grad.data() + fcw.offset + static_cast<std::size_t>(j) * C;
        for (int c = 0; c < C; ++c) {
            gw[c] += dz * trace.global_pooled[c];
            d_g[c] += dz * wr[c];
        }
    }

    const int gw = cfg.input >> stages;
    std::vector<double> d_pool(static_cast<std::size_t>(C) * gw * gw);
    for (int c = 0; c < C; ++c) {
        const double v = d_g[c] / (gw * gw);
        double* p = d_pool.data() + static_cast<std::size_t>(c) * gw * gw;
        std::fill(p, p + static_cast<std::size_t>(gw) * gw, v);
    }

    std::vector<double> padded, d_padded, d_z;
    for (int s = stages - 1; s >= 0; --s) {
        const int k = stage_kernel(cfg, s);
        const int pad = k / 2;
        const int width = stage_in_w(cfg, s);
        const int pw = width + 2 * pad;
        const int hw = width / 2;
        const int ic = stage_in_c(cfg, s);
        const int oc = cfg.channels[s];

        d_z.assign(static_cast<std::size_t>(oc) * width * width, 0.0);
        const std::vector<double>& z = trace.stage_pre[s];
        for (int c = 0; c < oc; ++c) {
            const double* dp = d_pool.data() + static_cast<std::size_t>(c) * hw * hw;
            const double* zz = z.data() + static_cast<std::size_t>(c) * width * width;
            double* dz = d_z.data() + static_cast<std::size_t>(c) * width * width;
            for (int y = 0; y < hw; ++y)
                for (int x = 0; x < hw; ++x) {
                    const double g4 = 0.25 * dp[y * hw + x];
                    const int base = (2 * y) * width + 2 * x;
                    if (zz[base] > 0.0) dz[base] = g4;
                    if (zz[base + 1] > 0.0) dz[base + 1] = g4;
                    if (zz[base + width] > 0.0) dz[base + width] = g4;
                    if (zz[base + width + 1] > 0.0) dz[base + width + 1] = g4;
                }
        }

        pad_input(trace.stage_pooled[s], padded, ic, width, pad);
        d_padded.assign(static_cast<std::size_t>(ic) * pw * pw, 0.0);
        const TensorInfo& cw = tensors[2 * s];
        const TensorInfo& cb = tensors[2 * s + 1];
        for (int co = 0; co < oc; ++co) {
            const double* dz = d_z.data() + static_cast<std::size_t>(co) * width * width;
            double bacc = 0.0;
            for (int i = 0; i < width * width; ++i) bacc += dz[i];
            grad[cb.offset + co] += bacc;
            for (int ci = 0; ci < ic; ++ci) {
                const double* src = padded.data() + static_cast<std::size_t>(ci) * pw * pw;
                double* dsrc = d_padded.data() + static_cast<std::size_t>(ci) * pw * pw;
                const std::size_t wbase = cw.offset + ((static_cast<std::size_t>(co) * ic + ci) * k) * k;
                for (int ky = 0; ky < k; ++ky)
                    for (int kx = 0; kx < k; ++kx) {
                        const double wv = net.params[wbase + static_cast<std::size_t>(ky) * k + kx];
                        double wacc = 0.0;
                        for (int y = 0; y < width; ++y) {
                            const double* row = src + static_cast<std::size_t>(y + ky) * pw + kx;
                            double* drow = dsrc + static_cast<std::size_t>(y + ky) * pw + kx;
                            const double* dzr = dz + static_cast<std::size_t>(y) * width;
                            for (int x = 0; x < width; ++x) {
                                wacc += row[x] * dzr[x];
                                drow[x] += wv * dzr[x];
                            }
                        }
                        grad[wbase + static_cast<std::size_t>(ky) * k + kx] += wacc;
                    }
            }
        }

        if (s > 0) {
            d_pool.assign(static_cast<std::size_t>(ic) * width * width, 0.0);
            for (int ci = 0; ci < ic; ++ci)
                for (int y = 0; y < width; ++y) {
                    const double* drow =
                        d_padded.data() + (static_cast<std::size_t>(ci) * pw + y + pad) * pw + pad;
                    double* out = d_pool.data() + (static_cast<std::size_t>(ci) * width + y) * width;
                    std::copy(drow, drow + width, out);
                }
        }
    }

    return grad_out ? std::vector<double>() : std::move(grad);
}

std::vector<float> descriptor_of(const TinyNet& net, const std::vector<double>& img) {
    const ForwardOut out = net_forward(net, img);
    std::vector<float> d(out.features.size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<float>(out.features[i]);
    return d;
}

namespace {

constexpr char kWeightsMagic[5] = {'W', 'P', 'N', 'N', '1'};

} // namespace

void save_weights(const TinyNet& net, std::ostream& out) {
    out.write(kWeightsMagic, 5);
    detail::write_u32_le(out, static_cast<std::uint32_t>(net.cfg.input));
    detail::write_u32_le(out, static_cast<std::uint32_t>(net.cfg.first_kernel));
    detail::write_u32_le(out, static_cast<std::uint32_t>(net.cfg.channels.size()));
    for (int c : net.cfg.channels) detail::write_u32_le(out, static_cast<std::uint32_t>(c));
    detail::write_u32_le(out, static_cast<std::uint32_t>(net.cfg.descriptor_dim));
    out.put(net.cfg.pose_head ? '\1' : '\0');
    const auto& tensors = net.tensors();
    detail::write_u32_le(out, static_cast<std::uint32_t>(tensors.size()));
    for (const TensorInfo& t : tensors) {
        detail::write_u32_le(out, static_cast<std::uint32_t>(t.dims.size()));
        for (int d : t.dims) detail::write_u32_le(out, static_cast<std::uint32_t>(d));
        for (int i = 0; i < t.size; ++i)
            detail::write_f32_le(out, static_cast<float>(net.params[t.offset + i]));
    }
}

TinyNet load_weights(std::istream& in) {
    char magic[5] = {};
    in.read(magic, 5);
    if (!in || std::memcmp(magic, kWeightsMagic, 5) != 0)
        fail(ErrorCategory::Parse, "not a network weights file");

    NetConfig cfg;
    cfg.input = static_cast<int>(detail::read_u32_le(in));
    cfg.first_kernel = static_cast<int>(detail::read_u32_le(in));
    const std::uint32_t stages = detail::read_u32_le(in);
    if (!in || stages == 0 || stages > 16)
        fail(ErrorCategory::Parse, "weights header has an invalid stage count");
    cfg.channels.resize(stages);
    for (auto& c : cfg.channels) c = static_cast<int>(detail::read_u32_le(in));
    cfg.descriptor_dim = static_cast<int>(detail::read_u32_le(in));
    const int head = in.get();
    if (head != 0 && head != 1) fail(ErrorCategory::Parse, "weights header has an invalid head flag");
    cfg.pose_head = head == 1;
    cfg.validate();

    TinyNet net = make_net_unchecked(cfg, {});
    const auto& tensors = net.tensors();
    const std::uint32_t count = detail::read_u32_le(in);
    if (count != tensors.size())
        fail(ErrorCategory::Parse, "weights tensor count does not match the architecture");
    for (const TensorInfo& t : tensors) {
        const std::uint32_t nd = detail::read_u32_le(in);
        if (nd != t.dims.size())
            fail(ErrorCategory::Parse, "weights tensor rank mismatch for " + t.name);
        for (int d : t.dims)
            if (detail::read_u32_le(in) != static_cast<std::uint32_t>(d))
                fail(ErrorCategory::Parse, "weights tensor shape mismatch for " + t.name);
        for (int i = 0; i < t.size; ++i)
            net.params[t.offset + i] = static_cast<double>(detail::read_f32_le(in));
    }
    if (!in) fail(ErrorCategory::Parse, "truncated weights file");
    return net;
}

void save_weights_file(const TinyNet& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCategory::Io, "cannot open " + path + " for writing");
    save_weights(net, out);
    if (!out) fail(ErrorCategory::Io, "failed writing " + path);
}

TinyNet load_weights_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCategory::Io, "cannot open " + path);
    return load_weights(in);
}

} // namespace poseret
