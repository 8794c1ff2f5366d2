#include "poseret/learning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "poseret/error.hpp"

namespace poseret {

namespace {

void accumulate(std::vector<double>& acc, const std::vector<double>& g) {
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += g[i];
}

struct BatchSlots {
    std::vector<std::vector<double>> grad;
    std::vector<NetTrace> trace;
    std::vector<std::vector<double>> tmp;

    BatchSlots(int threads, std::size_t params)
        : grad(threads), trace(threads), tmp(threads) {
        for (auto& g : grad) g.assign(params, 0.0);
    }
    void clear() {
        for (auto& g : grad) std::fill(g.begin(), g.end(), 0.0);
    }
    std::vector<double> reduce() {
        std::vector<double> total(grad[0].size(), 0.0);
        for (const auto& g : grad) accumulate(total, g);
        return total;
    }
};

} // namespace

std::vector<double> train_pose(TinyNet& net, const std::vector<PoseSample>& data,
                               const LossConfig& cfg, const TrainSchedule& sched, Rng& rng) {
    cfg.validate();
    sched.validate();
    if (data.empty()) fail(ErrorCategory::EmptyInput, "pose training needs at least one sample");
    if (!net.cfg.pose_head) fail(ErrorCategory::Configuration, "pose training needs a net with a pose head");

    const int n = static_cast<int>(data.size());
    const std::size_t P = net.params.size();
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    BatchSlots slots(sched.threads, P);
    AdamState adam;
    std::vector<double> trace;
    trace.reserve(sched.epochs);

    for (int epoch = 0; epoch < sched.epochs; ++epoch) {
        const double lr = sched.lr_for_epoch(epoch);
        rng.shuffle(order);
        double data_loss = 0.0;

        for (int start = 0; start < n; start += sched.batch) {
            const int bn = std::min(sched.batch, n - start);
            slots.clear();
            std::vector<double> sample_loss(bn, 0.0);

            parallel_for(bn, sched.threads, [&](int bi, int slot) {
                const PoseSample& smp = data[order[start + bi]];
                const ForwardOut out = net_forward(net, smp.input, &slots.trace[slot]);

                std::vector<double> d_head(19, 0.0);
                double pl = 0.0, dl = 0.0;
                for (int i = 0; i < 8; ++i)
                    for (int a = 0; a < 2; ++a) {
                        const auto [v, dv] = huber(out.head[2 * i + a] - smp.proj[i](a), cfg.delta);
                        pl += v;
                        d_head[2 * i + a] = dv;
                    }
                for (int a = 0; a < 3; ++a) {
                    const auto [v, dv] = huber(out.head[16 + a] - smp.dims(a), cfg.delta);
                    dl += v;
                    d_head[16 + a] = cfg.alpha * dv;
                }
                sample_loss[bi] = pl + cfg.alpha * dl;

                net_backward(net, slots.trace[slot], {}, d_head, &slots.tmp[slot]);
                accumulate(slots.grad[slot], slots.tmp[slot]);
            });

            for (double l : sample_loss) data_loss += l;
            std::vector<double> grad = slots.reduce();
            const double inv = 1.0 / bn;
            for (std::size_t i = 0; i < P; ++i)
                grad[i] = grad[i] * inv + 2.0 * cfg.beta * net.params[i];
            adam_step(net.params, grad, adam, lr);
        }

        trace.push_back(data_loss / n + cfg.beta * net.weight_sq_norm());
    }
    return trace;
}

std::vector<double> train_embedders(const TinyNet& real_net, TinyNet& synth_net,
                                    const std::vector<EmbedSample>& data, int model_count,
                                    const NegativeProvider& negative, const LossConfig& cfg,
                                    const TrainSchedule& sched, Rng& rng) {
    cfg.validate();
    sched.validate();
    if (data.empty()) fail(ErrorCategory::EmptyInput, "embedding training needs at least one sample");
    if (model_count < 2)
        fail(ErrorCategory::InsufficientNegatives, "negative sampling needs at least 2 models");
    for (const EmbedSample& s : data)
        if (s.model_index < 0 || s.model_index >= model_count)
            fail(ErrorCategory::Parameter, "sample references a model outside [0, model_count)");

    const int n = static_cast<int>(data.size());
    const std::size_t P = synth_net.params.size();

    // The real net is frozen, so anchor descriptors never change.
    std::vector<std::vector<double>> anchor(n);
    {
        NetTrace tr;
        for (int i = 0; i < n; ++i) anchor[i] = net_forward(real_net, data[i].camera_input, &tr).features;
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);

    BatchSlots slots(sched.threads, P);
    AdamState adam;
    std::vector<NetTrace> neg_trace(sched.threads);
    std::vector<double> trace;
    trace.reserve(sched.epochs);

    const auto dist = [](const std::vector<double>& a, const std::vector<double>& b) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) {
            const double d = a[i] - b[i];
            acc += d * d;
        }
        return std::sqrt(acc);
    };

    for (int epoch = 0; epoch < sched.epochs; ++epoch) {
        const double lr = sched.lr_for_epoch(epoch);
        rng.shuffle(order);
        double data_loss = 0.0;

        for (int start = 0; start < n; start += sched.batch) {
            const int bn = std::min(sched.batch, n - start);
            slots.clear();
            std::vector<double> sample_loss(bn, 0.0);

            // Negatives are redrawn every epoch; draws happen in batch order so the
            // stream is identical no matter how many threads run the batch.
            std::vector<int> neg_model(bn);
            for (int bi = 0; bi < bn; ++bi) {
                const int own = data[order[start + bi]].model_index;
                const int pick = static_cast<int>(rng.uniform_index(model_count - 1));
                neg_model[bi] = pick >= own ? pick + 1 : pick;
            }

            parallel_for(bn, sched.threads, [&](int bi, int slot) {
                const int si = order[start + bi];
                const EmbedSample& smp = data[si];
                const std::vector<double>& a = anchor[si];

                const ForwardOut pos = net_forward(synth_net, smp.depth_input, &slots.trace[slot]);
                const std::vector<double> neg_in = negative(si, neg_model[bi]);
                const ForwardOut neg = net_forward(synth_net, neg_in, &neg_trace[slot]);

                const double sp = dist(pos.features, a);
                const double sm = dist(neg.features, a);
                const TripletGrad tg = triplet_loss(sp, sm, cfg.margin);
                sample_loss[bi] = tg.value;
                if (tg.value <= 0.0) return;

                const int D = synth_net.cfg.descriptor_dim;
                if (sp > 0.0) {
                    std::vector<double> d_pos(D);
                    for (int j = 0; j < D; ++j) d_pos[j] = tg.d_s_plus * (pos.features[j] - a[j]) / sp;
                    net_backward(synth_net, slots.trace[slot], d_pos, {}, &slots.tmp[slot]);
                    accumulate(slots.grad[slot], slots.tmp[slot]);
                }
                if (sm > 0.0) {
                    std::vector<double> d_neg(D);
                    for (int j = 0; j < D; ++j) d_neg[j] = tg.d_s_minus * (neg.features[j] - a[j]) / sm;
                    net_backward(synth_net, neg_trace[slot], d_neg, {}, &slots.tmp[slot]);
                    accumulate(slots.grad[slot], slots.tmp[slot]);
                }
            });

            for (double l : sample_loss) data_loss += l;
            std::vector<double> grad = slots.reduce();
            const double inv = 1.0 / bn;
            for (std::size_t i = 0; i < P; ++i)
                grad[i] = grad[i] * inv + 2.0 * cfg.gamma * synth_net.params[i];
            adam_step(synth_net.params, grad, adam, lr);
        }

        trace.push_back(data_loss / n + cfg.gamma * synth_net.weight_sq_norm());
    }
    return trace;
}

} // namespace poseret
