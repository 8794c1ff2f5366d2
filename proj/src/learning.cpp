#include "poseret/learning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "poseret/error.hpp"

namespace poseret {

void LossConfig::validate() const {
    if (!(alpha > 0.0 && beta > 0.0 && gamma > 0.0 && margin > 0.0 && delta > 0.0))
        fail(ErrorCategory::Parameter, "loss coefficients must be strictly positive");
}

std::pair<double, double> huber(double r, double delta) {
    if (!(delta > 0.0)) fail(ErrorCategory::Parameter, "huber delta must be positive");
    const double a = std::abs(r);
    if (a <= delta) return {0.5 * r * r, r};
    return {delta * (a - 0.5 * delta), r > 0.0 ? delta : -delta};
}

double proj_loss(const std::vector<Eigen::Vector2d>& pred,
                 const std::vector<Eigen::Vector2d>& gt, double delta) {
    if (pred.size() != gt.size())
        fail(ErrorCategory::Shape, "projection count mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        acc += huber(pred[i].x() - gt[i].x(), delta).first;
        acc += huber(pred[i].y() - gt[i].y(), delta).first;
    }
    return acc;
}

double dim_loss(const Eigen::Vector3d& pred, const Eigen::Vector3d& gt, double delta) {
    double acc = 0.0;
    for (int i = 0; i < 3; ++i) acc += huber(pred(i) - gt(i), delta).first;
    return acc;
}

double pose_loss(double proj_l, double dim_l, double weight_sq_norm, const LossConfig& cfg) {
    cfg.validate();
    return proj_l + cfg.alpha * dim_l + cfg.beta * weight_sq_norm;
}

TripletGrad triplet_loss(double s_plus, double s_minus, double m) {
    const double v = s_plus - s_minus + m;
    if (v <= 0.0) return {0.0, 0.0, 0.0};
    return {v, 1.0, -1.0};
}

double similarity_loss(double descr_l, double weight_sq_norm, const LossConfig& cfg) {
    cfg.validate();
    return descr_l + cfg.gamma * weight_sq_norm;
}

std::vector<double> depth_to_input(const DepthImage& img) {
    std::vector<double> out(img.data.size(), 0.0);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (double d : img.data)
        if (d > 0.0) {
            lo = std::min(lo, d);
            hi = std::max(hi, d);
        }
    if (!(lo <= hi)) return out; // no foreground
    const double span = hi - lo;
    for (std::size_t i = 0; i < img.data.size(); ++i) {
        const double d = img.data[i];
        if (d <= 0.0) continue;
        out[i] = span > 0.0 ? 0.25 + 0.5 * (d - lo) / span : 0.5;
    }
    return out;
}

std::vector<double> shaded_to_input(const ShadedImage& img) {
    return img.data;
}

void adam_step(std::vector<double>& weights, const std::vector<double>& grads, AdamState& state,
               double lr, double beta1, double beta2, double eps) {
    if (grads.size() != weights.size())
        fail(ErrorCategory::Shape, "gradient size does not match parameter count");
    if (state.m.empty()) {
        state.m.assign(weights.size(), 0.0);
        state.v.assign(weights.size(), 0.0);
    } else if (state.m.size() != weights.size()) {
        fail(ErrorCategory::Shape, "optimizer state does not match parameter count");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
    for (std::size_t i = 0; i < weights.size(); ++i) {
        state.m[i] = beta1 * state.m[i] + (1.0 - beta1) * grads[i];
        state.v[i] = beta2 * state.v[i] + (1.0 - beta2) * grads[i] * grads[i];
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        weights[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

void TrainSchedule::validate() const {
    if (batch < 1 || epochs < 1 || !(lr > 0.0) || threads < 1)
        fail(ErrorCategory::Parameter, "schedule requires batch >= 1, epochs >= 1, lr > 0, threads >= 1");
    for (int d : lr_drops)
        if (d < 0) fail(ErrorCategory::Parameter, "lr drop epochs must be nonnegative");
}

double TrainSchedule::lr_for_epoch(int epoch) const {
    double out = lr;
    for (int d : lr_drops)
        if (epoch >= d) out *= 0.1;
    return out;
}

void parallel_for(int n, int threads, const std::function<void(int index, int slot)>& fn) {
    if (n <= 0) return;
    const int t = std::max(1, std::min(threads, n));
    if (t == 1) {
        for (int i = 0; i < n; ++i) fn(i, 0);
        return;
    }
    const int chunk = (n + t - 1) / t;
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (int s = 0; s < t; ++s) {
        const int lo = s * chunk;
        const int hi = std::min(n, lo + chunk);
        pool.emplace_back([lo, hi, s, &fn] {
            for (int i = lo; i < hi; ++i) fn(i, s);
        });
    }
    for (auto& th : pool) th.join();
}

} // namespace poseret
