#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "poseret/geometry.hpp"
#include "poseret/render.hpp"
#include "poseret/rng.hpp"

namespace poseret {

struct LossConfig {
    double alpha = 1.0;   // dimension-loss weight
    double beta = 1e-5;   // pose-stage weight decay
    double gamma = 1e-3;  // similarity-stage weight decay
    double margin = 1.0;  // triplet margin
    double delta = 0.01;  // Huber transition point

    void validate() const; // all strictly positive
};

/// Componentwise Huber: 0.5 r^2 inside |r| <= delta, linear outside.
/// Returns (value, derivative).
std::pair<double, double> huber(double r, double delta);

/// Sum of componentwise Huber terms over the 16 projection coordinates.
double proj_loss(const std::vector<Eigen::Vector2d>& pred,
                 const std::vector<Eigen::Vector2d>& gt, double delta);

/// Sum of componentwise Huber terms over the 3 dimension values.
double dim_loss(const Eigen::Vector3d& pred, const Eigen::Vector3d& gt, double delta);

double pose_loss(double proj_l, double dim_l, double weight_sq_norm, const LossConfig& cfg);

struct TripletGrad {
    double value = 0.0;
    double d_s_plus = 0.0;
    double d_s_minus = 0.0;
};

/// Hinge max(0, s_plus - s_minus + m) with subgradient 0 at the inactive margin.
TripletGrad triplet_loss(double s_plus, double s_minus, double m);

double similarity_loss(double descr_l, double weight_sq_norm, const LossConfig& cfg);

struct NetConfig {
    int input = 64;                       // square grayscale input edge
    int first_kernel = 7;                 // later stages use 3x3
    std::vector<int> channels = {8, 16, 32};
    int descriptor_dim = 64;
    bool pose_head = true;                // 19-output linear head

    void validate() const;
};

struct TensorInfo {
    std::string name;
    std::vector<int> dims;
    int offset = 0;
    int size = 0;
    bool is_bias = false;
};

/// Conv stages (ReLU + 2x mean-pool each), global mean-pool, FC+ReLU descriptor,
/// optional linear pose head. All parameters live in one flat vector.
struct TinyNet {
    NetConfig cfg;
    std::vector<double> params;

    static TinyNet init(const NetConfig& cfg, Rng& rng); // He-normal, head bias 0.5

    const std::vector<TensorInfo>& tensors() const;
    int param_count() const;
    double weight_sq_norm() const;

private:
    friend struct NetTrace;
    friend TinyNet make_net_unchecked(NetConfig cfg, std::vector<double> params);
    std::vector<TensorInfo> tensors_;
};

/// Reusable per-call activation storage; required for net_backward.
struct NetTrace {
    std::vector<std::vector<double>> stage_pre;    // pre-ReLU conv outputs
    std::vector<std::vector<double>> stage_pooled; // post-pool activations (index 0 = input)
    std::vector<double> global_pooled;
    std::vector<double> fc_pre;
    std::vector<double> features;
    std::vector<double> head;
    std::vector<double> scratch;
};

struct ForwardOut {
    std::vector<double> features; // descriptor_dim, post-ReLU
    std::vector<double> head;     // 19 values, empty when the net has no head
};

ForwardOut net_forward(const TinyNet& net, const std::vector<double>& img,
                       NetTrace* trace = nullptr);

/// Gradient of an upstream-weighted output sum w.r.t. every parameter.
/// d_features/d_head may be empty (treated as zero).
std::vector<double> net_backward(const TinyNet& net, const NetTrace& trace,
                                 const std::vector<double>& d_features,
                                 const std::vector<double>& d_head,
                                 std::vector<double>* grad_out = nullptr);

/// Descriptor as stored and matched everywhere: features quantized to float32.
std::vector<float> descriptor_of(const TinyNet& net, const std::vector<double>& img);

/// Foreground depths min-max normalized into [0.25, 0.75]; background stays 0.
std::vector<double> depth_to_input(const DepthImage& img);
std::vector<double> shaded_to_input(const ShadedImage& img);

struct AdamState {
    std::vector<double> m, v;
    std::int64_t step = 0;
};

void adam_step(std::vector<double>& weights, const std::vector<double>& grads, AdamState& state,
               double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct TrainSchedule {
    int batch = 16;
    int epochs = 60;
    double lr = 1e-4;
    std::vector<int> lr_drops = {30, 54}; // lr /= 10 entering these 0-based epochs
    int threads = 1;

    void validate() const;
    double lr_for_epoch(int epoch) const;
};

struct PoseSample {
    std::vector<double> input;           // camera-domain image
    std::array<Eigen::Vector2d, 8> proj; // ground-truth normalized projections
    Eigen::Vector3d dims;
};

/// Stage 1: fit the 19-output head on camera images. Returns per-epoch mean loss.
std::vector<double> train_pose(TinyNet& net, const std::vector<PoseSample>& data,
                               const LossConfig& cfg, const TrainSchedule& sched, Rng& rng);

struct EmbedSample {
    std::vector<double> camera_input; // anchor
    std::vector<double> depth_input;  // positive, same model + pose
    int model_index = 0;
};

/// Supplies the depth-domain input of negative model `model_index` rendered
/// under sample `sample_index`'s pose.
using NegativeProvider = std::function<std::vector<double>(int sample_index, int model_index)>;

/// Stage 2: real_net stays frozen, synth_net learns to match its descriptors.
/// Returns per-epoch mean similarity loss.
std::vector<double> train_embedders(const TinyNet& real_net, TinyNet& synth_net,
                                    const std::vector<EmbedSample>& data, int model_count,
                                    const NegativeProvider& negative, const LossConfig& cfg,
                                    const TrainSchedule& sched, Rng& rng);

void save_weights(const TinyNet& net, std::ostream& out);
TinyNet load_weights(std::istream& in);
void save_weights_file(const TinyNet& net, const std::string& path);
TinyNet load_weights_file(const std::string& path);

/// Deterministic chunked parallel map: slot `t` sees only indices of chunk `t`,
/// callers reduce slots in index order.
void parallel_for(int n, int threads, const std::function<void(int index, int slot)>& fn);

} // namespace poseret
