#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "mat.hpp"
#include "rng.hpp"

namespace mcq {

enum class Activation { relu, tanh };

struct DenseLayer {
    Mat w;                   // [in x out]
    std::vector<double> b;   // [out]
};

/// Plain multilayer perceptron: affine + activation on hidden layers,
/// linear output. All math runs in double; checkpoints quantize to 32-bit
/// floats (see checkpoint.hpp).
struct DenseNet {
    std::vector<std::size_t> layer_sizes;
    Activation activation = Activation::relu;
    std::vector<DenseLayer> layers;

    /// Fan-in scaled uniform init, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    static DenseNet make(const std::vector<std::size_t>& sizes, Activation act,
                         Rng& rng);

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t output_dim() const { return layer_sizes.back(); }
    std::size_t param_count() const;
};

/// Intermediate activations kept for the hand-written backward pass.
struct ForwardCache {
    Mat input;
    std::vector<Mat> pre;   // pre-activation per layer
    std::vector<Mat> post;  // post-activation per hidden layer
};

Mat forward(const DenseNet& net, const Mat& input, ForwardCache* cache = nullptr);

struct NetGrads {
    std::vector<Mat> dw;
    std::vector<std::vector<double>> db;

    static NetGrads zeros_like(const DenseNet& net);
    void add(const NetGrads& other);
    void scale(double factor);
};

/// Reverse pass. Accumulates parameter gradients into `grads` and returns
/// the gradient with respect to the input batch.
Mat backward(const DenseNet& net, const ForwardCache& cache, const Mat& dout,
             NetGrads& grads);

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamConfig cfg;
    std::uint64_t step = 0;
    std::vector<Mat> mw, vw;
    std::vector<std::vector<double>> mb, vb;

    static AdamState make(const DenseNet& net, const AdamConfig& cfg);
};

/// Standard Adam with bias correction.
void adam_step(DenseNet& net, AdamState& state, const NetGrads& grads);

struct ScalarAdam {
    AdamConfig cfg;
    std::uint64_t step = 0;
    double m = 0.0;
    double v = 0.0;
};

void adam_step_scalar(double& param, ScalarAdam& state, double grad);

// --- parameter flattening (grad checks, checkpoints, Polyak) ---

std::vector<double> flatten_params(const DenseNet& net);
void unflatten_params(DenseNet& net, const std::vector<double>& flat);
std::vector<double*> param_pointers(DenseNet& net);

/// target <- tau * online + (1 - tau) * target.
void polyak_update(DenseNet& target, const DenseNet& online, double tau);

// --- tanh-squashed Gaussian head ---

constexpr double kLogStdMin = -20.0;
constexpr double kLogStdMax = 2.0;

/// Output of sampling the squashed Gaussian policy head. The head input is
/// the actor net output with 2*action_dim columns: means then raw log-stds.
struct GaussianSample {
    Mat mean;        // [B x A]
    Mat log_std;     // clamped
    Mat clamp_mask;  // 1 where the raw log-std was inside the clamp range
    Mat zeta;        // the standard normal draws
    Mat pre_squash;  // u = mean + exp(log_std) * zeta
    Mat action;      // tanh(u), in (-1,1)^A
    std::vector<double> log_prob;  // per row, tanh correction included
};

GaussianSample sample_tanh_gaussian(const Mat& head_out, std::size_t action_dim,
                                    Rng& rng);

/// Same but with externally supplied noise (one row per head row).
GaussianSample squash_with_noise(const Mat& head_out, std::size_t action_dim,
                                 const Mat& zeta);

/// Deterministic evaluation action tanh(mean).
Mat tanh_mean_action(const Mat& head_out, std::size_t action_dim);

/// Gradient of a scalar loss through the head given dL/daction and
/// dL/dlog_prob (one entry per row; pass empty to skip). Returns the
/// gradient with respect to the raw head output.
Mat gaussian_head_backward(const GaussianSample& sample, const Mat& d_action,
                           const std::vector<double>& d_log_prob);

/// Numerically stable log(1 - tanh(x)^2).
double log_one_minus_tanh_sq(double x);

// --- finite-difference gradient verification ---

struct GradCheckReport {
    double max_rel_error = 0.0;
    std::size_t coords_checked = 0;
    std::size_t worst_coord = 0;
};

/// Central differences (h = 1e-5) on a random subset of coordinates against
/// an analytic gradient. `loss` must be a pure function of the current
/// parameter values (any sampling noise inside must be frozen).
GradCheckReport grad_check(const std::function<double()>& loss,
                           const std::vector<double*>& params,
                           const std::vector<double>& analytic_grad,
                           std::size_t max_coords, Rng& rng, double h = 1e-5);

}  // namespace mcq
