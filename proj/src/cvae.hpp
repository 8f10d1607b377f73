#pragma once

#include "nn.hpp"

namespace mcq {

/// Conditional VAE over (state, action) pairs acting as the empirical
/// behavior model. Encoder maps (s,a) to a diagonal Gaussian over the
/// latent; decoder maps (s,z) to a tanh-squashed action.
struct CvaeModel {
    std::size_t state_dim = 0;
    std::size_t action_dim = 0;
    std::size_t latent_dim = 0;  // 2 x action_dim
    DenseNet encoder;            // (s,a) -> [latent mean | latent raw log-std]
    DenseNet decoder;            // (s,z) -> raw action (tanh applied here)

    static CvaeModel make(std::size_t state_dim, std::size_t action_dim,
                          const std::vector<std::size_t>& hidden, Rng& rng);
};

/// Encoder log-std clamp; tighter than the policy head since the latent
/// scale has no useful dynamic range beyond this.
constexpr double kCvaeLogStdMin = -4.0;
constexpr double kCvaeLogStdMax = 15.0;

struct CvaeLossResult {
    double loss = 0.0;
    double reconstruction = 0.0;
    double kl = 0.0;
    NetGrads encoder_grads;
    NetGrads decoder_grads;
};

/// Reconstruction + kl_weight * KL, one reparameterized latent draw per datum.
/// The latent noise comes from `rng`; with a fixed stream the loss is a pure
/// function of the parameters, which the gradient tests rely on.
CvaeLossResult cvae_loss(const CvaeModel& model, const Mat& states,
                         const Mat& actions, Rng& rng, double kl_weight = 1.0);

struct CvaeOptimizer {
    AdamState encoder;
    AdamState decoder;

    static CvaeOptimizer make(const CvaeModel& model, double lr);
};

/// One Adam step on the loss above. Returns the pre-step loss value.
double cvae_train_step(CvaeModel& model, CvaeOptimizer& opt, const Mat& states,
                       const Mat& actions, Rng& rng, double kl_weight = 1.0);

/// Draws `count` actions per state from the plain latent prior. Result is
/// [states.rows * count x action_dim], grouped by state (row-major).
/// latent_clip > 0 clips the prior draws to [-latent_clip, latent_clip]
/// (off by default).
Mat cvae_sample(const CvaeModel& model, const Mat& states, std::size_t count,
                Rng& rng, double latent_clip = 0.0);

}  // namespace mcq
