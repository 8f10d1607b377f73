#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cvae.hpp"
#include "nn.hpp"
#include "tabular.hpp"

namespace mcq {

enum class OodAggregator { min, mean };
enum class AgentAlgorithm { sac, td3 };

struct McqHyper {
    AgentAlgorithm algorithm = AgentAlgorithm::sac;
    double lambda = 0.9;          // weight on the standard Bellman term
    std::size_t n_ood = 10;       // sampled actions per state
    std::size_t batch_size = 256;
    double gamma = 0.99;
    double tau = 5e-3;
    double actor_lr = 3e-4;
    double critic_lr = 3e-4;
    double alpha_lr = 3e-4;
    double cvae_lr = 1e-3;
    OodAggregator ood_aggregator = OodAggregator::min;
    /// NaN means the standard default -action_dim.
    double target_entropy = std::numeric_limits<double>::quiet_NaN();
    double pseudo_target_margin = 0.0;
    /// NaN means r_max_env / (1 - gamma).
    double clip_pseudo_target = std::numeric_limits<double>::quiet_NaN();
    bool use_target_critics_for_pseudo = false;
    double kl_weight = 1.0;
    double latent_clip = 0.0;  // 0 disables latent clipping at sample time
    std::vector<std::size_t> actor_hidden = {16, 16};
    std::vector<std::size_t> critic_hidden = {16, 16};
    std::vector<std::size_t> cvae_hidden = {32, 32};
    Activation activation = Activation::relu;
};

/// Everything one training run mutates: actor, twin critics and targets,
/// behavior model, entropy temperature, optimizers and the step counter.
struct AgentState {
    std::size_t obs_dim = 0;
    std::size_t action_dim = 0;
    McqHyper hyper;
    double r_max_env = 1.0;

    DenseNet actor;  // sac: outputs [mean | raw log-std]; td3: outputs action
    DenseNet critic1, critic2;
    DenseNet target1, target2;
    std::optional<DenseNet> target_actor;  // td3 only
    CvaeModel cvae;

    double log_alpha = 0.0;
    AdamState actor_opt, critic1_opt, critic2_opt;
    ScalarAdam alpha_opt;
    CvaeOptimizer cvae_opt;
    std::uint64_t step = 0;

    double alpha() const { return std::exp(log_alpha); }
    double target_entropy() const;
    double pseudo_target_clip() const;

    static AgentState make(std::size_t obs_dim, std::size_t action_dim,
                           const McqHyper& hyper, double r_max_env,
                           std::uint64_t init_seed);
};

/// Substream tags inside one training step. Every consumer of randomness in
/// train_step derives its generator as Rng::stream(noise_seed, tag), where
/// noise_seed = step_noise_seed(run_seed, step). Anything replaying a step
/// (resume, a reference implementation sharing the kernels) gets identical
/// draws regardless of which other substreams were consumed.
struct StepStream {
    static constexpr std::uint64_t batch = 0;
    static constexpr std::uint64_t cvae = 1;
    static constexpr std::uint64_t target = 2;
    static constexpr std::uint64_t pseudo = 3;
    static constexpr std::uint64_t ood = 4;
    static constexpr std::uint64_t actor = 5;
};

std::uint64_t step_noise_seed(std::uint64_t run_seed, std::uint64_t step);

struct Batch {
    Mat s, a, s_next;
    std::vector<double> r;
    std::vector<double> d;
};

/// Uniform with-replacement minibatch.
Batch sample_batch(const Dataset& data, std::size_t batch_size, Rng& rng);

/// Standard SAC target y = r + gamma (1-d) [min_i Q'_i(s', a') - alpha log pi(a'|s')]
/// with a' drawn from the current policy. Pure given noise_seed.
std::vector<double> in_dist_target(const Batch& batch, const AgentState& agent,
                                   std::uint64_t noise_seed);

/// TD3 target y = r + gamma (1-d) min_i Q'_i(s', pi'(s')), no smoothing noise.
std::vector<double> in_dist_target_deterministic(const Batch& batch,
                                                 const AgentState& agent);

/// Pseudo target per state: aggregate over critics of the max over n_ood
/// behavior-model draws of Q(s, a). Uses online critics unless the
/// target-critic variant is enabled. Pure given noise_seed.
std::vector<double> ood_pseudo_target(const Mat& s_in, const AgentState& agent,
                                      std::size_t n_ood, std::uint64_t noise_seed);

/// Frozen regression inputs for the critic update: targets never carry
/// gradients, so they are materialized once and the loss is a pure function
/// of the critic parameters afterwards.
struct CriticInputs {
    Mat in_dist;                   // [B x (obs+act)]
    std::vector<double> y;         // [B]
    Mat ood;                       // [(rows) x (obs+act)] sampled from pi
    std::vector<double> y_prime;   // one per ood row
    double target_mean = 0.0;
};

CriticInputs build_critic_inputs(const Batch& batch, const AgentState& agent,
                                 std::uint64_t noise_seed);

struct CriticLossResult {
    double loss = 0.0;
    double q_in_dist_mean = 0.0;
    NetGrads grads1, grads2;
};

/// lambda * MSE(Q_i(s,a), y) + (1-lambda) * MSE(Q_i(s_in, a_ood), y'),
/// summed over both critics.
CriticLossResult critic_loss(const AgentState& agent, const CriticInputs& inputs,
                             double lambda);

struct ActorAlphaResult {
    double actor_loss = 0.0;
    double alpha = 0.0;
    double q_ood_mean = 0.0;  // E over batch and critics of Q at pi's actions
    double entropy_estimate = 0.0;
};

/// SAC actor objective mean(alpha log pi - min_i Q_i) at reparameterized
/// actions with the given noise; fills the actor parameter gradients.
/// Pure in the actor parameters, which the gradient tests rely on.
double actor_loss_grads(const Batch& batch, const AgentState& agent,
                        const Mat& zeta, NetGrads& grads,
                        ActorAlphaResult* stats = nullptr);

/// TD3 actor objective -mean Q1(s, pi(s)); fills the actor gradients.
double actor_loss_grads_deterministic(const Batch& batch, const AgentState& agent,
                                      NetGrads& grads,
                                      ActorAlphaResult* stats = nullptr);

/// SAC actor/temperature update (ascends min-critic value plus entropy).
ActorAlphaResult actor_alpha_step(const Batch& batch, AgentState& agent,
                                  std::uint64_t noise_seed);

/// TD3 actor update (ascends Q1 at the deterministic action).
ActorAlphaResult actor_step_deterministic(const Batch& batch, AgentState& agent);

struct StepMetrics {
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double alpha = 0.0;
    double q_in_dist = 0.0;
    double q_ood = 0.0;
    double target_q = 0.0;
    double cvae_loss = 0.0;
};

/// One full training step (behavior model, critics, actor, temperature,
/// Polyak targets) in that order. All randomness is derived from
/// (run_seed, agent.step), so resumed runs replay the same stream.
StepMetrics train_step(AgentState& agent, const Dataset& data,
                       std::uint64_t run_seed);

/// Deterministic evaluation action (tanh of the policy mean).
std::vector<double> agent_eval_action(const AgentState& agent,
                                      const std::vector<double>& obs);

/// Stochastic action for online interaction.
std::vector<double> agent_explore_action(const AgentState& agent,
                                         const std::vector<double>& obs, Rng& rng);

/// Rounds every learned parameter and optimizer moment to 32-bit float
/// precision, the checkpoint storage type. Called at checkpoint writes so a
/// resumed run and the live run share the exact same state.
void quantize_agent(AgentState& agent);

}  // namespace mcq
