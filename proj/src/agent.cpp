#include "agent.hpp"

#include <algorithm>
#include <cmath>

namespace mcq {

namespace {

constexpr std::uint64_t kStreamTrain = 777;

// volatile keeps the float round trip from being elided at -O3
double round_f32(double v) {
    volatile float f = static_cast<float>(v);
    return static_cast<double>(f);
}

void quantize_vec(std::vector<double>& v) {
    for (auto& x : v) x = round_f32(x);
}

void quantize_net(DenseNet& net) {
    for (auto& l : net.layers) {
        quantize_vec(l.w.data);
        quantize_vec(l.b);
    }
}

void quantize_adam(AdamState& st) {
    for (auto& m : st.mw) quantize_vec(m.data);
    for (auto& m : st.vw) quantize_vec(m.data);
    for (auto& b : st.mb) quantize_vec(b);
    for (auto& b : st.vb) quantize_vec(b);
}

}  // namespace

std::uint64_t step_noise_seed(std::uint64_t run_seed, std::uint64_t step) {
    return mix_seed(mix_seed(run_seed, kStreamTrain), step);
}

double AgentState::target_entropy() const {
    if (std::isnan(hyper.target_entropy))
        return -static_cast<double>(action_dim);
    return hyper.target_entropy;
}

double AgentState::pseudo_target_clip() const {
    if (std::isnan(hyper.clip_pseudo_target))
        return r_max_env / (1.0 - hyper.gamma);
    return hyper.clip_pseudo_target;
}

AgentState AgentState::make(std::size_t obs_dim, std::size_t action_dim,
                            const McqHyper& hyper, double r_max_env,
                            std::uint64_t init_seed) {
    if (!(hyper.lambda > 0.0 && hyper.lambda <= 1.0))
        fail(ErrorKind::dimension_mismatch, "lambda must lie in (0,1]");
    if (hyper.n_ood < 1)
        fail(ErrorKind::dimension_mismatch, "n_ood must be >= 1");
    AgentState agent;
    agent.obs_dim = obs_dim;
    agent.action_dim = action_dim;
    agent.hyper = hyper;
    agent.r_max_env = r_max_env;

    const std::size_t head_out =
        hyper.algorithm == AgentAlgorithm::sac ? 2 * action_dim : action_dim;
    std::vector<std::size_t> actor_sizes{obs_dim};
    actor_sizes.insert(actor_sizes.end(), hyper.actor_hidden.begin(),
                       hyper.actor_hidden.end());
    actor_sizes.push_back(head_out);
    std::vector<std::size_t> critic_sizes{obs_dim + action_dim};
    critic_sizes.insert(critic_sizes.end(), hyper.critic_hidden.begin(),
                        hyper.critic_hidden.end());
    critic_sizes.push_back(1);

    Rng actor_rng = Rng::stream(init_seed, 11);
    Rng critic1_rng = Rng::stream(init_seed, 12);
    Rng critic2_rng = Rng::stream(init_seed, 13);
    Rng cvae_rng = Rng::stream(init_seed, 14);

    agent.actor = DenseNet::make(actor_sizes, hyper.activation, actor_rng);
    agent.critic1 = DenseNet::make(critic_sizes, hyper.activation, critic1_rng);
    agent.critic2 = DenseNet::make(critic_sizes, hyper.activation, critic2_rng);
    agent.target1 = agent.critic1;
    agent.target2 = agent.critic2;
    if (hyper.algorithm == AgentAlgorithm::td3) agent.target_actor = agent.actor;
    agent.cvae = CvaeModel::make(obs_dim, action_dim, hyper.cvae_hidden, cvae_rng);

    AdamConfig actor_cfg;
    actor_cfg.lr = hyper.actor_lr;
    AdamConfig critic_cfg;
    critic_cfg.lr = hyper.critic_lr;
    agent.actor_opt = AdamState::make(agent.actor, actor_cfg);
    agent.critic1_opt = AdamState::make(agent.critic1, critic_cfg);
    agent.critic2_opt = AdamState::make(agent.critic2, critic_cfg);
    agent.alpha_opt.cfg.lr = hyper.alpha_lr;
    agent.cvae_opt = CvaeOptimizer::make(agent.cvae, hyper.cvae_lr);
    return agent;
}

Batch sample_batch(const Dataset& data, std::size_t batch_size, Rng& rng) {
    if (data.transitions.empty()) fail(ErrorKind::empty_dataset, "sample_batch");
    const std::size_t sdim = data.state_dim;
    const std::size_t adim = data.action_dim;
    Batch b;
    b.s = Mat(batch_size, sdim);
    b.a = Mat(batch_size, adim);
    b.s_next = Mat(batch_size, sdim);
    b.r.resize(batch_size);
    b.d.resize(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
        const auto& tr = data.transitions[rng.uniform_int(data.transitions.size())];
        std::copy(tr.s.begin(), tr.s.end(), b.s.row(i));
        std::copy(tr.a.begin(), tr.a.end(), b.a.row(i));
        std::copy(tr.s_next.begin(), tr.s_next.end(), b.s_next.row(i));
        b.r[i] = tr.r;
        b.d[i] = static_cast<double>(tr.d);
    }
    return b;
}

std::vector<double> in_dist_target(const Batch& batch, const AgentState& agent,
                                   std::uint64_t noise_seed) {
    const std::size_t b = batch.s.rows;
    const Mat head = forward(agent.actor, batch.s_next);
    Rng rng = Rng::stream(noise_seed, StepStream::target);
    const GaussianSample sample = sample_tanh_gaussian(head, agent.action_dim, rng);
    const Mat q_in = hstack(batch.s_next, sample.action);
    const Mat q1 = forward(agent.target1, q_in);
    const Mat q2 = forward(agent.target2, q_in);
    const double alpha = agent.alpha();
    std::vector<double> y(b);
    for (std::size_t i = 0; i < b; ++i) {
        const double qmin = std::min(q1.at(i, 0), q2.at(i, 0));
        y[i] = batch.r[i] + agent.hyper.gamma * (1.0 - batch.d[i]) *
                                (qmin - alpha * sample.log_prob[i]);
    }
    return y;
}

std::vector<double> in_dist_target_deterministic(const Batch& batch,
                                                 const AgentState& agent) {
    const std::size_t b = batch.s.rows;
    const Mat raw = forward(*agent.target_actor, batch.s_next);
    const Mat action = tanh_mean_action(raw, agent.action_dim);
    const Mat q_in = hstack(batch.s_next, action);
    const Mat q1 = forward(agent.target1, q_in);
    const Mat q2 = forward(agent.target2, q_in);
    std::vector<double> y(b);
    for (std::size_t i = 0; i < b; ++i) {
        const double qmin = std::min(q1.at(i, 0), q2.at(i, 0));
        y[i] = batch.r[i] + agent.hyper.gamma * (1.0 - batch.d[i]) * qmin;
    }
    return y;
}

std::vector<double> ood_pseudo_target(const Mat& s_in, const AgentState& agent,
                                      std::size_t n_ood, std::uint64_t noise_seed) {
    const std::size_t rows = s_in.rows;
    Rng rng = Rng::stream(noise_seed, StepStream::pseudo);
    const Mat draws =
        cvae_sample(agent.cvae, s_in, n_ood, rng, agent.hyper.latent_clip);
    const Mat q_in = hstack(tile_rows(s_in, n_ood), draws);
    const DenseNet& c1 =
        agent.hyper.use_target_critics_for_pseudo ? agent.target1 : agent.critic1;
    const DenseNet& c2 =
        agent.hyper.use_target_critics_for_pseudo ? agent.target2 : agent.critic2;
    const Mat q1 = forward(c1, q_in);
    const Mat q2 = forward(c2, q_in);

    const double clip = agent.pseudo_target_clip();
    std::vector<double> y(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        double m1 = -std::numeric_limits<double>::infinity();
        double m2 = m1;
        for (std::size_t k = 0; k < n_ood; ++k) {
            m1 = std::max(m1, q1.at(i * n_ood + k, 0));
            m2 = std::max(m2, q2.at(i * n_ood + k, 0));
        }
        double v = agent.hyper.ood_aggregator == OodAggregator::min
                       ? std::min(m1, m2)
                       : 0.5 * (m1 + m2);
        v = std::min(v, clip);
        y[i] = v - agent.hyper.pseudo_target_margin;
    }
    return y;
}

CriticInputs build_critic_inputs(const Batch& batch, const AgentState& agent,
                                 std::uint64_t noise_seed) {
    CriticInputs inputs;
    inputs.in_dist = hstack(batch.s, batch.a);
    inputs.y = agent.hyper.algorithm == AgentAlgorithm::sac
                   ? in_dist_target(batch, agent, noise_seed)
                   : in_dist_target_deterministic(batch, agent);
    double acc = 0.0;
    for (double v : inputs.y) acc += v;
    inputs.target_mean = acc / static_cast<double>(inputs.y.size());

    if (agent.hyper.lambda >= 1.0) return inputs;  // pure base algorithm

    const Mat s_in = vstack(batch.s, batch.s_next);
    const std::vector<double> pseudo =
        ood_pseudo_target(s_in, agent, agent.hyper.n_ood, noise_seed);

    if (agent.hyper.algorithm == AgentAlgorithm::sac) {
        const Mat head = forward(agent.actor, s_in);
        const Mat head_tiled = tile_rows(head, agent.hyper.n_ood);
        Rng rng = Rng::stream(noise_seed, StepStream::ood);
        Mat zeta(head_tiled.rows, agent.action_dim);
        for (auto& v : zeta.data) v = rng.normal();
        const GaussianSample sample =
            squash_with_noise(head_tiled, agent.action_dim, zeta);
        inputs.ood = hstack(tile_rows(s_in, agent.hyper.n_ood), sample.action);
        inputs.y_prime.resize(inputs.ood.rows);
        for (std::size_t i = 0; i < s_in.rows; ++i)
            for (std::size_t k = 0; k < agent.hyper.n_ood; ++k)
                inputs.y_prime[i * agent.hyper.n_ood + k] = pseudo[i];
    } else {
        const Mat raw = forward(agent.actor, s_in);
        const Mat action = tanh_mean_action(raw, agent.action_dim);
        inputs.ood = hstack(s_in, action);
        inputs.y_prime = pseudo;
    }
    return inputs;
}

CriticLossResult critic_loss(const AgentState& agent, const CriticInputs& inputs,
                             double lambda) {
    CriticLossResult res;
    res.grads1 = NetGrads::zeros_like(agent.critic1);
    res.grads2 = NetGrads::zeros_like(agent.critic2);

    const DenseNet* critics[2] = {&agent.critic1, &agent.critic2};
    NetGrads* grads[2] = {&res.grads1, &res.grads2};
    const std::size_t b = inputs.in_dist.rows;

    for (int i = 0; i < 2; ++i) {
        ForwardCache cache;
        const Mat q = forward(*critics[i], inputs.in_dist, &cache);
        Mat dout(b, 1);
        double mse = 0.0;
        double qmean = 0.0;
        for (std::size_t r = 0; r < b; ++r) {
            const double diff = q.at(r, 0) - inputs.y[r];
            mse += diff * diff;
            qmean += q.at(r, 0);
            dout.at(r, 0) = lambda * 2.0 * diff / static_cast<double>(b);
        }
        mse /= static_cast<double>(b);
        res.loss += lambda * mse;
        res.q_in_dist_mean += 0.5 * qmean / static_cast<double>(b);
        backward(*critics[i], cache, dout, *grads[i]);

        if (lambda < 1.0 && inputs.ood.rows > 0) {
            ForwardCache ocache;
            const Mat qo = forward(*critics[i], inputs.ood, &ocache);
            const std::size_t n = inputs.ood.rows;
            Mat dood(n, 1);
            double omse = 0.0;
            for (std::size_t r = 0; r < n; ++r) {
                const double diff = qo.at(r, 0) - inputs.y_prime[r];
                omse += diff * diff;
                dood.at(r, 0) = (1.0 - lambda) * 2.0 * diff / static_cast<double>(n);
            }
            omse /= static_cast<double>(n);
            res.loss += (1.0 - lambda) * omse;
            backward(*critics[i], ocache, dood, *grads[i]);
        }
    }
    if (!std::isfinite(res.loss)) fail(ErrorKind::non_finite_loss, "critic loss");
    return res;
}

double actor_loss_grads(const Batch& batch, const AgentState& agent,
                        const Mat& zeta, NetGrads& grads,
                        ActorAlphaResult* stats) {
    const std::size_t b = batch.s.rows;
    ForwardCache actor_cache;
    const Mat head = forward(agent.actor, batch.s, &actor_cache);
    const GaussianSample sample = squash_with_noise(head, agent.action_dim, zeta);

    const Mat q_in = hstack(batch.s, sample.action);
    ForwardCache c1_cache, c2_cache;
    const Mat q1 = forward(agent.critic1, q_in, &c1_cache);
    const Mat q2 = forward(agent.critic2, q_in, &c2_cache);

    const double alpha = agent.alpha();
    Mat dq1(b, 1), dq2(b, 1);
    double loss = 0.0;
    double logp_mean = 0.0;
    double q_mean = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
        const double v1 = q1.at(r, 0);
        const double v2 = q2.at(r, 0);
        loss += alpha * sample.log_prob[r] - std::min(v1, v2);
        logp_mean += sample.log_prob[r];
        q_mean += 0.5 * (v1 + v2);
        const double scale = -1.0 / static_cast<double>(b);
        if (v1 <= v2)
            dq1.at(r, 0) = scale;
        else
            dq2.at(r, 0) = scale;
    }
    loss /= static_cast<double>(b);
    logp_mean /= static_cast<double>(b);
    if (!std::isfinite(loss)) fail(ErrorKind::non_finite_loss, "actor loss");

    // Gradient through the chosen critic into its action input.
    NetGrads scratch1 = NetGrads::zeros_like(agent.critic1);
    NetGrads scratch2 = NetGrads::zeros_like(agent.critic2);
    const Mat din1 = backward(agent.critic1, c1_cache, dq1, scratch1);
    const Mat din2 = backward(agent.critic2, c2_cache, dq2, scratch2);
    Mat d_action(b, agent.action_dim);
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t k = 0; k < agent.action_dim; ++k)
            d_action.at(r, k) = din1.at(r, agent.obs_dim + k) +
                                din2.at(r, agent.obs_dim + k);

    std::vector<double> d_log_prob(b, alpha / static_cast<double>(b));
    const Mat d_head = gaussian_head_backward(sample, d_action, d_log_prob);
    backward(agent.actor, actor_cache, d_head, grads);

    if (stats) {
        stats->actor_loss = loss;
        stats->q_ood_mean = q_mean / static_cast<double>(b);
        stats->entropy_estimate = -logp_mean;
    }
    return loss;
}

double actor_loss_grads_deterministic(const Batch& batch, const AgentState& agent,
                                      NetGrads& grads, ActorAlphaResult* stats) {
    const std::size_t b = batch.s.rows;
    ForwardCache actor_cache;
    const Mat raw = forward(agent.actor, batch.s, &actor_cache);
    const Mat action = tanh_mean_action(raw, agent.action_dim);

    const Mat q_in = hstack(batch.s, action);
    ForwardCache c1_cache;
    const Mat q1 = forward(agent.critic1, q_in, &c1_cache);
    const Mat q2 = forward(agent.critic2, q_in);

    Mat dq1(b, 1);
    double loss = 0.0;
    double q_mean = 0.0;
    for (std::size_t r = 0; r < b; ++r) {
        loss -= q1.at(r, 0);
        q_mean += 0.5 * (q1.at(r, 0) + q2.at(r, 0));
        dq1.at(r, 0) = -1.0 / static_cast<double>(b);
    }
    loss /= static_cast<double>(b);
    if (!std::isfinite(loss)) fail(ErrorKind::non_finite_loss, "actor loss");

    NetGrads scratch = NetGrads::zeros_like(agent.critic1);
    const Mat din = backward(agent.critic1, c1_cache, dq1, scratch);
    Mat d_raw(b, agent.action_dim);
    for (std::size_t r = 0; r < b; ++r)
        for (std::size_t k = 0; k < agent.action_dim; ++k) {
            const double a = action.at(r, k);
            d_raw.at(r, k) = din.at(r, agent.obs_dim + k) * (1.0 - a * a);
        }
    backward(agent.actor, actor_cache, d_raw, grads);

    if (stats) {
        stats->actor_loss = loss;
        stats->q_ood_mean = q_mean / static_cast<double>(b);
    }
    return loss;
}

ActorAlphaResult actor_alpha_step(const Batch& batch, AgentState& agent,
                                  std::uint64_t noise_seed) {
    Rng rng = Rng::stream(noise_seed, StepStream::actor);
    Mat zeta(batch.s.rows, agent.action_dim);
    for (auto& v : zeta.data) v = rng.normal();

    ActorAlphaResult res;
    NetGrads actor_grads = NetGrads::zeros_like(agent.actor);
    actor_loss_grads(batch, agent, zeta, actor_grads, &res);
    adam_step(agent.actor, agent.actor_opt, actor_grads);

    // Temperature loss -log_alpha * (log pi + target entropy), detached log pi.
    const double alpha_grad = res.entropy_estimate - agent.target_entropy();
    adam_step_scalar(agent.log_alpha, agent.alpha_opt, alpha_grad);
    res.alpha = agent.alpha();
    return res;
}

ActorAlphaResult actor_step_deterministic(const Batch& batch, AgentState& agent) {
    ActorAlphaResult res;
    NetGrads actor_grads = NetGrads::zeros_like(agent.actor);
    actor_loss_grads_deterministic(batch, agent, actor_grads, &res);
    adam_step(agent.actor, agent.actor_opt, actor_grads);
    res.alpha = agent.alpha();
    return res;
}

StepMetrics train_step(AgentState& agent, const Dataset& data,
                       std::uint64_t run_seed) {
    const std::uint64_t noise_seed = step_noise_seed(run_seed, agent.step);

    Rng batch_rng = Rng::stream(noise_seed, StepStream::batch);
    const Batch batch = sample_batch(data, agent.hyper.batch_size, batch_rng);

    StepMetrics metrics;
    Rng cvae_rng = Rng::stream(noise_seed, StepStream::cvae);
    metrics.cvae_loss = cvae_train_step(agent.cvae, agent.cvae_opt, batch.s, batch.a,
                                        cvae_rng, agent.hyper.kl_weight);

    const CriticInputs inputs = build_critic_inputs(batch, agent, noise_seed);
    CriticLossResult closs = critic_loss(agent, inputs, agent.hyper.lambda);
    adam_step(agent.critic1, agent.critic1_opt, closs.grads1);
    adam_step(agent.critic2, agent.critic2_opt, closs.grads2);

    const ActorAlphaResult ares =
        agent.hyper.algorithm == AgentAlgorithm::sac
            ? actor_alpha_step(batch, agent, noise_seed)
            : actor_step_deterministic(batch, agent);

    polyak_update(agent.target1, agent.critic1, agent.hyper.tau);
    polyak_update(agent.target2, agent.critic2, agent.hyper.tau);
    if (agent.target_actor)
        polyak_update(*agent.target_actor, agent.actor, agent.hyper.tau);

    ++agent.step;
    metrics.critic_loss = closs.loss;
    metrics.actor_loss = ares.actor_loss;
    metrics.alpha = ares.alpha;
    metrics.q_in_dist = closs.q_in_dist_mean;
    metrics.q_ood = ares.q_ood_mean;
    metrics.target_q = inputs.target_mean;
    return metrics;
}

std::vector<double> agent_eval_action(const AgentState& agent,
                                      const std::vector<double>& obs) {
    Mat in(1, obs.size());
    std::copy(obs.begin(), obs.end(), in.row(0));
    const Mat head = forward(agent.actor, in);
    const Mat a = tanh_mean_action(head, agent.action_dim);
    return std::vector<double>(a.row(0), a.row(0) + agent.action_dim);
}

std::vector<double> agent_explore_action(const AgentState& agent,
                                         const std::vector<double>& obs, Rng& rng) {
    Mat in(1, obs.size());
    std::copy(obs.begin(), obs.end(), in.row(0));
    const Mat head = forward(agent.actor, in);
    if (agent.hyper.algorithm == AgentAlgorithm::td3) {
        const Mat a = tanh_mean_action(head, agent.action_dim);
        return std::vector<double>(a.row(0), a.row(0) + agent.action_dim);
    }
    const GaussianSample sample = sample_tanh_gaussian(head, agent.action_dim, rng);
    return std::vector<double>(sample.action.row(0),
                               sample.action.row(0) + agent.action_dim);
}

void quantize_agent(AgentState& agent) {
    quantize_net(agent.actor);
    quantize_net(agent.critic1);
    quantize_net(agent.critic2);
    quantize_net(agent.target1);
    quantize_net(agent.target2);
    if (agent.target_actor) quantize_net(*agent.target_actor);
    quantize_net(agent.cvae.encoder);
    quantize_net(agent.cvae.decoder);
    quantize_adam(agent.actor_opt);
    quantize_adam(agent.critic1_opt);
    quantize_adam(agent.critic2_opt);
    quantize_adam(agent.cvae_opt.encoder);
    quantize_adam(agent.cvae_opt.decoder);
    agent.log_alpha = round_f32(agent.log_alpha);
    agent.alpha_opt.m = round_f32(agent.alpha_opt.m);
    agent.alpha_opt.v = round_f32(agent.alpha_opt.v);
}

}  // namespace mcq
