#include "runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "checkpoint.hpp"
#include "dataset_io.hpp"

namespace mcq {

namespace {

constexpr std::uint64_t kStreamAgentInit = 601;
constexpr std::uint64_t kStreamEval = 501;
constexpr std::uint64_t kStreamFtEpisode = 701;
constexpr std::uint64_t kStreamFtAction = 702;
constexpr std::uint64_t kRefsSeed = 424242;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) fail(ErrorKind::io_error, "cannot create directory '" + dir + "'");
}

void ensure_parent_dir(const std::string& path) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) {
        std::error_code ec;
        std::filesystem::create_directories(parent, ec);
        if (ec)
            fail(ErrorKind::io_error,
                 "cannot create directory '" + parent.string() + "'");
    }
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream os(path);
    if (!os) fail(ErrorKind::io_error, "cannot open '" + path + "' for writing");
    os << text;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    std::uint64_t seed, const Config& cfg) {
    std::ostringstream os;
    os << "[run_meta]\n"
       << "command = " << command << "\n"
       << "seed = " << seed << "\n"
       << "dataset_format = " << kDatasetVersion << "\n"
       << "checkpoint_format = " << kCheckpointVersion << "\n"
       << cfg.dump();
    write_text_file(out_dir + "/manifest.txt", os.str());
}

std::string metrics_row_csv(const MetricsRow& row) {
    std::ostringstream os;
    os << row.step << "," << fmt(row.critic_loss) << "," << fmt(row.actor_loss)
       << "," << fmt(row.alpha) << "," << fmt(row.q_in_dist) << ","
       << fmt(row.q_ood) << "," << fmt(row.target_q) << ","
       << fmt(row.eval_return) << "," << fmt(row.normalized_score);
    return os.str();
}

}  // namespace

const char* const kMetricsHeader =
    "step,critic_loss,actor_loss,alpha,q_in_dist,q_ood,target_q,eval_return,"
    "normalized_score";

PointEnv env_from_config(const Config& cfg) {
    PointEnvConfig ec;
    ec.dim = static_cast<std::size_t>(cfg.get_int("env", "dim", 2));
    ec.mass_mode = cfg.get("env", "mode", "position") == "mass";
    ec.step_scale = cfg.get_double("env", "step_scale", 0.1);
    ec.horizon = static_cast<std::size_t>(cfg.get_int("env", "horizon", 100));
    ec.goal = cfg.get_doubles("env", "goal");
    return PointEnv(ec);
}

BehaviorController controller_from_config(const Config& cfg) {
    BehaviorController ctrl;
    ctrl.kind = controller_kind_from_string(cfg.get("dataset", "kind", "medium"));
    ctrl.noise = cfg.get_double("dataset", "noise", 0.3);
    ctrl.gain = cfg.get_double("dataset", "gain", 2.0);
    ctrl.mix = cfg.get_double("dataset", "mix", 0.5);
    return ctrl;
}

McqHyper hyper_from_config(const Config& cfg) {
    McqHyper h;
    const std::string algo = cfg.get("train", "algorithm", "sac");
    if (algo == "sac")
        h.algorithm = AgentAlgorithm::sac;
    else if (algo == "td3")
        h.algorithm = AgentAlgorithm::td3;
    else
        fail(ErrorKind::config_error, "train.algorithm must be sac or td3");
    h.lambda = cfg.get_double("train", "lambda", 0.9);
    if (!(h.lambda > 0.0 && h.lambda <= 1.0))
        fail(ErrorKind::config_error, "train.lambda must lie in (0,1]");
    h.n_ood = static_cast<std::size_t>(cfg.get_int("train", "n_ood", 10));
    if (h.n_ood < 1) fail(ErrorKind::config_error, "train.n_ood must be >= 1");
    h.batch_size = static_cast<std::size_t>(cfg.get_int("train", "batch_size", 256));
    h.gamma = cfg.get_double("train", "gamma", 0.99);
    h.tau = cfg.get_double("train", "tau", 5e-3);
    h.actor_lr = cfg.get_double("train", "actor_lr", 3e-4);
    h.critic_lr = cfg.get_double("train", "critic_lr", 3e-4);
    h.alpha_lr = cfg.get_double("train", "alpha_lr", 3e-4);
    h.cvae_lr = cfg.get_double("train", "cvae_lr", 1e-3);
    const std::string agg = cfg.get("train", "ood_aggregator", "min");
    if (agg == "min")
        h.ood_aggregator = OodAggregator::min;
    else if (agg == "mean")
        h.ood_aggregator = OodAggregator::mean;
    else
        fail(ErrorKind::config_error, "train.ood_aggregator must be min or mean");
    if (cfg.has("train", "target_entropy"))
        h.target_entropy = cfg.get_double("train", "target_entropy", 0.0);
    h.pseudo_target_margin = cfg.get_double("train", "pseudo_target_margin", 0.0);
    if (cfg.has("train", "clip_pseudo_target"))
        h.clip_pseudo_target = cfg.get_double("train", "clip_pseudo_target", 0.0);
    h.use_target_critics_for_pseudo =
        cfg.get_bool("train", "use_target_critics_for_pseudo", false);
    h.kl_weight = cfg.get_double("train", "kl_weight", 1.0);
    h.latent_clip = cfg.get_double("train", "latent_clip", 0.0);
    h.actor_hidden = cfg.get_sizes("train", "actor_hidden", {16, 16});
    h.critic_hidden = cfg.get_sizes("train", "critic_hidden", {16, 16});
    h.cvae_hidden = cfg.get_sizes("train", "cvae_hidden", {32, 32});
    const std::string act = cfg.get("train", "activation", "relu");
    if (act == "relu")
        h.activation = Activation::relu;
    else if (act == "tanh")
        h.activation = Activation::tanh;
    else
        fail(ErrorKind::config_error, "train.activation must be relu or tanh");
    return h;
}

HarnessConfig harness_from_config(const Config& cfg) {
    HarnessConfig h;
    h.contraction_trials = static_cast<std::size_t>(
        cfg.get_int("harness", "contraction_trials", 1000));
    h.sandwich_trials =
        static_cast<std::size_t>(cfg.get_int("harness", "sandwich_trials", 200));
    h.improvement_trials = static_cast<std::size_t>(
        cfg.get_int("harness", "improvement_trials", 200));
    h.overestimation_pairs = static_cast<std::size_t>(
        cfg.get_int("harness", "overestimation_pairs", 100));
    h.min_states = static_cast<std::size_t>(cfg.get_int("harness", "min_states", 3));
    h.max_states = static_cast<std::size_t>(cfg.get_int("harness", "max_states", 20));
    h.min_actions = static_cast<std::size_t>(cfg.get_int("harness", "min_actions", 2));
    h.max_actions = static_cast<std::size_t>(cfg.get_int("harness", "max_actions", 6));
    if (cfg.has("harness", "gammas")) h.gammas = cfg.get_doubles("harness", "gammas");
    if (cfg.has("harness", "support_fractions"))
        h.support_fractions = cfg.get_doubles("harness", "support_fractions");
    h.r_max = cfg.get_double("harness", "r_max", 1.0);
    h.vi_tol = cfg.get_double("harness", "vi_tol", 1e-10);
    h.margin_tol = cfg.get_double("harness", "margin_tol", 1e-6);
    h.delta_scale = cfg.get_double("harness", "delta_scale", 1e-6);
    if (cfg.has("harness", "epsilons"))
        h.epsilons = cfg.get_doubles("harness", "epsilons");
    if (cfg.has("harness", "sample_counts")) {
        h.sample_counts.clear();
        for (double v : cfg.get_doubles("harness", "sample_counts"))
            h.sample_counts.push_back(static_cast<std::size_t>(v));
    }
    return h;
}

TaskRefs refs_from_config(const Config& cfg, const PointEnv& env) {
    if (cfg.has("env", "ref_min") && cfg.has("env", "ref_max")) {
        TaskRefs refs;
        refs.ref_min = cfg.get_double("env", "ref_min", 0.0);
        refs.ref_max = cfg.get_double("env", "ref_max", 0.0);
        if (!(refs.ref_max > refs.ref_min))
            fail(ErrorKind::degenerate_refs, "env.ref_max must exceed env.ref_min");
        return refs;
    }
    const auto episodes =
        static_cast<std::size_t>(cfg.get_int("env", "ref_episodes", 1000));
    return compute_task_refs(env, episodes, kRefsSeed);
}

std::pair<TabularMdp, TabularPolicy> mdp_from_config(const Config& cfg) {
    const auto n_states =
        static_cast<std::size_t>(cfg.get_int("mdp", "n_states", 0));
    const auto n_actions =
        static_cast<std::size_t>(cfg.get_int("mdp", "n_actions", 0));
    if (n_states == 0 || n_actions == 0)
        fail(ErrorKind::config_error, "mdp.n_states and mdp.n_actions are required");
    const double gamma = cfg.get_double("mdp", "gamma", 0.95);
    const double r_max = cfg.get_double("mdp", "r_max", 1.0);

    if (cfg.has("mdp", "transition")) {
        auto transition = cfg.get_doubles("mdp", "transition");
        auto reward = cfg.get_doubles("mdp", "reward");
        auto rho0 = cfg.get_doubles("mdp", "rho0");
        TabularMdp mdp = build_mdp(n_states, n_actions, std::move(transition),
                                   std::move(reward), std::move(rho0), gamma, r_max);
        std::vector<double> probs(n_states * n_actions,
                                  1.0 / static_cast<double>(n_actions));
        TabularPolicy mu = build_policy(n_states, n_actions, std::move(probs));
        return {std::move(mdp), std::move(mu)};
    }

    const auto seed = static_cast<std::uint64_t>(cfg.get_int("mdp", "seed", 0));
    const double frac = cfg.get_double("mdp", "support_fraction", 1.0);
    Rng rng = Rng::stream(seed, 881);
    return random_mdp(rng, n_states, n_actions, frac, gamma, r_max);
}

// --- agent persistence ---

namespace {

void append_net(std::vector<NamedTensor>& out, const std::string& prefix,
                const DenseNet& net) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& l = net.layers[i];
        out.push_back({prefix + "/w" + std::to_string(i), {l.w.rows, l.w.cols},
                       l.w.data});
        out.push_back({prefix + "/b" + std::to_string(i), {l.b.size()}, l.b});
    }
}

void load_net(const std::vector<NamedTensor>& tensors, const std::string& prefix,
              DenseNet& net) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& l = net.layers[i];
        const auto& w = find_tensor(tensors, prefix + "/w" + std::to_string(i));
        const auto& b = find_tensor(tensors, prefix + "/b" + std::to_string(i));
        if (w.data.size() != l.w.size() || b.data.size() != l.b.size())
            fail(ErrorKind::shape_mismatch,
                 "checkpoint layer '" + prefix + "' does not match the configured net");
        l.w.data = w.data;
        l.b = b.data;
    }
}

void append_adam(std::vector<NamedTensor>& out, const std::string& prefix,
                 const AdamState& st) {
    for (std::size_t i = 0; i < st.mw.size(); ++i) {
        out.push_back({prefix + "/mw" + std::to_string(i),
                       {st.mw[i].rows, st.mw[i].cols}, st.mw[i].data});
        out.push_back({prefix + "/vw" + std::to_string(i),
                       {st.vw[i].rows, st.vw[i].cols}, st.vw[i].data});
        out.push_back({prefix + "/mb" + std::to_string(i), {st.mb[i].size()},
                       st.mb[i]});
        out.push_back({prefix + "/vb" + std::to_string(i), {st.vb[i].size()},
                       st.vb[i]});
    }
    out.push_back({prefix + "/step", {1}, {static_cast<double>(st.step)}});
}

void load_adam(const std::vector<NamedTensor>& tensors, const std::string& prefix,
               AdamState& st) {
    for (std::size_t i = 0; i < st.mw.size(); ++i) {
        st.mw[i].data = find_tensor(tensors, prefix + "/mw" + std::to_string(i)).data;
        st.vw[i].data = find_tensor(tensors, prefix + "/vw" + std::to_string(i)).data;
        st.mb[i] = find_tensor(tensors, prefix + "/mb" + std::to_string(i)).data;
        st.vb[i] = find_tensor(tensors, prefix + "/vb" + std::to_string(i)).data;
    }
    st.step = static_cast<std::uint64_t>(
        find_tensor(tensors, prefix + "/step").data.at(0));
}

}  // namespace

void save_agent(AgentState& agent, const std::string& path) {
    quantize_agent(agent);
    std::vector<NamedTensor> tensors;
    append_net(tensors, "actor", agent.actor);
    append_net(tensors, "critic1", agent.critic1);
    append_net(tensors, "critic2", agent.critic2);
    append_net(tensors, "target1", agent.target1);
    append_net(tensors, "target2", agent.target2);
    if (agent.target_actor) append_net(tensors, "target_actor", *agent.target_actor);
    append_net(tensors, "cvae/encoder", agent.cvae.encoder);
    append_net(tensors, "cvae/decoder", agent.cvae.decoder);
    tensors.push_back({"alpha/log_value", {1}, {agent.log_alpha}});
    append_adam(tensors, "opt/actor", agent.actor_opt);
    append_adam(tensors, "opt/critic1", agent.critic1_opt);
    append_adam(tensors, "opt/critic2", agent.critic2_opt);
    append_adam(tensors, "opt/cvae_encoder", agent.cvae_opt.encoder);
    append_adam(tensors, "opt/cvae_decoder", agent.cvae_opt.decoder);
    tensors.push_back({"opt/alpha/m", {1}, {agent.alpha_opt.m}});
    tensors.push_back({"opt/alpha/v", {1}, {agent.alpha_opt.v}});
    tensors.push_back(
        {"opt/alpha/step", {1}, {static_cast<double>(agent.alpha_opt.step)}});
    tensors.push_back({"meta/step", {1}, {static_cast<double>(agent.step)}});
    tensors.push_back(
        {"meta/obs_dim", {1}, {static_cast<double>(agent.obs_dim)}});
    tensors.push_back(
        {"meta/action_dim", {1}, {static_cast<double>(agent.action_dim)}});
    ensure_parent_dir(path);
    write_checkpoint(path, tensors);
}

void load_agent(AgentState& agent, const std::string& path) {
    const auto tensors = read_checkpoint(path);
    if (static_cast<std::size_t>(find_tensor(tensors, "meta/obs_dim").data.at(0)) !=
            agent.obs_dim ||
        static_cast<std::size_t>(
            find_tensor(tensors, "meta/action_dim").data.at(0)) != agent.action_dim)
        fail(ErrorKind::shape_mismatch, "checkpoint dims do not match the config");
    load_net(tensors, "actor", agent.actor);
    load_net(tensors, "critic1", agent.critic1);
    load_net(tensors, "critic2", agent.critic2);
    load_net(tensors, "target1", agent.target1);
    load_net(tensors, "target2", agent.target2);
    if (agent.target_actor) load_net(tensors, "target_actor", *agent.target_actor);
    load_net(tensors, "cvae/encoder", agent.cvae.encoder);
    load_net(tensors, "cvae/decoder", agent.cvae.decoder);
    agent.log_alpha = find_tensor(tensors, "alpha/log_value").data.at(0);
    load_adam(tensors, "opt/actor", agent.actor_opt);
    load_adam(tensors, "opt/critic1", agent.critic1_opt);
    load_adam(tensors, "opt/critic2", agent.critic2_opt);
    load_adam(tensors, "opt/cvae_encoder", agent.cvae_opt.encoder);
    load_adam(tensors, "opt/cvae_decoder", agent.cvae_opt.decoder);
    agent.alpha_opt.m = find_tensor(tensors, "opt/alpha/m").data.at(0);
    agent.alpha_opt.v = find_tensor(tensors, "opt/alpha/v").data.at(0);
    agent.alpha_opt.step = static_cast<std::uint64_t>(
        find_tensor(tensors, "opt/alpha/step").data.at(0));
    agent.step =
        static_cast<std::uint64_t>(find_tensor(tensors, "meta/step").data.at(0));
}

// --- runs ---

VerifyOutcome run_verify(const Config& cfg, std::uint64_t seed,
                         const std::string& out_dir) {
    ensure_dir(out_dir);
    const HarnessConfig hcfg = harness_from_config(cfg);
    VerifyOutcome out;
    out.certificates = run_all_checks(seed, hcfg);
    out.all_hold = true;
    for (const auto& c : out.certificates) out.all_hold &= c.holds();
    out.report_path = out_dir + "/certificates.txt";
    out.jsonl_path = out_dir + "/certificates.jsonl";
    write_text_file(out.report_path, certificate_report(out.certificates));
    write_text_file(out.jsonl_path, certificate_jsonl(out.certificates));
    write_manifest(out_dir, "verify", seed, cfg);
    return out;
}

std::string run_gen_dataset(const Config& cfg, std::uint64_t seed) {
    const std::string path = cfg.require("dataset", "path");
    const std::string kind = cfg.get("dataset", "kind", "medium");
    const auto episodes =
        static_cast<std::size_t>(cfg.get_int("dataset", "episodes", 500));
    Dataset data;
    if (kind == "tabular") {
        auto [mdp, mu] = mdp_from_config(cfg);
        const auto horizon =
            static_cast<std::size_t>(cfg.get_int("dataset", "horizon", 100));
        data = collect_dataset(mdp, mu, episodes, horizon, seed);
    } else {
        const PointEnv env = env_from_config(cfg);
        const BehaviorController ctrl = controller_from_config(cfg);
        data = collect_env_dataset(env, ctrl, episodes, seed);
    }
    ensure_parent_dir(path);
    write_dataset(path, data);
    return path;
}

namespace {

MetricsRow eval_row(const PointEnv& env, const AgentState& agent,
                    const TaskRefs& refs, std::uint64_t run_seed,
                    std::size_t eval_index, std::size_t episodes) {
    MetricsRow row;
    row.step = agent.step;
    const PolicyFn policy = [&](const std::vector<double>& obs) {
        return agent_eval_action(agent, obs);
    };
    const EvalResult res = evaluate_policy(
        env, policy, episodes, mix_seed(mix_seed(run_seed, kStreamEval), eval_index));
    row.eval_return = res.mean_return;
    row.normalized_score = normalized_score(res.mean_return, refs);
    row.alpha = agent.alpha();
    return row;
}

struct EpochAccumulator {
    double critic = 0, actor = 0, alpha = 0, q_in = 0, q_ood = 0, target = 0;
    std::size_t count = 0;

    void add(const StepMetrics& m) {
        critic += m.critic_loss;
        actor += m.actor_loss;
        alpha += m.alpha;
        q_in += m.q_in_dist;
        q_ood += m.q_ood;
        target += m.target_q;
        ++count;
    }
    void fill(MetricsRow& row) const {
        if (count == 0) return;
        const double n = static_cast<double>(count);
        row.critic_loss = critic / n;
        row.actor_loss = actor / n;
        row.alpha = alpha / n;
        row.q_in_dist = q_in / n;
        row.q_ood = q_ood / n;
        row.target_q = target / n;
    }
};

}  // namespace

TrainOutcome run_train(const Config& cfg, std::uint64_t seed,
                       const std::string& out_dir) {
    ensure_dir(out_dir);
    const std::string dataset_path = cfg.require("dataset", "path");
    const Dataset data = read_dataset(dataset_path);
    const PointEnv env = env_from_config(cfg);
    if (data.state_dim != env.obs_dim() || data.action_dim != env.action_dim())
        fail(ErrorKind::dimension_mismatch,
             "dataset dims do not match the configured environment");
    const McqHyper hyper = hyper_from_config(cfg);
    const TaskRefs refs = refs_from_config(cfg, env);

    AgentState agent = AgentState::make(env.obs_dim(), env.action_dim(), hyper,
                                        env.r_max(), mix_seed(seed, kStreamAgentInit));
    const std::string resume = cfg.get("train", "resume", "");
    if (!resume.empty()) load_agent(agent, resume);

    const auto total_steps =
        static_cast<std::uint64_t>(cfg.get_int("train", "steps", 50000));
    const auto eval_every =
        static_cast<std::uint64_t>(cfg.get_int("train", "eval_every", 1000));
    const auto eval_episodes =
        static_cast<std::size_t>(cfg.get_int("train", "eval_episodes", 10));
    const auto checkpoint_every =
        static_cast<std::uint64_t>(cfg.get_int("train", "checkpoint_every", 0));

    TrainOutcome out;
    out.refs = refs;
    {
        const BehaviorController ctrl = controller_from_config(cfg);
        out.behavior_return =
            evaluate_controller(env, ctrl, std::max<std::size_t>(eval_episodes, 50),
                                mix_seed(seed, kStreamEval))
                .mean_return;
    }

    out.metrics_path = out_dir + "/metrics.csv";
    const bool fresh_csv = !std::filesystem::exists(out.metrics_path) ||
                           std::filesystem::file_size(out.metrics_path) == 0;
    std::ofstream csv(out.metrics_path,
                      agent.step > 0 ? std::ios::app : std::ios::trunc);
    if (!csv) fail(ErrorKind::io_error, "cannot open metrics csv");
    if (agent.step == 0 || fresh_csv) csv << kMetricsHeader << "\n";

    EpochAccumulator acc;
    while (agent.step < total_steps) {
        acc.add(train_step(agent, data, seed));
        const bool at_eval = agent.step % eval_every == 0;
        if (at_eval) {
            MetricsRow row = eval_row(env, agent, refs, seed,
                                      agent.step / eval_every, eval_episodes);
            acc.fill(row);
            out.rows.push_back(row);
            csv << metrics_row_csv(row) << "\n";
            csv.flush();
            acc = EpochAccumulator{};
        }
        if (checkpoint_every > 0 && agent.step % checkpoint_every == 0 &&
            agent.step < total_steps) {
            save_agent(agent,
                       out_dir + "/checkpoint_step" + std::to_string(agent.step) +
                           ".mcqc");
        }
    }

    out.final_buffer_size = data.size();
    out.checkpoint_path = out_dir + "/checkpoint.mcqc";
    save_agent(agent, out.checkpoint_path);
    write_manifest(out_dir, "train", seed, cfg);
    return out;
}

EvalOutcome run_eval(const Config& cfg, std::uint64_t seed,
                     const std::string& checkpoint_path) {
    const PointEnv env = env_from_config(cfg);
    const McqHyper hyper = hyper_from_config(cfg);
    const TaskRefs refs = refs_from_config(cfg, env);
    AgentState agent = AgentState::make(env.obs_dim(), env.action_dim(), hyper,
                                        env.r_max(), mix_seed(seed, kStreamAgentInit));
    load_agent(agent, checkpoint_path);
    const auto episodes =
        static_cast<std::size_t>(cfg.get_int("eval", "episodes", 20));
    const PolicyFn policy = [&](const std::vector<double>& obs) {
        return agent_eval_action(agent, obs);
    };
    const EvalResult res =
        evaluate_policy(env, policy, episodes, mix_seed(seed, kStreamEval));
    EvalOutcome out;
    out.mean_return = res.mean_return;
    out.std_return = res.std_return;
    out.normalized = normalized_score(res.mean_return, refs);
    return out;
}

TrainOutcome run_finetune(const Config& cfg, std::uint64_t seed,
                          const std::string& checkpoint_path,
                          const std::string& out_dir) {
    ensure_dir(out_dir);
    const std::string dataset_path = cfg.require("dataset", "path");
    Dataset buffer = read_dataset(dataset_path);
    const PointEnv env = env_from_config(cfg);
    const McqHyper hyper = hyper_from_config(cfg);
    const TaskRefs refs = refs_from_config(cfg, env);

    AgentState agent = AgentState::make(env.obs_dim(), env.action_dim(), hyper,
                                        env.r_max(), mix_seed(seed, kStreamAgentInit));
    load_agent(agent, checkpoint_path);

    const auto online_steps =
        static_cast<std::uint64_t>(cfg.get_int("finetune", "online_steps", 20000));
    const auto eval_every =
        static_cast<std::uint64_t>(cfg.get_int("finetune", "eval_every", 1000));
    const auto eval_episodes =
        static_cast<std::size_t>(cfg.get_int("finetune", "eval_episodes", 10));

    TrainOutcome out;
    out.refs = refs;
    out.metrics_path = out_dir + "/metrics.csv";
    std::ofstream csv(out.metrics_path);
    if (!csv) fail(ErrorKind::io_error, "cannot open metrics csv");
    csv << kMetricsHeader << "\n";

    // Row zero is the pre-fine-tuning evaluation.
    MetricsRow pre = eval_row(env, agent, refs, seed, 0, eval_episodes);
    out.rows.push_back(pre);
    csv << metrics_row_csv(pre) << "\n";

    std::uint64_t episode_index = 0;
    std::size_t t_in_episode = 0;
    Rng reset_rng = Rng::stream(seed, kStreamFtEpisode, episode_index);
    std::vector<double> obs = env.reset(reset_rng);

    EpochAccumulator acc;
    for (std::uint64_t k = 0; k < online_steps; ++k) {
        Rng action_rng = Rng::stream(seed, kStreamFtAction, k);
        std::vector<double> action = agent_explore_action(agent, obs, action_rng);
        for (auto& v : action)
            v = static_cast<double>(static_cast<float>(std::clamp(v, -1.0, 1.0)));
        auto [next_obs, reward] = env.step(obs, action);
        ++t_in_episode;
        const bool done = t_in_episode >= env.cfg.horizon;

        Transition tr;
        tr.s = obs;
        tr.a = action;
        tr.r = reward;
        tr.s_next = next_obs;
        tr.d = done ? 1 : 0;
        buffer.transitions.push_back(std::move(tr));

        if (done) {
            ++episode_index;
            t_in_episode = 0;
            Rng r = Rng::stream(seed, kStreamFtEpisode, episode_index);
            obs = env.reset(r);
        } else {
            obs = std::move(next_obs);
        }

        acc.add(train_step(agent, buffer, seed));
        if ((k + 1) % eval_every == 0) {
            MetricsRow row =
                eval_row(env, agent, refs, seed, 1 + (k + 1) / eval_every,
                         eval_episodes);
            acc.fill(row);
            out.rows.push_back(row);
            csv << metrics_row_csv(row) << "\n";
            csv.flush();
            acc = EpochAccumulator{};
        }
    }

    out.final_buffer_size = buffer.size();
    out.checkpoint_path = out_dir + "/checkpoint.mcqc";
    save_agent(agent, out.checkpoint_path);
    write_manifest(out_dir, "finetune", seed, cfg);
    return out;
}

std::vector<MetricsRow> read_metrics_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) fail(ErrorKind::io_error, "cannot open '" + path + "'");
    std::string line;
    if (!std::getline(is, line))
        fail(ErrorKind::truncated, "metrics csv is empty");
    std::vector<MetricsRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        std::vector<double> vals;
        while (std::getline(ls, tok, ',')) vals.push_back(std::stod(tok));
        if (vals.size() != 9)
            fail(ErrorKind::config_error, "metrics row has wrong arity");
        MetricsRow r;
        r.step = static_cast<std::uint64_t>(vals[0]);
        r.critic_loss = vals[1];
        r.actor_loss = vals[2];
        r.alpha = vals[3];
        r.q_in_dist = vals[4];
        r.q_ood = vals[5];
        r.target_q = vals[6];
        r.eval_return = vals[7];
        r.normalized_score = vals[8];
        rows.push_back(r);
    }
    return rows;
}

void run_export_plots(const std::vector<std::string>& run_dirs,
                      const std::string& out_dir) {
    ensure_dir(out_dir);
    std::ostringstream q_vs_lambda;
    std::ostringstream q_vs_n;
    q_vs_lambda << "lambda,run,final_q_in_dist,final_eval_return,"
                   "final_normalized_score\n";
    q_vs_n << "n_ood,run,final_q_in_dist,final_eval_return,"
              "final_normalized_score\n";

    for (const auto& dir : run_dirs) {
        const Config manifest = Config::parse_file(dir + "/manifest.txt");
        const auto rows = read_metrics_csv(dir + "/metrics.csv");
        if (rows.empty())
            fail(ErrorKind::config_error, "run '" + dir + "' has no metrics rows");
        const std::string name = std::filesystem::path(dir).filename().string();

        std::ostringstream curve;
        curve << "step,eval_return,normalized_score,q_in_dist,q_ood\n";
        for (const auto& r : rows)
            curve << r.step << "," << fmt(r.eval_return) << ","
                  << fmt(r.normalized_score) << "," << fmt(r.q_in_dist) << ","
                  << fmt(r.q_ood) << "\n";
        write_text_file(out_dir + "/learning_curve_" + name + ".csv", curve.str());

        const MetricsRow& last = rows.back();
        q_vs_lambda << manifest.get("train", "lambda", "") << "," << name << ","
                    << fmt(last.q_in_dist) << "," << fmt(last.eval_return) << ","
                    << fmt(last.normalized_score) << "\n";
        q_vs_n << manifest.get("train", "n_ood", "") << "," << name << ","
               << fmt(last.q_in_dist) << "," << fmt(last.eval_return) << ","
               << fmt(last.normalized_score) << "\n";
    }
    write_text_file(out_dir + "/q_vs_lambda.csv", q_vs_lambda.str());
    write_text_file(out_dir + "/q_vs_n.csv", q_vs_n.str());
}

}  // namespace mcq
