#include "env.hpp"

#include <algorithm>
#include <cmath>

namespace mcq {

namespace {

constexpr std::uint64_t kStreamEnvEpisode = 201;

inline double q32(double v) { return static_cast<double>(static_cast<float>(v)); }

double distance_to_goal(const std::vector<double>& pos,
                        const std::vector<double>& goal) {
    double acc = 0.0;
    for (std::size_t i = 0; i < pos.size(); ++i) {
        const double d = pos[i] - goal[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

}  // namespace

PointEnv::PointEnv(PointEnvConfig c) : cfg(std::move(c)) {
    if (cfg.dim != 1 && cfg.dim != 2)
        fail(ErrorKind::dimension_mismatch, "point env dim must be 1 or 2");
    if (cfg.goal.empty()) cfg.goal.assign(cfg.dim, 0.5);
    if (cfg.goal.size() != cfg.dim)
        fail(ErrorKind::dimension_mismatch, "goal dimension");
    for (double g : cfg.goal)
        if (g < -1.0 || g > 1.0)
            fail(ErrorKind::dimension_mismatch, "goal must lie in the box");
}

std::size_t PointEnv::obs_dim() const {
    return cfg.mass_mode ? 3 * cfg.dim : 2 * cfg.dim;
}

double PointEnv::r_max() const {
    return 2.0 * std::sqrt(static_cast<double>(cfg.dim));
}

std::vector<double> PointEnv::reset(Rng& rng) const {
    std::vector<double> obs(obs_dim(), 0.0);
    for (std::size_t i = 0; i < cfg.dim; ++i) obs[i] = q32(rng.uniform(-1.0, 1.0));
    const std::size_t goal_off = cfg.mass_mode ? 2 * cfg.dim : cfg.dim;
    for (std::size_t i = 0; i < cfg.dim; ++i) obs[goal_off + i] = q32(cfg.goal[i]);
    return obs;
}

PointEnv::StepResult PointEnv::step(const std::vector<double>& obs,
                                    const std::vector<double>& action) const {
    if (obs.size() != obs_dim() || action.size() != cfg.dim)
        fail(ErrorKind::dimension_mismatch, "env step shapes");
    StepResult out;
    out.obs = obs;
    std::vector<double> pos(obs.begin(), obs.begin() + cfg.dim);
    if (cfg.mass_mode) {
        for (std::size_t i = 0; i < cfg.dim; ++i) {
            const double a = std::clamp(action[i], -1.0, 1.0);
            double vel = obs[cfg.dim + i];
            vel = cfg.vel_damping * vel + cfg.step_scale * a;
            pos[i] = std::clamp(pos[i] + vel, -1.0, 1.0);
            out.obs[i] = q32(pos[i]);
            out.obs[cfg.dim + i] = q32(vel);
        }
    } else {
        for (std::size_t i = 0; i < cfg.dim; ++i) {
            const double a = std::clamp(action[i], -1.0, 1.0);
            pos[i] = std::clamp(pos[i] + cfg.step_scale * a, -1.0, 1.0);
            out.obs[i] = q32(pos[i]);
        }
    }
    out.reward = q32(-distance_to_goal(pos, cfg.goal));
    return out;
}

ControllerKind controller_kind_from_string(const std::string& name) {
    if (name == "random") return ControllerKind::random;
    if (name == "medium") return ControllerKind::medium;
    if (name == "replay-mix" || name == "replay_mix") return ControllerKind::replay_mix;
    fail(ErrorKind::unknown_kind, "controller kind '" + name + "'");
}

const char* controller_kind_name(ControllerKind kind) {
    switch (kind) {
        case ControllerKind::random: return "random";
        case ControllerKind::medium: return "medium";
        case ControllerKind::replay_mix: return "replay-mix";
    }
    return "unknown";
}

std::vector<double> controller_action(const BehaviorController& ctrl,
                                      const PointEnv& env,
                                      const std::vector<double>& obs,
                                      bool medium_episode, Rng& rng) {
    const std::size_t dim = env.cfg.dim;
    std::vector<double> a(dim, 0.0);
    const bool medium =
        ctrl.kind == ControllerKind::medium ||
        (ctrl.kind == ControllerKind::replay_mix && medium_episode);
    if (!medium) {
        for (auto& v : a) v = rng.uniform(-1.0, 1.0);
        return a;
    }
    const std::size_t goal_off = env.cfg.mass_mode ? 2 * dim : dim;
    for (std::size_t i = 0; i < dim; ++i) {
        const double pull = ctrl.gain * (obs[goal_off + i] - obs[i]);
        a[i] = std::clamp(pull, -1.0, 1.0);
        if (ctrl.noise > 0.0) a[i] += ctrl.noise * rng.normal();
        a[i] = std::clamp(a[i], -1.0, 1.0);
    }
    return a;
}

Dataset collect_env_dataset(const PointEnv& env, const BehaviorController& ctrl,
                            std::size_t episodes, std::uint64_t seed) {
    Dataset out;
    out.discrete = false;
    out.state_dim = env.obs_dim();
    out.action_dim = env.action_dim();
    out.seed = seed;
    switch (ctrl.kind) {
        case ControllerKind::random: out.behavior = BehaviorKind::random; break;
        case ControllerKind::medium: out.behavior = BehaviorKind::medium; break;
        case ControllerKind::replay_mix: out.behavior = BehaviorKind::replay_mix; break;
    }
    out.transitions.reserve(episodes * env.cfg.horizon);

    for (std::size_t ep = 0; ep < episodes; ++ep) {
        Rng rng = Rng::stream(seed, kStreamEnvEpisode, ep);
        const bool medium_episode = rng.uniform() < ctrl.mix;
        std::vector<double> obs = env.reset(rng);
        for (std::size_t t = 0; t < env.cfg.horizon; ++t) {
            std::vector<double> action =
                controller_action(ctrl, env, obs, medium_episode, rng);
            for (auto& v : action) v = q32(v);
            auto [next_obs, reward] = env.step(obs, action);
            Transition tr;
            tr.s = obs;
            tr.a = action;
            tr.r = reward;
            tr.s_next = next_obs;
            tr.d = (t + 1 == env.cfg.horizon) ? 1 : 0;
            out.transitions.push_back(std::move(tr));
            obs = std::move(next_obs);
        }
    }
    return out;
}

EvalResult evaluate_policy(const PointEnv& env, const PolicyFn& policy,
                           std::size_t episodes, std::uint64_t seed) {
    EvalResult res;
    res.episodes = episodes;
    std::vector<double> returns;
    returns.reserve(episodes);
    for (std::size_t ep = 0; ep < episodes; ++ep) {
        Rng rng = Rng::stream(seed, kStreamEnvEpisode, ep);
        std::vector<double> obs = env.reset(rng);
        double ret = 0.0;
        for (std::size_t t = 0; t < env.cfg.horizon; ++t) {
            auto [next_obs, reward] = env.step(obs, policy(obs));
            ret += reward;
            obs = std::move(next_obs);
        }
        returns.push_back(ret);
    }
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(returns.size());
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    var /= static_cast<double>(returns.size());
    res.mean_return = mean;
    res.std_return = std::sqrt(var);
    return res;
}

EvalResult evaluate_controller(const PointEnv& env, const BehaviorController& ctrl,
                               std::size_t episodes, std::uint64_t seed) {
    EvalResult res;
    res.episodes = episodes;
    std::vector<double> returns;
    returns.reserve(episodes);
    for (std::size_t ep = 0; ep < episodes; ++ep) {
        Rng rng = Rng::stream(seed, kStreamEnvEpisode, ep);
        const bool medium_episode = rng.uniform() < ctrl.mix;
        std::vector<double> obs = env.reset(rng);
        double ret = 0.0;
        for (std::size_t t = 0; t < env.cfg.horizon; ++t) {
            auto action = controller_action(ctrl, env, obs, medium_episode, rng);
            auto [next_obs, reward] = env.step(obs, action);
            ret += reward;
            obs = std::move(next_obs);
        }
        returns.push_back(ret);
    }
    double mean = 0.0;
    for (double r : returns) mean += r;
    mean /= static_cast<double>(returns.size());
    double var = 0.0;
    for (double r : returns) var += (r - mean) * (r - mean);
    var /= static_cast<double>(returns.size());
    res.mean_return = mean;
    res.std_return = std::sqrt(var);
    return res;
}

double normalized_score(double raw, const TaskRefs& refs) {
    if (!(refs.ref_max > refs.ref_min))
        fail(ErrorKind::degenerate_refs, "ref_max must exceed ref_min");
    return (raw - refs.ref_min) / (refs.ref_max - refs.ref_min) * 100.0;
}

TaskRefs compute_task_refs(const PointEnv& env, std::size_t episodes,
                           std::uint64_t seed) {
    BehaviorController random_ctrl;
    random_ctrl.kind = ControllerKind::random;
    BehaviorController expert_ctrl;
    expert_ctrl.kind = ControllerKind::medium;
    expert_ctrl.noise = 0.0;
    TaskRefs refs;
    refs.ref_min = evaluate_controller(env, random_ctrl, episodes, seed).mean_return;
    refs.ref_max = evaluate_controller(env, expert_ctrl, episodes, seed).mean_return;
    return refs;
}

}  // namespace mcq
