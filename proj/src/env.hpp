#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "rng.hpp"
#include "tabular.hpp"

namespace mcq {

/// Goal-reaching point environment on the box [-1,1]^dim. Observations are
/// [position, (velocity in mass mode,) goal]; the reward is the negative
/// Euclidean distance to the goal after the step. Episodes run a fixed
/// horizon; the done flag is set only on the final step.
struct PointEnvConfig {
    std::size_t dim = 2;
    bool mass_mode = false;
    double step_scale = 0.1;
    std::size_t horizon = 100;
    std::vector<double> goal;  // defaults to 0.5 in every coordinate
    double vel_damping = 0.9;  // mass mode only
};

struct PointEnv {
    PointEnvConfig cfg;

    explicit PointEnv(PointEnvConfig c);

    std::size_t obs_dim() const;
    std::size_t action_dim() const { return cfg.dim; }
    /// Bound on |reward|: the box diameter.
    double r_max() const;

    /// Start state: position uniform in the box, zero velocity.
    std::vector<double> reset(Rng& rng) const;

    struct StepResult {
        std::vector<double> obs;
        double reward = 0.0;
    };
    /// Pure function of (state, action). Out-of-box action components are
    /// clamped. Termination is time-based and handled by the rollout loops.
    StepResult step(const std::vector<double>& obs,
                    const std::vector<double>& action) const;
};

enum class ControllerKind { random, medium, replay_mix };

ControllerKind controller_kind_from_string(const std::string& name);
const char* controller_kind_name(ControllerKind kind);

/// Dataset-regime controllers. `random` draws uniform actions, `medium` is a
/// proportional controller toward the goal plus Gaussian noise, `replay_mix`
/// flips a per-episode coin between the two.
struct BehaviorController {
    ControllerKind kind = ControllerKind::medium;
    double noise = 0.3;
    double gain = 2.0;
    double mix = 0.5;  // probability of a medium episode under replay_mix
};

/// Action for one step. `medium_episode` selects the mode chosen at episode
/// start (only consulted for replay_mix).
std::vector<double> controller_action(const BehaviorController& ctrl,
                                      const PointEnv& env,
                                      const std::vector<double>& obs,
                                      bool medium_episode, Rng& rng);

/// Rolls out `episodes` episodes and logs every transition. Values are
/// quantized to 32-bit floats on append so that in-memory datasets match
/// their on-disk round trip exactly.
Dataset collect_env_dataset(const PointEnv& env, const BehaviorController& ctrl,
                            std::size_t episodes, std::uint64_t seed);

/// Policy evaluated as a pure function obs -> action.
using PolicyFn = std::function<std::vector<double>(const std::vector<double>&)>;

struct EvalResult {
    double mean_return = 0.0;
    double std_return = 0.0;
    std::size_t episodes = 0;
};

/// Undiscounted per-episode return statistics. Episode i resets from
/// Rng::stream(seed, episode-stream, i); the policy itself is deterministic.
EvalResult evaluate_policy(const PointEnv& env, const PolicyFn& policy,
                           std::size_t episodes, std::uint64_t seed);

/// Mean return of the controller under the same protocol.
EvalResult evaluate_controller(const PointEnv& env, const BehaviorController& ctrl,
                               std::size_t episodes, std::uint64_t seed);

struct TaskRefs {
    double ref_min = 0.0;
    double ref_max = 0.0;
};

/// Affine map sending ref_min to 0 and ref_max to 100; deliberately not
/// clamped, scores beyond 100 are meaningful.
double normalized_score(double raw, const TaskRefs& refs);

/// Reference returns for the synthetic task: the random controller gives
/// ref_min, the noiseless proportional controller gives ref_max.
TaskRefs compute_task_refs(const PointEnv& env, std::size_t episodes,
                           std::uint64_t seed);

}  // namespace mcq
