#pragma once

#include <cstdint>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace mcq {

/// One logged step. For the tabular track `s`/`a` hold single ids; the
/// continuous track stores observation and action vectors.
struct Transition {
    std::vector<double> s;
    std::vector<double> a;
    double r = 0.0;
    std::vector<double> s_next;
    std::uint8_t d = 0;
};

enum class BehaviorKind : std::uint32_t {
    unknown = 0,
    random = 1,
    medium = 2,
    replay_mix = 3,
    tabular = 4,
};

/// In-memory dataset shared by both tracks.
struct Dataset {
    std::size_t state_dim = 1;
    std::size_t action_dim = 1;
    bool discrete = false;
    std::uint64_t seed = 0;
    BehaviorKind behavior = BehaviorKind::unknown;
    std::vector<Transition> transitions;

    std::size_t size() const { return transitions.size(); }
};

/// Finite MDP with dense transition and reward tables.
///
/// transition is laid out [s][a][s'] contiguously; reward is [s][a].
/// Tabular MDPs in this project are non-terminating (infinite horizon,
/// discounted), so there is no terminal-state machinery here.
struct TabularMdp {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> transition;
    std::vector<double> reward;
    std::vector<double> rho0;
    double gamma = 0.99;
    double r_max = 1.0;

    double p(std::size_t s, std::size_t a, std::size_t s2) const {
        return transition[(s * n_actions + a) * n_states + s2];
    }
    const double* p_row(std::size_t s, std::size_t a) const {
        return transition.data() + (s * n_actions + a) * n_states;
    }
    double r(std::size_t s, std::size_t a) const {
        return reward[s * n_actions + a];
    }
    /// Upper bound on |Q| under any of the operators in this project.
    double value_bound() const { return r_max / (1.0 - gamma); }
};

/// Stochastic tabular policy. Support is exactly the set of actions with
/// strictly positive stored probability.
struct TabularPolicy {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> probs;

    double prob(std::size_t s, std::size_t a) const {
        return probs[s * n_actions + a];
    }
    const double* row(std::size_t s) const { return probs.data() + s * n_actions; }
    double* row(std::size_t s) { return probs.data() + s * n_actions; }
    bool in_support(std::size_t s, std::size_t a) const { return prob(s, a) > 0.0; }

    std::vector<std::size_t> support(std::size_t s) const {
        std::vector<std::size_t> out;
        for (std::size_t a = 0; a < n_actions; ++a)
            if (in_support(s, a)) out.push_back(a);
        return out;
    }
};

/// Validates dimensions, simplex rows (1e-9 tolerance), reward bounds and
/// discount range. Throws DimensionMismatch / InvalidDistribution /
/// RewardOutOfBounds on violation.
TabularMdp build_mdp(std::size_t n_states, std::size_t n_actions,
                     std::vector<double> transition, std::vector<double> reward,
                     std::vector<double> rho0, double gamma, double r_max);

/// Validates row simplexes and nonempty per-state support.
TabularPolicy build_policy(std::size_t n_states, std::size_t n_actions,
                           std::vector<double> probs);

/// Rolls out `episodes` episodes of `horizon` steps each under mu. Episodes
/// start from rho0. Tabular episodes never terminate, so d stays 0.
/// Episode i draws from Rng::stream(seed, episode-stream, i), making
/// collection order-independent and reproducible.
Dataset collect_dataset(const TabularMdp& mdp, const TabularPolicy& mu,
                        std::size_t episodes, std::size_t horizon,
                        std::uint64_t seed);

/// Count-based maximum-likelihood behavior estimate with additive smoothing.
/// States never visited fall back to the uniform row.
TabularPolicy empirical_behavior(const Dataset& dataset, std::size_t n_states,
                                 std::size_t n_actions, double smoothing);

/// Total variation distance, 0.5 * L1.
double tv_distance(const std::vector<double>& p, const std::vector<double>& q);

/// Samples an index from a probability row of length n.
std::size_t sample_categorical(const double* probs, std::size_t n, Rng& rng);

/// Empirical state visitation frequencies of a tabular dataset.
std::vector<double> state_frequencies(const Dataset& dataset, std::size_t n_states);

}  // namespace mcq
