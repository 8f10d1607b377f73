#include "tabular.hpp"

#include <cmath>
#include <string>

namespace mcq {

namespace {

constexpr double kSimplexTol = 1e-9;
// Stream id for dataset episodes; see rng.hpp for the derivation scheme.
constexpr std::uint64_t kStreamEpisode = 101;

void check_simplex_row(const double* row, std::size_t n, const std::string& what) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (row[i] < 0.0)
            fail(ErrorKind::invalid_distribution, what + " has a negative entry");
        sum += row[i];
    }
    if (std::abs(sum - 1.0) > kSimplexTol)
        fail(ErrorKind::invalid_distribution,
             what + " sums to " + std::to_string(sum));
}

}  // namespace

TabularMdp build_mdp(std::size_t n_states, std::size_t n_actions,
                     std::vector<double> transition, std::vector<double> reward,
                     std::vector<double> rho0, double gamma, double r_max) {
    if (n_states == 0 || n_actions == 0)
        fail(ErrorKind::dimension_mismatch, "n_states and n_actions must be positive");
    if (transition.size() != n_states * n_actions * n_states)
        fail(ErrorKind::dimension_mismatch, "transition table size");
    if (reward.size() != n_states * n_actions)
        fail(ErrorKind::dimension_mismatch, "reward table size");
    if (rho0.size() != n_states)
        fail(ErrorKind::dimension_mismatch, "rho0 size");
    if (gamma < 0.0 || gamma >= 1.0)
        fail(ErrorKind::invalid_distribution, "gamma must lie in [0,1)");
    if (!(r_max > 0.0))
        fail(ErrorKind::reward_out_of_bounds, "r_max must be positive");

    for (std::size_t s = 0; s < n_states; ++s)
        for (std::size_t a = 0; a < n_actions; ++a)
            check_simplex_row(transition.data() + (s * n_actions + a) * n_states,
                              n_states,
                              "transition row (s=" + std::to_string(s) +
                                  ", a=" + std::to_string(a) + ")");
    check_simplex_row(rho0.data(), n_states, "rho0");

    for (std::size_t i = 0; i < reward.size(); ++i)
        if (std::abs(reward[i]) > r_max)
            fail(ErrorKind::reward_out_of_bounds,
                 "reward entry " + std::to_string(i) + " exceeds r_max");

    TabularMdp mdp;
    mdp.n_states = n_states;
    mdp.n_actions = n_actions;
    mdp.transition = std::move(transition);
    mdp.reward = std::move(reward);
    mdp.rho0 = std::move(rho0);
    mdp.gamma = gamma;
    mdp.r_max = r_max;
    return mdp;
}

TabularPolicy build_policy(std::size_t n_states, std::size_t n_actions,
                           std::vector<double> probs) {
    if (probs.size() != n_states * n_actions)
        fail(ErrorKind::dimension_mismatch, "policy table size");
    TabularPolicy pi;
    pi.n_states = n_states;
    pi.n_actions = n_actions;
    pi.probs = std::move(probs);
    for (std::size_t s = 0; s < n_states; ++s) {
        check_simplex_row(pi.row(s), n_actions, "policy row " + std::to_string(s));
        if (pi.support(s).empty())
            fail(ErrorKind::invalid_distribution,
                 "policy row " + std::to_string(s) + " has empty support");
    }
    return pi;
}

std::size_t sample_categorical(const double* probs, std::size_t n, Rng& rng) {
    const double u = rng.uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += probs[i];
        if (u < acc) return i;
    }
    // Guard against accumulated rounding just below 1.
    for (std::size_t i = n; i-- > 0;)
        if (probs[i] > 0.0) return i;
    return n - 1;
}

Dataset collect_dataset(const TabularMdp& mdp, const TabularPolicy& mu,
                        std::size_t episodes, std::size_t horizon,
                        std::uint64_t seed) {
    if (horizon < 1) fail(ErrorKind::dimension_mismatch, "horizon must be >= 1");
    if (mu.n_states != mdp.n_states || mu.n_actions != mdp.n_actions)
        fail(ErrorKind::dimension_mismatch, "policy does not match MDP dims");

    Dataset out;
    out.discrete = true;
    out.state_dim = 1;
    out.action_dim = 1;
    out.seed = seed;
    out.behavior = BehaviorKind::tabular;
    out.transitions.reserve(episodes * horizon);

    for (std::size_t ep = 0; ep < episodes; ++ep) {
        Rng rng = Rng::stream(seed, kStreamEpisode, ep);
        std::size_t s = sample_categorical(mdp.rho0.data(), mdp.n_states, rng);
        for (std::size_t t = 0; t < horizon; ++t) {
            const std::size_t a = sample_categorical(mu.row(s), mdp.n_actions, rng);
            const std::size_t s2 =
                sample_categorical(mdp.p_row(s, a), mdp.n_states, rng);
            Transition tr;
            tr.s = {static_cast<double>(s)};
            tr.a = {static_cast<double>(a)};
            tr.r = mdp.r(s, a);
            tr.s_next = {static_cast<double>(s2)};
            tr.d = 0;
            out.transitions.push_back(std::move(tr));
            s = s2;
        }
    }
    return out;
}

TabularPolicy empirical_behavior(const Dataset& dataset, std::size_t n_states,
                                 std::size_t n_actions, double smoothing) {
    if (dataset.transitions.empty())
        fail(ErrorKind::empty_dataset, "cannot estimate behavior from no data");

    std::vector<double> counts(n_states * n_actions, 0.0);
    std::vector<double> state_counts(n_states, 0.0);
    for (const auto& tr : dataset.transitions) {
        const auto s = static_cast<std::size_t>(tr.s[0]);
        const auto a = static_cast<std::size_t>(tr.a[0]);
        if (s >= n_states || a >= n_actions)
            fail(ErrorKind::dimension_mismatch, "dataset id out of range");
        counts[s * n_actions + a] += 1.0;
        state_counts[s] += 1.0;
    }

    TabularPolicy mu_hat;
    mu_hat.n_states = n_states;
    mu_hat.n_actions = n_actions;
    mu_hat.probs.resize(n_states * n_actions);
    for (std::size_t s = 0; s < n_states; ++s) {
        const double denom = state_counts[s] + n_actions * smoothing;
        for (std::size_t a = 0; a < n_actions; ++a) {
            mu_hat.probs[s * n_actions + a] =
                state_counts[s] == 0.0
                    ? 1.0 / static_cast<double>(n_actions)
                    : (counts[s * n_actions + a] + smoothing) / denom;
        }
    }
    return mu_hat;
}

double tv_distance(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size())
        fail(ErrorKind::length_mismatch, "tv_distance vector lengths");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
    return 0.5 * acc;
}

std::vector<double> state_frequencies(const Dataset& dataset, std::size_t n_states) {
    if (dataset.transitions.empty())
        fail(ErrorKind::empty_dataset, "no transitions");
    std::vector<double> freq(n_states, 0.0);
    for (const auto& tr : dataset.transitions) {
        const auto s = static_cast<std::size_t>(tr.s[0]);
        if (s >= n_states) fail(ErrorKind::dimension_mismatch, "state id out of range");
        freq[s] += 1.0;
    }
    const double total = static_cast<double>(dataset.transitions.size());
    for (auto& f : freq) f /= total;
    return freq;
}

}  // namespace mcq
