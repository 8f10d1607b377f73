#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "tabular.hpp"

namespace mcq {

/// Dense state x action value table.
struct QTable {
    std::size_t n_states = 0;
    std::size_t n_actions = 0;
    std::vector<double> values;

    QTable() = default;
    QTable(std::size_t s, std::size_t a) : n_states(s), n_actions(a), values(s * a, 0.0) {}

    double& at(std::size_t s, std::size_t a) { return values[s * n_actions + a]; }
    double at(std::size_t s, std::size_t a) const { return values[s * n_actions + a]; }
    const double* row(std::size_t s) const { return values.data() + s * n_actions; }
};

/// L-infinity distance between two equally-shaped tables.
double linf_distance(const QTable& a, const QTable& b);

struct OperatorReport {
    std::size_t iterations = 0;
    double final_residual = 0.0;
    bool converged = false;
    /// Coarse residual trace (every_k spacing), ending with the final residual.
    std::vector<double> residual_trace;
};

/// Per-state action masks for batch-constrained backups.
using ActionMask = std::vector<std::vector<std::size_t>>;

ActionMask support_mask(const TabularPolicy& mu);

/// One application of the policy Bellman backup:
/// out[s,a] = r(s,a) + gamma * E_{s'}[ sum_a' pi(a'|s') q(s',a') ].
QTable bellman_backup(const QTable& q, const TabularMdp& mdp, const TabularPolicy& pi);

/// One application of the Bellman optimal backup. With a mask the inner max
/// ranges over mask(s') only; with mask = Support(mu) the fixed point is the
/// batch-constrained optimum.
QTable bellman_optimal(const QTable& q, const TabularMdp& mdp,
                       const ActionMask* mask = nullptr);

/// One application of the mildly conservative backup: in-support entries get
/// the optimal backup, out-of-support entries are pinned to the best
/// in-support intermediate value minus delta. Applied literally as the
/// two-stage composition (first the full-action backup stage on in-support
/// entries, then the support check).
QTable mcb_apply(const QTable& q, const TabularMdp& mdp, const TabularPolicy& mu,
                 double delta);

/// Exact expectation of max over n_samples i.i.d. category draws, where
/// category i carries probability probs[i] and value values[i]. Order
/// statistics over the sorted values; exact for any n_samples.
double expected_max_of_draws(const double* values, const double* probs,
                             std::size_t n, std::size_t n_samples);

/// Practical variant: the out-of-support branch is the expectation over N
/// draws from mu_hat of the max of the intermediate values. Exact
/// order-statistics enumeration when n_actions <= exact_enumeration_limit,
/// Monte Carlo with mc_draw_sets draw sets otherwise.
struct PracticalMcbConfig {
    std::size_t n_samples = 10;
    std::size_t exact_enumeration_limit = 12;
    std::size_t mc_draw_sets = 256;
    std::uint64_t mc_seed = 0;
};

QTable practical_mcb_apply(const QTable& q, const TabularMdp& mdp,
                           const TabularPolicy& mu, const TabularPolicy& mu_hat,
                           const PracticalMcbConfig& cfg);

/// Iterates `op` from q0 until the successive L-infinity residual drops to
/// tol or max_iter is hit. Throws NonFinite if an iterate leaves finite range.
std::pair<QTable, OperatorReport> value_iteration(
    const std::function<QTable(const QTable&)>& op, QTable q0, double tol,
    std::size_t max_iter);

/// Deterministic greedy policy; ties break toward the lowest action id.
TabularPolicy greedy_policy(const QTable& q, const ActionMask* mask = nullptr);

/// Q function of pi via fixed-point iteration of the policy backup.
QTable policy_evaluation(const TabularMdp& mdp, const TabularPolicy& pi, double tol,
                         std::size_t max_iter = 1000000);

enum class ReturnMode { rho0, dataset_states };

/// J(pi) = sum_s w(s) sum_a pi(a|s) Q_pi(s,a), with w either rho0 or the
/// dataset's empirical state frequencies.
double policy_return(const TabularMdp& mdp, const TabularPolicy& pi, ReturnMode mode,
                     const Dataset* dataset = nullptr, double tol = 1e-10);

/// Same but reusing an already-computed Q_pi.
double policy_return_with_q(const TabularMdp& mdp, const TabularPolicy& pi,
                            const QTable& q_pi, ReturnMode mode,
                            const Dataset* dataset = nullptr);

}  // namespace mcq
