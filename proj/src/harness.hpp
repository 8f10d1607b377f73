#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dp.hpp"
#include "tabular.hpp"

namespace mcq {

/// One randomized trial inside a proposition certificate.
struct TrialRecord {
    std::size_t index = 0;
    double margin = 0.0;
    std::vector<std::string> flags;
    std::map<std::string, double> info;
};

/// Machine-checkable outcome of a proposition check. The proposition holds
/// when the most adverse margin observed stays above -tolerance.
struct PropositionCertificate {
    int proposition_id = 0;
    std::string title;
    std::size_t trials = 0;
    double worst_margin = 0.0;
    std::uint64_t seed = 0;
    double tolerance = 1e-6;
    std::vector<TrialRecord> details;

    bool holds() const { return worst_margin >= -tolerance; }
};

struct HarnessConfig {
    std::size_t contraction_trials = 1000;
    std::size_t sandwich_trials = 200;
    std::size_t improvement_trials = 200;
    std::size_t overestimation_pairs = 100;

    std::size_t min_states = 3;
    std::size_t max_states = 20;
    std::size_t min_actions = 2;
    std::size_t max_actions = 6;
    std::vector<double> gammas = {0.9, 0.95, 0.99};
    std::vector<double> support_fractions = {0.3, 0.5, 1.0};
    double r_max = 1.0;

    /// Fixed-point solve tolerance. Margins propagate solve error by roughly
    /// tol/(1-gamma), so this sits well below margin_tol.
    double vi_tol = 1e-10;
    double margin_tol = 1e-6;
    /// delta = delta_scale * r_max / (1 - gamma).
    double delta_scale = 1e-6;

    std::vector<double> epsilons = {0.0, 0.05, 0.1, 0.2};
    std::vector<std::size_t> sample_counts = {1, 5, 10, 20};

    std::size_t dataset_episodes = 30;
    std::size_t dataset_horizon = 40;
};

/// Random MDP instance plus a behavior policy uniform over a random
/// per-state support of size ceil(support_fraction * n_actions).
std::pair<TabularMdp, TabularPolicy> random_mdp(Rng& rng, std::size_t n_states,
                                                std::size_t n_actions,
                                                double support_fraction,
                                                double gamma, double r_max);

/// Moves probability mass epsilon from each state's in-support row onto one
/// randomly chosen out-of-support action, so the per-state TV distance to mu
/// is exactly epsilon. States with full support are left unperturbed and
/// flagged via the returned count.
struct PerturbResult {
    TabularPolicy policy;
    std::size_t unperturbable_states = 0;
};
PerturbResult perturb_policy_tv(const TabularPolicy& mu, double epsilon, Rng& rng);

enum class ContractionOperator { exact_mcb, practical_mcb };

/// Certificates 1 (exact) and 4 (practical): one operator application
/// contracts L-infinity distance between two value tables by gamma.
PropositionCertificate check_contraction(std::uint64_t seed,
                                         ContractionOperator which,
                                         const HarnessConfig& cfg);

/// Certificate 2: on in-support entries the conservative fixed point sits
/// between the behavior value and the support-constrained optimum.
PropositionCertificate check_sandwich(std::uint64_t seed, const HarnessConfig& cfg,
                                      double delta_scale_override = -1.0);

/// Certificate 3: the greedy policy of the conservative fixed point returns
/// at least as much as the behavior policy under the dataset state weights.
PropositionCertificate check_policy_improvement(std::uint64_t seed,
                                                const HarnessConfig& cfg);

/// Margin for one (q, mu, epsilon, N) instance: the per-state expected max
/// over N draws from the perturbed policy must not exceed the in-support max
/// plus the (1-(1-2eps)^N) r_max/(1-gamma) slack. Exact order-statistics
/// enumeration, no Monte Carlo error.
double overestimation_margin(const QTable& q, const TabularPolicy& mu,
                             double epsilon, std::size_t n_samples, double r_max,
                             double gamma, Rng& rng,
                             std::size_t* perturbable_states = nullptr);

/// Certificate 5: the overestimation slack bound over the epsilon x N grid.
PropositionCertificate check_overestimation_bound(std::uint64_t seed,
                                                  const HarnessConfig& cfg);

/// Runs all five certificates in order 1..5.
std::vector<PropositionCertificate> run_all_checks(std::uint64_t seed,
                                                   const HarnessConfig& cfg);

/// Human-readable multi-line summary.
std::string certificate_report(const std::vector<PropositionCertificate>& certs);

/// One JSON record per trial, newline separated.
std::string certificate_jsonl(const std::vector<PropositionCertificate>& certs);

}  // namespace mcq
