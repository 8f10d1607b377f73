#include "harness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace mcq {

namespace {

constexpr std::uint64_t kStreamTrial = 301;

std::size_t draw_size(Rng& rng, std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(rng.uniform_int(hi - lo + 1));
}

struct Instance {
    TabularMdp mdp;
    TabularPolicy mu;
    double gamma = 0.0;
    double support_fraction = 0.0;
};

Instance draw_instance(Rng& rng, const HarnessConfig& cfg, std::size_t trial) {
    const std::size_t n_states = draw_size(rng, cfg.min_states, cfg.max_states);
    const std::size_t n_actions = draw_size(rng, cfg.min_actions, cfg.max_actions);
    const double gamma = cfg.gammas[trial % cfg.gammas.size()];
    const double frac =
        cfg.support_fractions[(trial / cfg.gammas.size()) % cfg.support_fractions.size()];
    auto [mdp, mu] = random_mdp(rng, n_states, n_actions, frac, gamma, cfg.r_max);
    return {std::move(mdp), std::move(mu), gamma, frac};
}

QTable random_q(Rng& rng, std::size_t n_states, std::size_t n_actions, double lo,
                double hi) {
    QTable q(n_states, n_actions);
    for (auto& v : q.values) v = rng.uniform(lo, hi);
    return q;
}

void finish(PropositionCertificate& cert) {
    cert.worst_margin = std::numeric_limits<double>::infinity();
    for (const auto& t : cert.details)
        cert.worst_margin = std::min(cert.worst_margin, t.margin);
    cert.trials = cert.details.size();
}

}  // namespace

std::pair<TabularMdp, TabularPolicy> random_mdp(Rng& rng, std::size_t n_states,
                                                std::size_t n_actions,
                                                double support_fraction,
                                                double gamma, double r_max) {
    std::vector<double> transition(n_states * n_actions * n_states);
    for (std::size_t row = 0; row < n_states * n_actions; ++row) {
        double sum = 0.0;
        for (std::size_t s2 = 0; s2 < n_states; ++s2) {
            double u = rng.uniform();
            if (u <= 0.0) u = 0x1.0p-53;
            const double g = -std::log(u);
            transition[row * n_states + s2] = g;
            sum += g;
        }
        for (std::size_t s2 = 0; s2 < n_states; ++s2)
            transition[row * n_states + s2] /= sum;
    }

    std::vector<double> reward(n_states * n_actions);
    for (auto& v : reward) v = rng.uniform(-r_max, r_max);

    std::vector<double> rho0(n_states);
    {
        double sum = 0.0;
        for (auto& v : rho0) {
            double u = rng.uniform();
            if (u <= 0.0) u = 0x1.0p-53;
            v = -std::log(u);
            sum += v;
        }
        for (auto& v : rho0) v /= sum;
    }

    TabularMdp mdp = build_mdp(n_states, n_actions, std::move(transition),
                               std::move(reward), std::move(rho0), gamma, r_max);

    const auto support_size = static_cast<std::size_t>(
        std::ceil(support_fraction * static_cast<double>(n_actions)));
    std::vector<double> probs(n_states * n_actions, 0.0);
    std::vector<std::size_t> actions(n_actions);
    for (std::size_t s = 0; s < n_states; ++s) {
        std::iota(actions.begin(), actions.end(), 0);
        for (std::size_t i = n_actions; i > 1; --i)
            std::swap(actions[i - 1], actions[rng.uniform_int(i)]);
        for (std::size_t k = 0; k < support_size; ++k)
            probs[s * n_actions + actions[k]] = 1.0 / static_cast<double>(support_size);
    }
    TabularPolicy mu = build_policy(n_states, n_actions, std::move(probs));
    return {std::move(mdp), std::move(mu)};
}

PerturbResult perturb_policy_tv(const TabularPolicy& mu, double epsilon, Rng& rng) {
    if (epsilon < 0.0 || epsilon >= 0.5)
        fail(ErrorKind::epsilon_out_of_range, "epsilon must lie in [0, 0.5)");
    PerturbResult out;
    out.policy = mu;
    if (epsilon == 0.0) return out;
    for (std::size_t s = 0; s < mu.n_states; ++s) {
        std::vector<std::size_t> ood;
        for (std::size_t a = 0; a < mu.n_actions; ++a)
            if (!mu.in_support(s, a)) ood.push_back(a);
        if (ood.empty()) {
            ++out.unperturbable_states;
            continue;
        }
        double* row = out.policy.row(s);
        for (std::size_t a = 0; a < mu.n_actions; ++a) row[a] *= (1.0 - epsilon);
        row[ood[rng.uniform_int(ood.size())]] += epsilon;
    }
    return out;
}

PropositionCertificate check_contraction(std::uint64_t seed,
                                         ContractionOperator which,
                                         const HarnessConfig& cfg) {
    PropositionCertificate cert;
    cert.proposition_id = which == ContractionOperator::exact_mcb ? 1 : 4;
    cert.title = which == ContractionOperator::exact_mcb
                     ? "gamma-contraction of the exact operator"
                     : "gamma-contraction of the practical operator";
    cert.seed = seed;
    cert.tolerance = cfg.margin_tol;
    cert.details.reserve(cfg.contraction_trials);

    for (std::size_t t = 0; t < cfg.contraction_trials; ++t) {
        Rng rng = Rng::stream(seed, kStreamTrial, cert.proposition_id, t);
        Instance inst = draw_instance(rng, cfg, t);
        const double bound = inst.mdp.value_bound();
        const QTable q1 = random_q(rng, inst.mdp.n_states, inst.mdp.n_actions,
                                   -bound, bound);
        const QTable q2 = random_q(rng, inst.mdp.n_states, inst.mdp.n_actions,
                                   -bound, bound);
        const double delta = cfg.delta_scale * bound;

        QTable t1, t2;
        if (which == ContractionOperator::exact_mcb) {
            t1 = mcb_apply(q1, inst.mdp, inst.mu, delta);
            t2 = mcb_apply(q2, inst.mdp, inst.mu, delta);
        } else {
            // Prop. 4 assumes the empirical policy's support stays inside
            // Support(mu); the defining case is mu_hat = mu.
            PracticalMcbConfig pcfg;
            pcfg.n_samples = cfg.sample_counts[t % cfg.sample_counts.size()];
            t1 = practical_mcb_apply(q1, inst.mdp, inst.mu, inst.mu, pcfg);
            t2 = practical_mcb_apply(q2, inst.mdp, inst.mu, inst.mu, pcfg);
        }

        TrialRecord rec;
        rec.index = t;
        const double before = linf_distance(q1, q2);
        const double after = linf_distance(t1, t2);
        rec.margin = inst.gamma * before - after;
        rec.info["gamma"] = inst.gamma;
        rec.info["dist_before"] = before;
        rec.info["dist_after"] = after;
        rec.info["n_states"] = static_cast<double>(inst.mdp.n_states);
        rec.info["n_actions"] = static_cast<double>(inst.mdp.n_actions);
        cert.details.push_back(std::move(rec));
    }
    finish(cert);
    return cert;
}

PropositionCertificate check_sandwich(std::uint64_t seed, const HarnessConfig& cfg,
                                      double delta_scale_override) {
    PropositionCertificate cert;
    cert.proposition_id = 2;
    cert.title = "behavior value <= conservative fixed point <= batch optimum";
    cert.seed = seed;
    cert.tolerance = cfg.margin_tol;

    const double delta_scale =
        delta_scale_override > 0.0 ? delta_scale_override : cfg.delta_scale;

    for (std::size_t t = 0; t < cfg.sandwich_trials; ++t) {
        Rng rng = Rng::stream(seed, kStreamTrial, 2, t);
        Instance inst = draw_instance(rng, cfg, t);
        const TabularMdp& mdp = inst.mdp;
        const TabularPolicy& mu = inst.mu;
        const double bound = mdp.value_bound();
        const double delta = delta_scale * bound;

        const QTable q_mu = policy_evaluation(mdp, mu, cfg.vi_tol);
        const ActionMask mask = support_mask(mu);
        auto [q_star, rep_star] = value_iteration(
            [&](const QTable& q) { return bellman_optimal(q, mdp, &mask); },
            QTable(mdp.n_states, mdp.n_actions), cfg.vi_tol, 1000000);
        auto [q_mcb, rep_mcb] = value_iteration(
            [&](const QTable& q) { return mcb_apply(q, mdp, mu, delta); },
            QTable(mdp.n_states, mdp.n_actions), cfg.vi_tol, 1000000);

        double lower = std::numeric_limits<double>::infinity();
        double upper = std::numeric_limits<double>::infinity();
        double ood_lower = std::numeric_limits<double>::infinity();
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
            for (std::size_t a = 0; a < mdp.n_actions; ++a) {
                if (mu.in_support(s, a)) {
                    lower = std::min(lower, q_mcb.at(s, a) - q_mu.at(s, a));
                    upper = std::min(upper, q_star.at(s, a) - q_mcb.at(s, a));
                } else {
                    ood_lower = std::min(ood_lower, q_mcb.at(s, a) - q_mu.at(s, a));
                }
            }
        }

        // Numeric check of the delta upper bound from the lower-sandwich
        // argument, evaluated on the converged table at out-of-support pairs.
        double delta_bound = std::numeric_limits<double>::infinity();
        bool has_ood = false;
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
            for (std::size_t a = 0; a < mdp.n_actions; ++a) {
                if (mu.in_support(s, a)) continue;
                has_ood = true;
                const double* p = mdp.p_row(s, a);
                double acc = 0.0;
                for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2) {
                    if (p[s2] == 0.0) continue;
                    double vmax = -std::numeric_limits<double>::infinity();
                    double vmean = 0.0;
                    for (std::size_t a2 = 0; a2 < mdp.n_actions; ++a2) {
                        if (!mu.in_support(s2, a2)) continue;
                        vmax = std::max(vmax, q_mcb.at(s2, a2));
                        vmean += mu.prob(s2, a2) * q_mcb.at(s2, a2);
                    }
                    acc += p[s2] * (vmax - vmean);
                }
                delta_bound = std::min(delta_bound, acc);
            }
        }

        TrialRecord rec;
        rec.index = t;
        rec.margin = std::min(lower, upper);
        rec.info["lower_margin"] = lower;
        rec.info["upper_margin"] = upper;
        rec.info["gamma"] = inst.gamma;
        rec.info["delta"] = delta;
        rec.info["iters_mcb"] = static_cast<double>(rep_mcb.iterations);
        if (has_ood) {
            rec.info["ood_lower_margin"] = ood_lower;
            rec.info["delta_bound"] = delta_bound;
            if (delta > delta_bound + cfg.margin_tol)
                rec.flags.push_back("DeltaConditionViolated");
        }
        cert.details.push_back(std::move(rec));
    }
    finish(cert);
    return cert;
}

PropositionCertificate check_policy_improvement(std::uint64_t seed,
                                                const HarnessConfig& cfg) {
    PropositionCertificate cert;
    cert.proposition_id = 3;
    cert.title = "greedy conservative policy beats the behavior policy";
    cert.seed = seed;
    cert.tolerance = cfg.margin_tol;

    for (std::size_t t = 0; t < cfg.improvement_trials; ++t) {
        Rng rng = Rng::stream(seed, kStreamTrial, 3, t);
        Instance inst = draw_instance(rng, cfg, t);
        const TabularMdp& mdp = inst.mdp;
        const TabularPolicy& mu = inst.mu;
        const double delta = cfg.delta_scale * mdp.value_bound();

        const Dataset data = collect_dataset(mdp, mu, cfg.dataset_episodes,
                                             cfg.dataset_horizon,
                                             mix_seed(seed, 9100 + t));
        auto [q_mcb, rep] = value_iteration(
            [&](const QTable& q) { return mcb_apply(q, mdp, mu, delta); },
            QTable(mdp.n_states, mdp.n_actions), cfg.vi_tol, 1000000);

        const TabularPolicy greedy = greedy_policy(q_mcb);
        bool in_support = true;
        for (std::size_t s = 0; s < mdp.n_states; ++s) {
            for (std::size_t a = 0; a < mdp.n_actions; ++a)
                if (greedy.prob(s, a) > 0.0 && !mu.in_support(s, a)) in_support = false;
        }

        const double j_mcb =
            policy_return(mdp, greedy, ReturnMode::dataset_states, &data, cfg.vi_tol);
        const double j_mu =
            policy_return(mdp, mu, ReturnMode::dataset_states, &data, cfg.vi_tol);

        // Reference column: the best in-support action of the behavior value.
        const ActionMask mask = support_mask(mu);
        const QTable q_mu = policy_evaluation(mdp, mu, cfg.vi_tol);
        const TabularPolicy greedy_mu = greedy_policy(q_mu, &mask);
        const double j_greedy_mu = policy_return(mdp, greedy_mu,
                                                 ReturnMode::dataset_states, &data,
                                                 cfg.vi_tol);

        TrialRecord rec;
        rec.index = t;
        rec.margin = j_mcb - j_mu;
        rec.info["j_mcb"] = j_mcb;
        rec.info["j_mu"] = j_mu;
        rec.info["j_greedy_mu"] = j_greedy_mu;
        rec.info["gamma"] = inst.gamma;
        if (!in_support) rec.flags.push_back("GreedyLeftSupport");
        cert.details.push_back(std::move(rec));
    }
    finish(cert);
    return cert;
}

double overestimation_margin(const QTable& q, const TabularPolicy& mu,
                             double epsilon, std::size_t n_samples, double r_max,
                             double gamma, Rng& rng,
                             std::size_t* perturbable_states) {
    PerturbResult perturbed = perturb_policy_tv(mu, epsilon, rng);
    const double slack =
        (1.0 - std::pow(1.0 - 2.0 * epsilon, static_cast<double>(n_samples))) *
        r_max / (1.0 - gamma);

    double margin = std::numeric_limits<double>::infinity();
    std::size_t counted = 0;
    for (std::size_t s = 0; s < mu.n_states; ++s) {
        double max_supp = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < mu.n_actions; ++a)
            if (mu.in_support(s, a)) max_supp = std::max(max_supp, q.at(s, a));
        const double estimate = expected_max_of_draws(
            q.row(s), perturbed.policy.row(s), mu.n_actions, n_samples);
        margin = std::min(margin, max_supp + slack - estimate);
        ++counted;
    }
    if (perturbable_states)
        *perturbable_states = counted - perturbed.unperturbable_states;
    return margin;
}

PropositionCertificate check_overestimation_bound(std::uint64_t seed,
                                                  const HarnessConfig& cfg) {
    PropositionCertificate cert;
    cert.proposition_id = 5;
    cert.title = "expected max over sampled actions respects the TV slack bound";
    cert.seed = seed;
    // Exact enumeration: the inequality must hold with no numeric slack.
    cert.tolerance = 0.0;

    std::size_t idx = 0;
    for (std::size_t pair = 0; pair < cfg.overestimation_pairs; ++pair) {
        Rng rng = Rng::stream(seed, kStreamTrial, 5, pair);
        Instance inst = draw_instance(rng, cfg, pair);
        const double bound = inst.mdp.value_bound();
        // The slack bound presumes a nonnegative in-support maximum (the
        // proof majorizes the all-in-support event by that maximum), so the
        // certificate draws value tables in [0, r_max/(1-gamma)].
        const QTable q =
            random_q(rng, inst.mdp.n_states, inst.mdp.n_actions, 0.0, bound);

        for (double eps : cfg.epsilons) {
            for (std::size_t n : cfg.sample_counts) {
                Rng perturb_rng = Rng::stream(seed, kStreamTrial + 1, 5, idx);
                TrialRecord rec;
                rec.index = idx++;
                rec.margin = overestimation_margin(q, inst.mu, eps, n, cfg.r_max,
                                                   inst.gamma, perturb_rng);
                rec.info["epsilon"] = eps;
                rec.info["n_samples"] = static_cast<double>(n);
                rec.info["gamma"] = inst.gamma;
                cert.details.push_back(std::move(rec));
            }
        }
    }
    finish(cert);
    return cert;
}

std::vector<PropositionCertificate> run_all_checks(std::uint64_t seed,
                                                   const HarnessConfig& cfg) {
    std::vector<PropositionCertificate> certs;
    certs.push_back(check_contraction(seed, ContractionOperator::exact_mcb, cfg));
    certs.push_back(check_sandwich(seed, cfg));
    certs.push_back(check_policy_improvement(seed, cfg));
    certs.push_back(check_contraction(seed, ContractionOperator::practical_mcb, cfg));
    certs.push_back(check_overestimation_bound(seed, cfg));
    return certs;
}

std::string certificate_report(const std::vector<PropositionCertificate>& certs) {
    std::ostringstream os;
    os.precision(12);
    for (const auto& c : certs) {
        std::size_t flagged = 0;
        for (const auto& t : c.details) flagged += t.flags.empty() ? 0 : 1;
        os << "proposition " << c.proposition_id << " (" << c.title << ")\n"
           << "  trials=" << c.trials << " seed=" << c.seed
           << " tolerance=" << c.tolerance << "\n"
           << "  worst_margin=" << c.worst_margin << " flagged_trials=" << flagged
           << "\n"
           << "  result: " << (c.holds() ? "HOLDS" : "VIOLATED") << "\n";
    }
    return os.str();
}

std::string certificate_jsonl(const std::vector<PropositionCertificate>& certs) {
    std::ostringstream os;
    for (const auto& c : certs) {
        for (const auto& t : c.details) {
            nlohmann::json j;
            j["proposition"] = c.proposition_id;
            j["trial"] = t.index;
            j["margin"] = t.margin;
            j["seed"] = c.seed;
            j["tolerance"] = c.tolerance;
            if (!t.flags.empty()) j["flags"] = t.flags;
            for (const auto& [k, v] : t.info) j[k] = v;
            os << j.dump() << "\n";
        }
    }
    return os.str();
}

}  // namespace mcq
