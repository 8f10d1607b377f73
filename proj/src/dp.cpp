#include "dp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace mcq {

double linf_distance(const QTable& a, const QTable& b) {
    if (a.values.size() != b.values.size())
        fail(ErrorKind::dimension_mismatch, "QTable shapes");
    double d = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i)
        d = std::max(d, std::abs(a.values[i] - b.values[i]));
    return d;
}

ActionMask support_mask(const TabularPolicy& mu) {
    ActionMask mask(mu.n_states);
    for (std::size_t s = 0; s < mu.n_states; ++s) mask[s] = mu.support(s);
    return mask;
}

namespace {

void check_dims(const QTable& q, const TabularMdp& mdp) {
    if (q.n_states != mdp.n_states || q.n_actions != mdp.n_actions)
        fail(ErrorKind::dimension_mismatch, "QTable does not match MDP dims");
}

/// next_value[s'] = aggregated value at the next state; the backup itself is
/// shared by every operator in this module.
QTable backup_with_next_values(const TabularMdp& mdp,
                               const std::vector<double>& next_value) {
    QTable out(mdp.n_states, mdp.n_actions);
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        for (std::size_t a = 0; a < mdp.n_actions; ++a) {
            const double* row = mdp.p_row(s, a);
            double acc = 0.0;
            for (std::size_t s2 = 0; s2 < mdp.n_states; ++s2)
                acc += row[s2] * next_value[s2];
            out.at(s, a) = mdp.r(s, a) + mdp.gamma * acc;
        }
    }
    return out;
}

std::vector<double> max_values(const QTable& q, const ActionMask* mask) {
    std::vector<double> v(q.n_states, -std::numeric_limits<double>::infinity());
    for (std::size_t s = 0; s < q.n_states; ++s) {
        if (mask) {
            const auto& allowed = (*mask)[s];
            if (allowed.empty())
                fail(ErrorKind::empty_mask, "state " + std::to_string(s));
            for (std::size_t a : allowed) v[s] = std::max(v[s], q.at(s, a));
        } else {
            for (std::size_t a = 0; a < q.n_actions; ++a)
                v[s] = std::max(v[s], q.at(s, a));
        }
    }
    return v;
}

}  // namespace

QTable bellman_backup(const QTable& q, const TabularMdp& mdp, const TabularPolicy& pi) {
    check_dims(q, mdp);
    if (pi.n_states != mdp.n_states || pi.n_actions != mdp.n_actions)
        fail(ErrorKind::dimension_mismatch, "policy dims");
    std::vector<double> v(mdp.n_states, 0.0);
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        double acc = 0.0;
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            acc += pi.prob(s, a) * q.at(s, a);
        v[s] = acc;
    }
    return backup_with_next_values(mdp, v);
}

QTable bellman_optimal(const QTable& q, const TabularMdp& mdp, const ActionMask* mask) {
    check_dims(q, mdp);
    return backup_with_next_values(mdp, max_values(q, mask));
}

QTable mcb_apply(const QTable& q, const TabularMdp& mdp, const TabularPolicy& mu,
                 double delta) {
    check_dims(q, mdp);
    // Stage two of the composition: full-action optimal backup on in-support
    // entries, identity elsewhere.
    const std::vector<double> vmax = max_values(q, nullptr);
    QTable t2 = backup_with_next_values(mdp, vmax);
    for (std::size_t s = 0; s < mdp.n_states; ++s)
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            if (!mu.in_support(s, a)) t2.at(s, a) = q.at(s, a);

    // Stage one: out-of-support entries become the best in-support
    // intermediate value minus delta.
    QTable out = t2;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            if (mu.in_support(s, a)) best = std::max(best, t2.at(s, a));
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            if (!mu.in_support(s, a)) out.at(s, a) = best - delta;
    }
    return out;
}

double expected_max_of_draws(const double* values, const double* probs,
                             std::size_t n, std::size_t n_samples) {
    // Sort categories by value; P(max <= values[i]) = (cumulative prob)^N.
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    double acc = 0.0;
    double cum = 0.0;
    double prev_pow = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        cum += probs[order[k]];
        const double cur_pow = std::pow(std::min(cum, 1.0), static_cast<double>(n_samples));
        acc += values[order[k]] * (cur_pow - prev_pow);
        prev_pow = cur_pow;
    }
    return acc;
}

QTable practical_mcb_apply(const QTable& q, const TabularMdp& mdp,
                           const TabularPolicy& mu, const TabularPolicy& mu_hat,
                           const PracticalMcbConfig& cfg) {
    check_dims(q, mdp);
    if (cfg.n_samples < 1)
        fail(ErrorKind::dimension_mismatch, "n_samples must be >= 1");
    const std::vector<double> vmax = max_values(q, nullptr);
    QTable t2 = backup_with_next_values(mdp, vmax);
    for (std::size_t s = 0; s < mdp.n_states; ++s)
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            if (!mu.in_support(s, a)) t2.at(s, a) = q.at(s, a);

    QTable out = t2;
    const bool exact = mdp.n_actions <= cfg.exact_enumeration_limit;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        bool needs_pseudo = false;
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            if (!mu.in_support(s, a)) needs_pseudo = true;
        if (!needs_pseudo) continue;

        double pseudo;
        if (exact) {
            pseudo = expected_max_of_draws(t2.row(s), mu_hat.row(s), mdp.n_actions,
                                           cfg.n_samples);
        } else {
            Rng rng = Rng::stream(cfg.mc_seed, 7001, s);
            double acc = 0.0;
            for (std::size_t m = 0; m < cfg.mc_draw_sets; ++m) {
                double best = -std::numeric_limits<double>::infinity();
                for (std::size_t i = 0; i < cfg.n_samples; ++i) {
                    const std::size_t a =
                        sample_categorical(mu_hat.row(s), mdp.n_actions, rng);
                    best = std::max(best, t2.at(s, a));
                }
                acc += best;
            }
            pseudo = acc / static_cast<double>(cfg.mc_draw_sets);
        }
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            if (!mu.in_support(s, a)) out.at(s, a) = pseudo;
    }
    return out;
}

std::pair<QTable, OperatorReport> value_iteration(
    const std::function<QTable(const QTable&)>& op, QTable q0, double tol,
    std::size_t max_iter) {
    if (!(tol > 0.0)) fail(ErrorKind::dimension_mismatch, "tol must be positive");
    OperatorReport report;
    QTable q = std::move(q0);
    const std::size_t trace_every = std::max<std::size_t>(1, max_iter / 64);
    for (std::size_t it = 0; it < max_iter; ++it) {
        QTable next = op(q);
        for (double v : next.values)
            if (!std::isfinite(v))
                fail(ErrorKind::non_finite, "iterate left finite range");
        const double res = linf_distance(next, q);
        q = std::move(next);
        report.iterations = it + 1;
        report.final_residual = res;
        if (it % trace_every == 0) report.residual_trace.push_back(res);
        if (res <= tol) {
            report.converged = true;
            break;
        }
    }
    if (report.residual_trace.empty() ||
        report.residual_trace.back() != report.final_residual)
        report.residual_trace.push_back(report.final_residual);
    return {std::move(q), report};
}

TabularPolicy greedy_policy(const QTable& q, const ActionMask* mask) {
    TabularPolicy pi;
    pi.n_states = q.n_states;
    pi.n_actions = q.n_actions;
    pi.probs.assign(q.n_states * q.n_actions, 0.0);
    for (std::size_t s = 0; s < q.n_states; ++s) {
        std::size_t best_a = 0;
        double best = -std::numeric_limits<double>::infinity();
        if (mask) {
            const auto& allowed = (*mask)[s];
            if (allowed.empty()) fail(ErrorKind::empty_mask, "state " + std::to_string(s));
            for (std::size_t a : allowed) {
                if (q.at(s, a) > best) {
                    best = q.at(s, a);
                    best_a = a;
                }
            }
        } else {
            for (std::size_t a = 0; a < q.n_actions; ++a) {
                if (q.at(s, a) > best) {
                    best = q.at(s, a);
                    best_a = a;
                }
            }
        }
        pi.probs[s * q.n_actions + best_a] = 1.0;
    }
    return pi;
}

QTable policy_evaluation(const TabularMdp& mdp, const TabularPolicy& pi, double tol,
                         std::size_t max_iter) {
    auto op = [&](const QTable& q) { return bellman_backup(q, mdp, pi); };
    auto [q, report] = value_iteration(op, QTable(mdp.n_states, mdp.n_actions), tol,
                                       max_iter);
    return q;
}

double policy_return_with_q(const TabularMdp& mdp, const TabularPolicy& pi,
                            const QTable& q_pi, ReturnMode mode,
                            const Dataset* dataset) {
    std::vector<double> w;
    if (mode == ReturnMode::rho0) {
        w = mdp.rho0;
    } else {
        if (!dataset)
            fail(ErrorKind::missing_dataset, "dataset-states mode needs a dataset");
        w = state_frequencies(*dataset, mdp.n_states);
    }
    double j = 0.0;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
        if (w[s] == 0.0) continue;
        double v = 0.0;
        for (std::size_t a = 0; a < mdp.n_actions; ++a)
            v += pi.prob(s, a) * q_pi.at(s, a);
        j += w[s] * v;
    }
    return j;
}

double policy_return(const TabularMdp& mdp, const TabularPolicy& pi, ReturnMode mode,
                     const Dataset* dataset, double tol) {
    const QTable q = policy_evaluation(mdp, pi, tol);
    return policy_return_with_q(mdp, pi, q, mode, dataset);
}

}  // namespace mcq
