#include <doctest.h>

#include <cmath>

#include "dp.hpp"
#include "harness.hpp"
#include "test_util.hpp"

using namespace mcq;
using namespace mcq::testutil;

namespace {

TabularMdp self_loop_2a(double r0, double r1, double gamma) {
    // One state, two actions, both self-loops.
    return build_mdp(1, 2, {1.0, 1.0}, {r0, r1}, {1.0},
                     gamma, std::max({1.0, std::abs(r0), std::abs(r1)}));
}

}  // namespace

TEST_CASE("discount zero backup returns the reward table") {
    Rng rng(2);
    auto [mdp, mu] = random_mdp(rng, 4, 3, 1.0, 0.0, 1.0);
    QTable q(4, 3);
    for (auto& v : q.values) v = 5.0;
    const QTable out = bellman_backup(q, mdp, mu);
    for (std::size_t s = 0; s < 4; ++s)
        for (std::size_t a = 0; a < 3; ++a)
            CHECK(out.at(s, a) == doctest::Approx(mdp.r(s, a)));
}

TEST_CASE("single backup on a one-state chain") {
    const TabularMdp mdp = build_mdp(1, 1, {1.0}, {1.0}, {1.0}, 0.9, 1.0);
    const TabularPolicy pi = build_policy(1, 1, {1.0});
    QTable q(1, 1);
    const QTable out = bellman_backup(q, mdp, pi);
    CHECK(out.at(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("repeated policy backup converges to the linear-solve oracle") {
    Rng rng(7);
    auto [mdp, mu] = random_mdp(rng, 5, 3, 1.0, 0.9, 1.0);
    auto op = [&](const QTable& q) { return bellman_backup(q, mdp, mu); };
    auto [q, report] = value_iteration(op, QTable(5, 3), 1e-10, 100000);
    CHECK(report.converged);
    const QTable oracle = policy_q_linear_solve(mdp, mu);
    CHECK(linf_distance(q, oracle) < 1e-8);
}

TEST_CASE("optimal backup with a single action equals the policy backup") {
    Rng rng(3);
    auto [mdp, mu] = random_mdp(rng, 4, 1, 1.0, 0.85, 1.0);
    QTable q(4, 1);
    for (auto& v : q.values) v = rng.uniform(-5, 5);
    const QTable a = bellman_optimal(q, mdp);
    const QTable b = bellman_backup(q, mdp, mu);
    CHECK(linf_distance(a, b) < 1e-12);
}

TEST_CASE("optimal backup takes the max of the next-state row") {
    const TabularMdp mdp = self_loop_2a(0.0, 0.0, 0.9);
    QTable q(1, 2);
    q.at(0, 0) = 3.0;
    q.at(0, 1) = 5.0;
    const QTable out = bellman_optimal(q, mdp);
    CHECK(out.at(0, 0) == doctest::Approx(4.5));
    CHECK(out.at(0, 1) == doctest::Approx(4.5));
}

TEST_CASE("masking the argmax action lowers the backup") {
    const TabularMdp mdp = self_loop_2a(0.0, 0.0, 0.9);
    QTable q(1, 2);
    q.at(0, 0) = 3.0;
    q.at(0, 1) = 5.0;
    ActionMask mask{{0}};  // hide action 1, the unique argmax
    const QTable out = bellman_optimal(q, mdp, &mask);
    CHECK(out.at(0, 0) == doctest::Approx(2.7));
    ActionMask empty{{}};
    CHECK_THROWS_WITH_AS(bellman_optimal(q, mdp, &empty),
                         doctest::Contains("EmptyMask"), Error);
}

TEST_CASE("full-support conservative backup equals the optimal backup") {
    Rng rng(4);
    auto [mdp, mu] = random_mdp(rng, 5, 3, 1.0, 0.9, 1.0);
    QTable q(5, 3);
    for (auto& v : q.values) v = rng.uniform(-10, 10);
    const QTable a = mcb_apply(q, mdp, mu, 0.1);
    const QTable b = bellman_optimal(q, mdp);
    CHECK(linf_distance(a, b) < 1e-12);
}

TEST_CASE("out-of-support entries get the best in-support value minus delta") {
    // Support {a0}; r(s,a0)=1.1, q = [1.0, 0.5] so the intermediate value at
    // a0 is 1.1 + 0.9 * 1.0 = 2.0.
    const TabularMdp mdp = self_loop_2a(1.1, 0.0, 0.9);
    const TabularPolicy mu = build_policy(1, 2, {1.0, 0.0});
    QTable q(1, 2);
    q.at(0, 0) = 1.0;
    q.at(0, 1) = 0.5;
    const QTable out = mcb_apply(q, mdp, mu, 0.1);
    CHECK(out.at(0, 0) == doctest::Approx(2.0));
    CHECK(out.at(0, 1) == doctest::Approx(1.9));
}

TEST_CASE("conservative fixed point matches the support-masked optimum") {
    Rng rng(11);
    auto [mdp, mu] = random_mdp(rng, 6, 3, 0.5, 0.9, 1.0);
    const double delta = 1e-6 * mdp.value_bound();
    auto [q_mcb, rep1] = value_iteration(
        [&](const QTable& q) { return mcb_apply(q, mdp, mu, delta); },
        QTable(6, 3), 1e-10, 100000);
    const ActionMask mask = support_mask(mu);
    auto [q_star, rep2] = value_iteration(
        [&](const QTable& q) { return bellman_optimal(q, mdp, &mask); },
        QTable(6, 3), 1e-10, 100000);
    CHECK(rep1.converged);
    CHECK(rep2.converged);
    for (std::size_t s = 0; s < 6; ++s)
        for (std::size_t a = 0; a < 3; ++a)
            if (mu.in_support(s, a))
                CHECK(std::abs(q_mcb.at(s, a) - q_star.at(s, a)) < 1e-8);
}

TEST_CASE("full-action intermediate max equals the support-masked max at the fixed point") {
    // After one application every out-of-support entry sits strictly below
    // the in-support maximum, so the two stage-two variants agree.
    Rng rng(13);
    auto [mdp, mu] = random_mdp(rng, 5, 4, 0.5, 0.9, 1.0);
    const double delta = 1e-4;
    QTable q(5, 4);
    for (auto& v : q.values) v = rng.uniform(-10, 10);
    const QTable once = mcb_apply(q, mdp, mu, delta);
    // Reference: stage two using the support-masked max instead of the full max.
    const ActionMask mask = support_mask(mu);
    QTable t2_masked = bellman_optimal(once, mdp, &mask);
    for (std::size_t s = 0; s < 5; ++s)
        for (std::size_t a = 0; a < 4; ++a)
            if (!mu.in_support(s, a)) t2_masked.at(s, a) = once.at(s, a);
    QTable expect = t2_masked;
    for (std::size_t s = 0; s < 5; ++s) {
        double best = -1e300;
        for (std::size_t a = 0; a < 4; ++a)
            if (mu.in_support(s, a)) best = std::max(best, t2_masked.at(s, a));
        for (std::size_t a = 0; a < 4; ++a)
            if (!mu.in_support(s, a)) expect.at(s, a) = best - delta;
    }
    const QTable twice = mcb_apply(once, mdp, mu, delta);
    CHECK(linf_distance(twice, expect) < 1e-12);
}

TEST_CASE("expected max of draws: closed-form two-point case") {
    const double values[2] = {1.0, 2.0};
    const double probs[2] = {0.5, 0.5};
    CHECK(expected_max_of_draws(values, probs, 2, 1) == doctest::Approx(1.5));
    CHECK(expected_max_of_draws(values, probs, 2, 2) == doctest::Approx(1.75));
    CHECK(expected_max_of_draws(values, probs, 2, 3) == doctest::Approx(1.875));
}

TEST_CASE("expected max of draws is monotone in the draw count") {
    Rng rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.uniform_int(6);
        std::vector<double> values(n), probs(n);
        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            values[i] = rng.uniform(-5, 5);
            probs[i] = -std::log(std::max(rng.uniform(), 1e-300));
            sum += probs[i];
        }
        for (auto& p : probs) p /= sum;
        double prev = -1e300;
        for (std::size_t k = 1; k <= 16; k *= 2) {
            const double cur = expected_max_of_draws(values.data(), probs.data(), n, k);
            CHECK(cur >= prev - 1e-12);
            prev = cur;
        }
    }
}

TEST_CASE("practical operator with a deterministic empirical policy") {
    const TabularMdp mdp = self_loop_2a(1.1, 0.0, 0.9);
    const TabularPolicy mu = build_policy(1, 2, {1.0, 0.0});
    // Empirical policy pinned on action 0.
    const TabularPolicy mu_hat = build_policy(1, 2, {1.0, 0.0});
    QTable q(1, 2);
    q.at(0, 0) = 1.0;
    q.at(0, 1) = 0.5;
    for (std::size_t n : {1ul, 4ul, 32ul}) {
        PracticalMcbConfig cfg;
        cfg.n_samples = n;
        const QTable out = practical_mcb_apply(q, mdp, mu, mu_hat, cfg);
        CHECK(out.at(0, 1) == doctest::Approx(2.0));  // t2 at the pinned action
    }
}

TEST_CASE("practical operator with one draw reduces to the expectation") {
    Rng rng(23);
    auto [mdp, mu] = random_mdp(rng, 4, 3, 0.34, 0.9, 1.0);  // support size 2... ceil(0.34*3)=2
    const TabularPolicy mu_hat = build_policy(4, 3, std::vector<double>(12, 1.0 / 3));
    QTable q(4, 3);
    for (auto& v : q.values) v = rng.uniform(-3, 3);
    PracticalMcbConfig cfg;
    cfg.n_samples = 1;
    const QTable out = practical_mcb_apply(q, mdp, mu, mu_hat, cfg);
    // Recompute the stage-two table by hand and average it.
    const QTable t2_ref = [&] {
        QTable t = bellman_optimal(q, mdp);
        for (std::size_t s = 0; s < 4; ++s)
            for (std::size_t a = 0; a < 3; ++a)
                if (!mu.in_support(s, a)) t.at(s, a) = q.at(s, a);
        return t;
    }();
    for (std::size_t s = 0; s < 4; ++s) {
        double mean = 0.0;
        for (std::size_t a = 0; a < 3; ++a) mean += t2_ref.at(s, a) / 3.0;
        for (std::size_t a = 0; a < 3; ++a)
            if (!mu.in_support(s, a)) CHECK(out.at(s, a) == doctest::Approx(mean));
    }
}

TEST_CASE("large draw counts approach the in-support maximum") {
    Rng rng(29);
    auto [mdp, mu] = random_mdp(rng, 4, 4, 0.5, 0.9, 1.0);
    QTable q(4, 4);
    for (auto& v : q.values) v = rng.uniform(-3, 3);
    PracticalMcbConfig big;
    big.n_samples = 400;
    const QTable out = practical_mcb_apply(q, mdp, mu, mu, big);
    const QTable exact = mcb_apply(q, mdp, mu, 0.0);
    for (std::size_t s = 0; s < 4; ++s)
        for (std::size_t a = 0; a < 4; ++a)
            if (!mu.in_support(s, a))
                CHECK(std::abs(out.at(s, a) - exact.at(s, a)) < 1e-3);
}

TEST_CASE("exact enumeration agrees with Monte Carlo") {
    Rng rng(31);
    auto [mdp, mu] = random_mdp(rng, 3, 3, 0.34, 0.9, 1.0);
    QTable q(3, 3);
    for (auto& v : q.values) v = rng.uniform(-2, 2);
    PracticalMcbConfig exact_cfg;
    exact_cfg.n_samples = 5;
    PracticalMcbConfig mc_cfg = exact_cfg;
    mc_cfg.exact_enumeration_limit = 0;  // force sampling
    mc_cfg.mc_draw_sets = 20000;
    mc_cfg.mc_seed = 77;
    const QTable a = practical_mcb_apply(q, mdp, mu, mu, exact_cfg);
    const QTable b = practical_mcb_apply(q, mdp, mu, mu, mc_cfg);
    CHECK(linf_distance(a, b) < 0.05);
}

TEST_CASE("value iteration meets the geometric iteration bound") {
    Rng rng(37);
    auto [mdp, mu] = random_mdp(rng, 6, 3, 1.0, 0.9, 1.0);
    const double tol = 1e-8;
    auto [q, report] = value_iteration(
        [&](const QTable& t) { return bellman_optimal(t, mdp); }, QTable(6, 3),
        tol, 100000);
    CHECK(report.converged);
    const double range = 2.0 * mdp.value_bound();
    const double bound =
        std::ceil(std::log(tol * (1 - mdp.gamma) / range) / std::log(mdp.gamma));
    CHECK(report.iterations <= static_cast<std::size_t>(bound) + 5);
}

TEST_CASE("a fixed-point start converges immediately") {
    Rng rng(41);
    auto [mdp, mu] = random_mdp(rng, 4, 2, 1.0, 0.9, 1.0);
    auto op = [&](const QTable& t) { return bellman_optimal(t, mdp); };
    auto [q_star, rep1] = value_iteration(op, QTable(4, 2), 1e-12, 100000);
    auto [q2, rep2] = value_iteration(op, q_star, 1e-10, 100000);
    CHECK(rep2.converged);
    CHECK(rep2.iterations == 1);
}

TEST_CASE("the fixed point is unique across starting tables") {
    Rng rng(43);
    auto [mdp, mu] = random_mdp(rng, 5, 3, 0.5, 0.9, 1.0);
    const double tol = 1e-9;
    auto op = [&](const QTable& t) { return mcb_apply(t, mdp, mu, 1e-4); };
    QTable q0a(5, 3), q0b(5, 3);
    for (auto& v : q0a.values) v = rng.uniform(-10, 10);
    for (auto& v : q0b.values) v = rng.uniform(-10, 10);
    auto [qa, ra] = value_iteration(op, q0a, tol, 100000);
    auto [qb, rb] = value_iteration(op, q0b, tol, 100000);
    CHECK(linf_distance(qa, qb) <= 2 * tol / (1 - mdp.gamma));
}

TEST_CASE("value iteration rejects non-finite iterates") {
    auto op = [](const QTable& t) {
        QTable q = t;
        for (auto& v : q.values) v = v * 2.0 + 1e308;
        return q;
    };
    CHECK_THROWS_WITH_AS(value_iteration(op, QTable(1, 1), 1e-8, 10),
                         doctest::Contains("NonFinite"), Error);
}

TEST_CASE("greedy extraction and tie breaking") {
    QTable q(2, 3);
    q.at(0, 0) = 1;
    q.at(0, 1) = 3;
    q.at(0, 2) = 2;
    q.at(1, 0) = 2;
    q.at(1, 1) = 2;
    q.at(1, 2) = 0;
    const TabularPolicy pi = greedy_policy(q);
    CHECK(pi.prob(0, 1) == 1.0);
    CHECK(pi.prob(1, 0) == 1.0);  // tie broken toward the lowest id
}

TEST_CASE("greedy on the conservative fixed point stays in support") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        auto [mdp, mu] = random_mdp(rng, 5 + seed % 4, 2 + seed % 4,
                                    0.5, 0.9, 1.0);
        const double delta = 1e-6 * mdp.value_bound();
        auto [q_mcb, rep] = value_iteration(
            [&](const QTable& t) { return mcb_apply(t, mdp, mu, delta); },
            QTable(mdp.n_states, mdp.n_actions), 1e-10, 100000);
        const TabularPolicy greedy = greedy_policy(q_mcb);
        for (std::size_t s = 0; s < mdp.n_states; ++s)
            for (std::size_t a = 0; a < mdp.n_actions; ++a)
                if (greedy.prob(s, a) > 0.0) CHECK(mu.in_support(s, a));
    }
}

TEST_CASE("constant reward evaluates to c over one minus gamma") {
    std::vector<double> t(3 * 2 * 3, 1.0 / 3.0);
    const TabularMdp mdp =
        build_mdp(3, 2, t, std::vector<double>(6, 0.7), {1, 0, 0}, 0.9, 1.0);
    const TabularPolicy pi = build_policy(3, 2, std::vector<double>(6, 0.5));
    const QTable q = policy_evaluation(mdp, pi, 1e-10);
    for (double v : q.values) CHECK(v == doctest::Approx(7.0).epsilon(1e-7));
}

TEST_CASE("deterministic two-cycle has the hand-solved values") {
    const TabularMdp mdp = two_cycle(1.0, 0.0, 0.5);
    const TabularPolicy pi = build_policy(2, 1, {1.0, 1.0});
    const QTable q = policy_evaluation(mdp, pi, 1e-12);
    CHECK(q.at(0, 0) == doctest::Approx(4.0 / 3.0));
    CHECK(q.at(1, 0) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("policy evaluation matches the linear-solve oracle on random MDPs") {
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        Rng rng(seed);
        auto [mdp, mu] = random_mdp(rng, 3 + seed % 6, 2 + seed % 4, 0.5,
                                    seed % 2 ? 0.9 : 0.95, 1.0);
        const QTable q = policy_evaluation(mdp, mu, 1e-10);
        const QTable oracle = policy_q_linear_solve(mdp, mu);
        CHECK(linf_distance(q, oracle) < 1e-7);
    }
}

TEST_CASE("constant reward return is the same in both weighting modes") {
    std::vector<double> t(3 * 2 * 3, 1.0 / 3.0);
    const TabularMdp mdp =
        build_mdp(3, 2, t, std::vector<double>(6, 1.0), {1, 0, 0}, 0.9, 1.0);
    const TabularPolicy pi = build_policy(3, 2, std::vector<double>(6, 0.5));
    const double j0 = policy_return(mdp, pi, ReturnMode::rho0);
    const Dataset data = collect_dataset(mdp, pi, 3, 100, 1);
    const double j1 = policy_return(mdp, pi, ReturnMode::dataset_states, &data);
    CHECK(j0 == doctest::Approx(10.0));
    CHECK(j1 == doctest::Approx(10.0));
    CHECK_THROWS_WITH_AS(policy_return(mdp, pi, ReturnMode::dataset_states),
                         doctest::Contains("MissingDataset"), Error);
}

TEST_CASE("a point-mass start distribution returns that state's value") {
    Rng rng(51);
    auto [mdp, mu] = random_mdp(rng, 4, 2, 1.0, 0.9, 1.0);
    TabularMdp pointed = mdp;
    pointed.rho0 = {0.0, 0.0, 1.0, 0.0};
    const QTable q = policy_evaluation(pointed, mu, 1e-10);
    double v2 = 0.0;
    for (std::size_t a = 0; a < 2; ++a) v2 += mu.prob(2, a) * q.at(2, a);
    CHECK(policy_return(pointed, mu, ReturnMode::rho0) == doctest::Approx(v2));
}

TEST_CASE("exact return matches a Monte Carlo rollout oracle") {
    Rng rng(53);
    auto [mdp, mu] = random_mdp(rng, 5, 3, 1.0, 0.95, 1.0);
    const double j = policy_return(mdp, mu, ReturnMode::rho0);

    // Rollout oracle: discounted sums over 2000 episodes of 400 steps.
    Rng roll(999);
    const std::size_t episodes = 2000, steps = 400;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t ep = 0; ep < episodes; ++ep) {
        std::size_t s = sample_categorical(mdp.rho0.data(), mdp.n_states, roll);
        double ret = 0.0, disc = 1.0;
        for (std::size_t t = 0; t < steps; ++t) {
            const std::size_t a = sample_categorical(mu.row(s), mdp.n_actions, roll);
            ret += disc * mdp.r(s, a);
            disc *= mdp.gamma;
            s = sample_categorical(mdp.p_row(s, a), mdp.n_states, roll);
        }
        sum += ret;
        sum2 += ret * ret;
    }
    const double mean = sum / episodes;
    const double var = sum2 / episodes - mean * mean;
    const double sigma = std::sqrt(var / episodes);
    CHECK(std::abs(j - mean) < 3 * sigma + 1e-6);
}
