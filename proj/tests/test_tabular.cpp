#include <doctest.h>

#include <cmath>
#include <set>

#include "harness.hpp"
#include "tabular.hpp"

using namespace mcq;

TEST_CASE("degenerate one-state chain builds") {
    const TabularMdp mdp = build_mdp(1, 1, {1.0}, {0.0}, {1.0}, 0.9, 1.0);
    CHECK(mdp.p(0, 0, 0) == 1.0);
    CHECK(mdp.value_bound() == doctest::Approx(10.0));
}

TEST_CASE("off-simplex transition row is rejected") {
    // 1 state, 2 actions; second row sums to 0.9.
    CHECK_THROWS_WITH_AS(
        build_mdp(1, 2, {1.0, 0.9}, {0.0, 0.0}, {1.0}, 0.9, 1.0),
        doctest::Contains("InvalidDistribution"), Error);
}

TEST_CASE("reward bound and gamma range are enforced") {
    CHECK_THROWS_AS(build_mdp(1, 1, {1.0}, {2.0}, {1.0}, 0.9, 1.0), Error);
    CHECK_THROWS_AS(build_mdp(1, 1, {1.0}, {0.0}, {1.0}, 1.0, 1.0), Error);
    CHECK_THROWS_AS(build_mdp(1, 1, {1.0, 0.0}, {0.0}, {1.0}, 0.9, 1.0), Error);
}

TEST_CASE("generated random MDP rows are exact simplexes") {
    Rng rng(7);
    auto [mdp, mu] = random_mdp(rng, 5, 3, 1.0, 0.95, 1.0);
    for (std::size_t s = 0; s < 5; ++s) {
        for (std::size_t a = 0; a < 3; ++a) {
            double sum = 0.0;
            for (std::size_t s2 = 0; s2 < 5; ++s2) sum += mdp.p(s, a, s2);
            CHECK(std::abs(sum - 1.0) < 1e-12);
        }
    }
}

TEST_CASE("deterministic cycle rollout is the cycle in order") {
    // Two states, one action, deterministic swap.
    const TabularMdp mdp =
        build_mdp(2, 1, {0.0, 1.0, 1.0, 0.0}, {0.5, -0.5}, {1.0, 0.0}, 0.9, 1.0);
    const TabularPolicy mu = build_policy(2, 1, {1.0, 1.0});
    const Dataset data = collect_dataset(mdp, mu, 1, 4, 123);
    REQUIRE(data.size() == 4);
    const double expected_states[4] = {0, 1, 0, 1};
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(data.transitions[i].s[0] == expected_states[i]);
        CHECK(data.transitions[i].s_next[0] == expected_states[(i + 1) % 2]);
        CHECK(data.transitions[i].d == 0);
    }
}

TEST_CASE("uniform policy action frequencies match within 3 sigma") {
    std::vector<double> t(1 * 3 * 1, 1.0);
    const TabularMdp loop = build_mdp(1, 3, t, {0.0, 0.0, 0.0}, {1.0}, 0.9, 1.0);
    const TabularPolicy mu =
        build_policy(1, 3, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
    const std::size_t n = 10000;
    const Dataset data = collect_dataset(loop, mu, 1, n, 5);
    double counts[3] = {0, 0, 0};
    for (const auto& tr : data.transitions) counts[(int)tr.a[0]] += 1;
    const double p = 1.0 / 3.0;
    const double sigma = std::sqrt(p * (1 - p) * n);
    for (double c : counts) CHECK(std::abs(c - p * n) < 3 * sigma);
}

TEST_CASE("collection is deterministic in the seed") {
    Rng rng(9);
    auto [mdp, mu] = random_mdp(rng, 4, 3, 0.5, 0.9, 1.0);
    const Dataset a = collect_dataset(mdp, mu, 3, 17, 99);
    const Dataset b = collect_dataset(mdp, mu, 3, 17, 99);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.transitions[i].s[0] == b.transitions[i].s[0]);
        CHECK(a.transitions[i].a[0] == b.transitions[i].a[0]);
        CHECK(a.transitions[i].s_next[0] == b.transitions[i].s_next[0]);
    }
}

TEST_CASE("dataset actions always lie in the behavior support") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        auto [mdp, mu] = random_mdp(rng, 6, 4, 0.5, 0.9, 1.0);
        const Dataset data = collect_dataset(mdp, mu, 5, 50, seed);
        for (const auto& tr : data.transitions)
            CHECK(mu.in_support((std::size_t)tr.s[0], (std::size_t)tr.a[0]));
    }
}

TEST_CASE("empirical behavior from explicit counts") {
    Dataset data;
    data.discrete = true;
    auto push = [&](double s, double a) {
        Transition tr;
        tr.s = {s};
        tr.a = {a};
        tr.s_next = {s};
        data.transitions.push_back(tr);
    };
    push(0, 0);
    push(0, 0);
    push(0, 0);
    push(0, 1);
    const TabularPolicy mu_hat = empirical_behavior(data, 2, 2, 0.0);
    CHECK(mu_hat.prob(0, 0) == doctest::Approx(0.75));
    CHECK(mu_hat.prob(0, 1) == doctest::Approx(0.25));
    // State 1 never visited: uniform fallback.
    CHECK(mu_hat.prob(1, 0) == doctest::Approx(0.5));
    CHECK(mu_hat.prob(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("empirical behavior rejects an empty dataset") {
    Dataset empty;
    CHECK_THROWS_WITH_AS(empirical_behavior(empty, 2, 2, 0.0),
                         doctest::Contains("EmptyDataset"), Error);
}

TEST_CASE("empirical behavior converges to the true policy") {
    std::vector<double> t(2 * 2 * 2, 0.5);
    const TabularMdp mdp =
        build_mdp(2, 2, t, {0.0, 0.0, 0.0, 0.0}, {0.5, 0.5}, 0.9, 1.0);
    const TabularPolicy mu = build_policy(2, 2, {0.5, 0.5, 0.5, 0.5});
    const Dataset data = collect_dataset(mdp, mu, 10, 10000, 3);
    const TabularPolicy mu_hat = empirical_behavior(data, 2, 2, 0.0);
    for (std::size_t s = 0; s < 2; ++s) {
        std::vector<double> p(mu.row(s), mu.row(s) + 2);
        std::vector<double> q(mu_hat.row(s), mu_hat.row(s) + 2);
        CHECK(tv_distance(p, q) < 0.02);
    }
}

TEST_CASE("smoothing-free estimate stays inside the true support") {
    Rng rng(21);
    auto [mdp, mu] = random_mdp(rng, 5, 4, 0.5, 0.9, 1.0);
    const Dataset data = collect_dataset(mdp, mu, 20, 200, 4);
    const TabularPolicy mu_hat = empirical_behavior(data, 5, 4, 0.0);
    const auto freq = state_frequencies(data, 5);
    for (std::size_t s = 0; s < 5; ++s) {
        if (freq[s] == 0.0) continue;  // uniform fallback rows are exempt
        for (std::size_t a = 0; a < 4; ++a)
            if (mu_hat.in_support(s, a)) CHECK(mu.in_support(s, a));
    }
}

TEST_CASE("tv distance basics") {
    CHECK(tv_distance({0.3, 0.7}, {0.3, 0.7}) == 0.0);
    CHECK(tv_distance({1.0, 0.0}, {0.0, 1.0}) == 1.0);
    CHECK(tv_distance({0.7, 0.3}, {0.5, 0.5}) == doctest::Approx(0.2));
    CHECK_THROWS_WITH_AS(tv_distance({1.0}, {0.5, 0.5}),
                         doctest::Contains("LengthMismatch"), Error);
}

TEST_CASE("tv distance is symmetric and satisfies the triangle inequality") {
    Rng rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 2 + rng.uniform_int(5);
        auto simplex = [&]() {
            std::vector<double> v(n);
            double sum = 0.0;
            for (auto& x : v) {
                x = -std::log(std::max(rng.uniform(), 1e-300));
                sum += x;
            }
            for (auto& x : v) x /= sum;
            return v;
        };
        const auto p = simplex(), q = simplex(), r = simplex();
        const double pq = tv_distance(p, q);
        CHECK(pq == doctest::Approx(tv_distance(q, p)));
        CHECK(pq <= tv_distance(p, r) + tv_distance(r, q) + 1e-12);
        CHECK(pq >= 0.0);
        CHECK(pq <= 1.0);
    }
}
