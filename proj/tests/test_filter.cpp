#include "oracles.hpp"

#include "pomdp/distances.hpp"
#include "pomdp/filter.hpp"

#include <doctest.h>

using namespace pomdp;

namespace {

Belief vec(std::initializer_list<double> v) {
    Belief b(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) b[i++] = x;
    return b;
}

/// Calls f(obs, acts) for every history with 1..len observations.
template <typename F>
void for_each_history(int n_obs, int n_actions, int len, F&& f) {
    std::vector<int> obs, acts;
    std::function<void()> rec = [&] {
        f(obs, acts);
        if (static_cast<int>(obs.size()) == len) return;
        for (int u = 0; u < n_actions; ++u)
            for (int y = 0; y < n_obs; ++y) {
                acts.push_back(u);
                obs.push_back(y);
                rec();
                acts.pop_back();
                obs.pop_back();
            }
    };
    for (int y = 0; y < n_obs; ++y) {
        obs = {y};
        acts.clear();
        rec();
    }
}

}  // namespace

TEST_CASE("M1 filter and prediction examples") {
    FinitePOMDP m = make_m1();
    Belief half = vec({0.5, 0.5});
    Belief next = filter_update(m, half, 0, 0);
    CHECK(next[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(next[1] == doctest::Approx(0.2).epsilon(1e-15));
    Vector h = predict_obs(m, half, 0);
    CHECK(h[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(h[1] == doctest::Approx(0.5).epsilon(1e-15));
    std::vector<int> obs = {0}, acts;
    Belief post = brute_force_posterior(m, obs, acts);
    CHECK(post[0] == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(post[1] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("uninformative channel: update equals the state prediction, observation prediction is uniform") {
    FinitePOMDP m = with_observation(make_mixing_example(0.05, {3, 2, 2}, 21), Matrix::Constant(3, 4, 0.25));
    Rng rng(1, 0);
    for (int i = 0; i < 50; ++i) {
        Belief b = rng.dirichlet(3);
        int u = rng.below(2), y = rng.below(4);
        CHECK((filter_update(m, b, u, y) - predict_state(m, b, u)).cwiseAbs().maxCoeff() <= 1e-15);
        CHECK((predict_obs(m, b, u).array() - 0.25).abs().maxCoeff() <= 1e-15);
    }
    std::vector<int> obs = {2, 0, 3}, acts = {1, 0};
    Belief marginal = predict_state(m, predict_state(m, m.prior, 1), 0);
    CHECK((brute_force_posterior(m, obs, acts) - marginal).cwiseAbs().maxCoeff() <= 1e-14);
}

TEST_CASE("identity channel: observation prediction equals the state prediction") {
    FinitePOMDP m = with_observation(make_m1(), Matrix::Identity(2, 2));
    Belief b = vec({0.3, 0.7});
    CHECK((predict_obs(m, b, 0) - predict_state(m, b, 0)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("brute_force_posterior agrees with an independent path enumeration; iterated filter agrees with both") {
    for (std::uint64_t seed = 0; seed < 12; ++seed) {
        int ns = 2 + static_cast<int>(seed % 3), no = 2 + static_cast<int>(seed % 2), na = 1 + static_cast<int>(seed % 2);
        FinitePOMDP m = oracle::sparse_random_model(ns, no, na, 0.3, seed);
        int checked = 0, impossible = 0;
        for_each_history(no, na, 4, [&](const std::vector<int>& obs, const std::vector<int>& acts) {
            Vector ref = oracle::posterior_by_paths(m, obs, acts);
            if (ref.size() == 0) {
                CHECK_THROWS_AS(brute_force_posterior(m, obs, acts), ImpossibleObservation);
                CHECK_THROWS_AS(run_filter(m, m.prior, obs, acts), ImpossibleObservation);
                ++impossible;
                return;
            }
            CHECK((brute_force_posterior(m, obs, acts) - ref).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK((run_filter(m, m.prior, obs, acts) - ref).cwiseAbs().maxCoeff() <= 1e-12);
            ++checked;
        });
        CHECK(checked > 0);
    }
}

TEST_CASE("zero-probability observation raises ImpossibleObservation rather than NaN") {
    FinitePOMDP m = make_m1();
    m.observation << 1.0, 0.0, 0.0, 1.0;
    Belief point = vec({1.0, 0.0});
    FinitePOMDP stuck = m;
    stuck.transition[0] = Matrix::Identity(2, 2);
    CHECK_THROWS_AS(filter_update(stuck, point, 0, 1), ImpossibleObservation);
    CHECK_NOTHROW(filter_update(stuck, point, 0, 0));
}

TEST_CASE("predict_obs and filter_update return probability vectors") {
    Rng rng(77, 0);
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        FinitePOMDP m = oracle::sparse_random_model(3, 3, 2, 0.2, 100 + seed);
        for (int i = 0; i < 50; ++i) {
            Belief b = rng.dirichlet(3);
            int u = rng.below(2);
            Vector h = predict_obs(m, b, u);
            CHECK(h.minCoeff() >= 0.0);
            CHECK(std::abs(h.sum() - 1.0) <= 1e-12);
            for (int y = 0; y < 3; ++y) {
                if (h[y] < 1e-300) continue;
                Belief next = filter_update(m, b, u, y);
                CHECK(next.minCoeff() >= 0.0);
                CHECK(std::abs(next.sum() - 1.0) <= 1e-12);
            }
        }
    }
}

TEST_CASE("regularity constants of M1") {
    RegularityConstants c = stability_constants(make_m1());
    CHECK(c.alpha == doctest::Approx(0.8).epsilon(1e-14));
    CHECK(c.dobrushin_delta_Q == doctest::Approx(0.4).epsilon(1e-14));
    CHECK(c.diameter_D == 1.0);
    CHECK(c.K2 == doctest::Approx(0.88).epsilon(1e-14));
    CHECK(c.K1 == 1.0);
    CHECK(c.birkhoff_tau == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("uniform transition rows give alpha = K2 = tau = 0") {
    FinitePOMDP m = make_m1();
    m.transition[0] = Matrix::Constant(2, 2, 0.5);
    RegularityConstants c = stability_constants(m);
    CHECK(c.alpha == 0.0);
    CHECK(c.K2 == 0.0);
    CHECK(c.birkhoff_tau == doctest::Approx(0.0).epsilon(1e-15));
}

TEST_CASE("Birkhoff cross ratio of [[0.8,0.2],[0.3,0.7]]") {
    Matrix a(2, 2);
    a << 0.8, 0.2, 0.3, 0.7;
    CHECK(birkhoff_cross_ratio(a) == doctest::Approx(0.06 / 0.56).epsilon(1e-14));
    CHECK(birkhoff_coefficient(a) == doctest::Approx(0.507).epsilon(1e-3));
    Matrix z(2, 2);
    z << 1.0, 0.0, 0.5, 0.5;
    CHECK(birkhoff_coefficient(z) == 1.0);
}

TEST_CASE("Birkhoff coefficient agrees with tanh of a quarter projective diameter") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        FinitePOMDP m = make_mixing_example(0.02, {4, 2, 1}, seed);
        CHECK(birkhoff_coefficient(m.transition[0]) == doctest::Approx(oracle::birkhoff_tanh(m.transition[0])).epsilon(1e-10));
    }
}

TEST_CASE("constant invariants: K2 from parts, Dobrushin and Birkhoff extremes") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        FinitePOMDP m = oracle::sparse_random_model(3, 3, 2, seed % 2 ? 0.3 : 0.0, seed);
        RegularityConstants c = stability_constants(m);
        CHECK(c.K2 == k2_from_parts(c.alpha, c.diameter_D, c.dobrushin_delta_Q));
        CHECK(c.dobrushin_delta_Q >= 0.0);
        CHECK(c.dobrushin_delta_Q <= 1.0);
        CHECK(c.birkhoff_tau >= 0.0);
        CHECK(c.birkhoff_tau <= 1.0);
        CHECK(c.dobrushin_delta_Q < 1.0);
        CHECK(c.birkhoff_tau > 0.0);
    }
    FinitePOMDP same = with_observation(make_m1(), Matrix::Constant(2, 2, 0.5));
    CHECK(stability_constants(same).dobrushin_delta_Q == 1.0);
}

TEST_CASE("W1 matches the line-metric closed form; BL equals half the variation under the discrete metric") {
    Rng rng(5, 0);
    Vector z(4);
    z << 0.0, 0.5, 2.0, 2.25;
    Matrix d(4, 4);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) d(i, j) = std::abs(z[i] - z[j]);
    for (int i = 0; i < 100; ++i) {
        Vector p = rng.dirichlet(4), q = rng.dirichlet(4);
        CHECK(wasserstein1(p, q, d) == doctest::Approx(oracle::w1_line(p, q, z)).epsilon(1e-10));
        CHECK(wasserstein1(p, q, discrete_metric(4)) == doctest::Approx(wasserstein1_discrete(p, q)).epsilon(1e-10));
        CHECK(bounded_lipschitz(p, q, discrete_metric(4)) == doctest::Approx(0.5 * total_variation(p, q)).epsilon(1e-10));
        CHECK(bounded_lipschitz(p, q, d) <= wasserstein1(p, q, d) + 1e-12);
    }
}

TEST_CASE("filter stability: identity channel and a single prior give zero distances") {
    FinitePOMDP fo = with_observation(make_mixing_example(0.05, {3, 3, 2}, 8), Matrix::Identity(3, 3));
    std::vector<Belief> priors = {vec({0.2, 0.3, 0.5}), vec({0.6, 0.2, 0.2}), vec({1.0 / 3, 1.0 / 3, 1.0 / 3})};
    StabilityReport r = filter_stability_experiment(fo, uniform_actions(2), priors, 20, 4, 1);
    CHECK(r.degenerate_replications.empty());
    for (const StabilityRow& row : r.rows) {
        CHECK(row.sup_tv == 0.0);
        CHECK(row.sup_w1 == 0.0);
    }
    CHECK(r.exact_merge);
    CHECK(r.filter_stable);

    FinitePOMDP m = make_m1();
    StabilityReport single = filter_stability_experiment(m, uniform_actions(2), {vec({0.3, 0.7})}, 30, 3, 2);
    for (const StabilityRow& row : single.rows) {
        CHECK(row.sup_tv == 0.0);
        CHECK(row.sup_bl == 0.0);
        CHECK(row.sup_w1 == 0.0);
    }
    CHECK(single.filter_stable);
}

TEST_CASE("filter stability on mixing models is dominated by 2 tau^t") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        FinitePOMDP m = make_mixing_example(0.1, {2, 2, 2}, 500 + seed);
        double tau = stability_constants(m).birkhoff_tau;
        REQUIRE(tau < 1.0);
        std::vector<Belief> priors = oracle::simplex_lattice(2, 4);
        StabilityReport r = filter_stability_experiment(m, uniform_actions(2), priors, 40, 4, seed);
        for (const StabilityRow& row : r.rows) {
            CHECK(row.sup_tv <= 2.0 * std::pow(tau, row.t) + 1e-12);
            CHECK(row.sup_tv <= 2.0);
            CHECK(row.sup_bl >= 0.0);
        }
        if (r.fitted_rate) {
            CHECK(*r.fitted_rate >= 0.0);
            CHECK(*r.fitted_rate <= 1.0);
        }
    }
}

TEST_CASE("degenerate priors are flagged per replication, not fatal") {
    FinitePOMDP m = make_m1();
    m.observation << 1.0, 0.0, 0.5, 0.5;
    m.transition[0] = Matrix::Identity(2, 2);
    m.transition[1] = Matrix::Identity(2, 2);
    m.prior = vec({0.0, 1.0});
    std::vector<Belief> priors = {vec({1.0, 0.0}), vec({0.5, 0.5})};
    StabilityReport r = filter_stability_experiment(m, constant_action(0), priors, 10, 6, 3);
    CHECK_FALSE(r.degenerate_replications.empty());
    CHECK(r.degenerate_reasons.size() == r.degenerate_replications.size());
}

TEST_CASE("geometric rate fit recovers an exact ratio and stops at exact merging") {
    std::vector<double> d;
    for (int t = 0; t < 30; ++t) d.push_back(2.0 * std::pow(0.3, t));
    std::optional<double> rate = fit_geometric_rate(d);
    REQUIRE(rate);
    CHECK(*rate == doctest::Approx(0.3).epsilon(1e-10));
    bool merged = false;
    std::vector<double> z = {1.0, 0.5, 0.0, 0.0};
    fit_geometric_rate(z, &merged);
    CHECK(merged);
    CHECK_FALSE(fit_geometric_rate({1.0, 1.0, 1.0, 1.0}).has_value());
}
