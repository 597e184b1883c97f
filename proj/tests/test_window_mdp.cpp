#include "oracles.hpp"

#include "pomdp/window_mdp.hpp"

#include <doctest.h>

#include <set>

using namespace pomdp;

namespace {

TruncatedHistory random_history(Rng& rng, int len, int n_obs, int n_actions) {
    TruncatedHistory h;
    for (int k = 0; k < len; ++k) h.obs.push_back(rng.below(n_obs));
    for (int k = 0; k < len; ++k) h.acts.push_back(rng.below(n_actions));
    return h;
}

FinitePOMDP with_prior(FinitePOMDP m, const Belief& prior) {
    m.prior = prior;
    return m;
}

}  // namespace

TEST_CASE("window codec is a bijection and shift drops the oldest pair") {
    WindowCodec codec(3, 2);
    CHECK(codec.count(1) == 3);
    CHECK(codec.count(3) == 3 * 3 * 3 * 2 * 2);
    for (int k = 1; k <= 3; ++k)
        for (long i = 0; i < codec.count(k); ++i) {
            WindowState w = codec.decode(i, k);
            CHECK(static_cast<int>(w.obs_window.size()) == k);
            CHECK(w.act_window.size() + 1 == w.obs_window.size());
            CHECK(codec.encode(w.obs_window, w.act_window) == i);
            CHECK(oracle::window_index(w.obs_window, w.act_window, 3, 2) == i);
        }
    for (long i = 0; i < codec.count(3); ++i) {
        WindowState w = codec.decode(i, 3);
        std::vector<int> obs(w.obs_window.begin() + 1, w.obs_window.end()), acts(w.act_window.begin() + 1, w.act_window.end());
        obs.push_back(2);
        acts.push_back(1);
        CHECK(codec.shift(i, 3, 1, 2) == oracle::window_index(obs, acts, 3, 2));
    }
}

TEST_CASE("product metric examples") {
    Rng rng(1, 0);
    TruncatedHistory a = random_history(rng, 10, 3, 2);
    CHECK(product_metric(a, a, 10) == 0.0);
    TruncatedHistory b;
    for (int k = 0; k < 60; ++k) {
        b.obs.push_back(0);
        b.acts.push_back(0);
    }
    TruncatedHistory c = b;
    for (int& y : c.obs) y = 1;
    for (int& u : c.acts) u = 1;
    CHECK(product_metric(b, c, 59) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(product_metric(b, c, 59) <= 2.0);
    TruncatedHistory d = b;
    d.obs[0] = 1;
    CHECK(product_metric(b, d, 5) == 0.5);
    d = b;
    d.acts[0] = 1;
    CHECK(product_metric(b, d, 5) == 0.5);
}

TEST_CASE("product metric is symmetric, separates at depth and satisfies the triangle inequality") {
    Rng rng(2, 0);
    for (int i = 0; i < 2000; ++i) {
        int len = 1 + rng.below(8);
        TruncatedHistory x = random_history(rng, len, 2, 2), y = random_history(rng, len, 2, 2),
                         z = random_history(rng, len, 2, 2);
        double dxy = product_metric(x, y, len), dyx = product_metric(y, x, len);
        CHECK(dxy == dyx);
        CHECK((dxy == 0.0) == (x.obs == y.obs && x.acts == y.acts));
        CHECK(dxy <= product_metric(x, z, len) + product_metric(z, y, len) + 1e-15);
    }
}

TEST_CASE("histories agreeing below lag N are within 3 2^-N") {
    Rng rng(3, 0);
    for (int N = 1; N <= 8; ++N)
        for (int i = 0; i < 500; ++i) {
            TruncatedHistory a = random_history(rng, 40, 3, 3), b = random_history(rng, 40, 3, 3);
            for (int k = 0; k < N; ++k) b.obs[k] = a.obs[k];
            for (int m = 1; m < N; ++m) b.acts[m - 1] = a.acts[m - 1];
            CHECK(product_metric(a, b, 39) <= 3.0 * std::pow(2.0, -N));
        }
}

TEST_CASE("window MDP at N = 1 of a fully observed model is the underlying MDP") {
    oracle::FlatMDP f = oracle::random_flat_mdp(3, 2, 7);
    FinitePOMDP m = make_fully_observed(f.T, f.c, 0.9, Vector::Constant(3, 1.0 / 3));
    WindowMDP w = build_window_mdp(m, 1, m.prior);
    REQUIRE(w.n_states() == 3);
    for (int u = 0; u < 2; ++u)
        for (int s = 0; s < 3; ++s) {
            CHECK(w.chain.cost(s, u) == doctest::Approx(f.c(s, u)).epsilon(1e-15));
            for (int s2 = 0; s2 < 3; ++s2) CHECK(w.chain.kernel[u].coeff(s, s2) == doctest::Approx(f.T[u](s, s2)).epsilon(1e-14));
        }
}

TEST_CASE("uninformative channel: window beliefs depend only on the actions") {
    FinitePOMDP m = with_observation(make_mixing_example(0.1, {3, 2, 2}, 4), Matrix::Constant(3, 2, 0.5));
    WindowMDP w = build_window_mdp(m, 3, Vector::Constant(3, 1.0 / 3));
    for (long s = 0; s < w.n_states(); ++s)
        for (long t = 0; t < w.n_states(); ++t)
            if (w.state(s).act_window == w.state(t).act_window)
                CHECK((w.belief_of_state[s] - w.belief_of_state[t]).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("M1 N = 2 window MDP: 8 states, stochastic rows, beliefs equal path-enumeration posteriors") {
    FinitePOMDP m = make_m1();
    Belief ref = Vector::Constant(2, 0.5);
    WindowMDP w = build_window_mdp(m, 2, ref);
    CHECK(w.n_states() == 8);
    for (int u = 0; u < 2; ++u)
        for (long s = 0; s < 8; ++s) CHECK(std::abs(w.chain.kernel[u].row(s).sum() - 1.0) <= 1e-12);
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        FinitePOMDP r = oracle::sparse_random_model(3, 2, 2, 0.3, 900 + seed);
        Belief prior = Vector::Constant(3, 1.0 / 3);
        WindowMDP wr = build_window_mdp(r, 3, prior);
        for (long s = 0; s < wr.n_states(); ++s) {
            for (int u = 0; u < 2; ++u) CHECK(std::abs(wr.chain.kernel[u].row(s).sum() - 1.0) <= 1e-12);
            WindowState ws = wr.state(s);
            Vector post = oracle::posterior_by_paths(with_prior(r, prior), ws.obs_window, ws.act_window);
            CHECK(wr.impossible[s] == (post.size() == 0));
            if (post.size() == 0) continue;
            CHECK((wr.belief_of_state[s] - post).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK(wr.chain.cost.row(s).maxCoeff() <= r.c_max + 1e-15);
        }
    }
}

TEST_CASE("discounted window solve on trivial models") {
    FinitePOMDP m = make_m1();
    m.cost.setZero();
    ValueTable zero = solve_discounted_window(build_window_mdp(m, 2, m.prior), 1e-10);
    CHECK(zero.values.cwiseAbs().maxCoeff() == 0.0);

    Matrix c(1, 2);
    c << 2.0, 5.0;
    FinitePOMDP single = make_fully_observed({Matrix::Ones(1, 1), Matrix::Ones(1, 1)}, c, 0.9, Vector::Ones(1));
    ValueTable v = solve_discounted_window(build_window_mdp(single, 1, single.prior), 1e-12);
    CHECK(v.values[0] == doctest::Approx(20.0).epsilon(1e-10));
    CHECK(v.policy[0] == 0);
}

TEST_CASE("exact window-policy evaluation matches forward propagation of the joint law") {
    for (int N : {1, 2, 3}) {
        for (std::uint64_t seed : {0, 1}) {
            FinitePOMDP m = seed == 0 ? make_m1() : make_mixing_example(0.1, {3, 2, 2}, 77);
            WindowMDP w = build_window_mdp(m, N, Vector::Constant(m.n_states, 1.0 / m.n_states));
            ValueTable sol = solve_discounted_window(w, 1e-10);
            std::vector<std::vector<int>> prefix = short_window_policies(m, N);
            auto act_short = [&](const std::vector<int>& obs, const std::vector<int>& acts) {
                long idx = oracle::window_index(obs, acts, m.n_obs, m.n_actions);
                int k = static_cast<int>(obs.size());
                return k == N ? sol.policy[idx] : prefix[k - 1][idx];
            };
            auto act_pad = [&](const std::vector<int>& obs, const std::vector<int>& acts) {
                std::vector<int> o = obs, a = acts;
                int first = a.empty() ? 0 : a.front();
                while (static_cast<int>(o.size()) < N) {
                    o.insert(o.begin(), obs.front());
                    a.insert(a.begin(), first);
                }
                return sol.policy[oracle::window_index(o, a, m.n_obs, m.n_actions)];
            };
            double exact = evaluate_window_policy(m, w, sol.policy).value;
            double forward = oracle::window_policy_cost_forward(m, N, act_short, 400);
            CHECK(exact == doctest::Approx(forward).epsilon(1e-10));
            double exact_pad = evaluate_window_policy(m, w, sol.policy, InitialFill::kPadRepeat).value;
            CHECK(exact_pad == doctest::Approx(oracle::window_policy_cost_forward(m, N, act_pad, 400)).epsilon(1e-10));
        }
    }
}

TEST_CASE("fully observed N = 1 window policy achieves the flat optimal value; zero cost evaluates to zero") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        oracle::FlatMDP f = oracle::random_flat_mdp(4, 3, 20 + seed);
        Vector mu = Vector::Constant(4, 0.25);
        FinitePOMDP m = make_fully_observed(f.T, f.c, 0.9, mu);
        WindowMDP w = build_window_mdp(m, 1, mu);
        ValueTable sol = solve_discounted_window(w, 1e-12);
        double flat = mu.dot(oracle::flat_value_iteration(f.T, f.c, 0.9));
        CHECK(std::abs(evaluate_window_policy(m, w, sol.policy).value - flat) <= 1e-8);
    }
    FinitePOMDP m = make_m1();
    m.cost.setZero();
    WindowMDP w = build_window_mdp(m, 2, m.prior);
    std::vector<int> any(static_cast<std::size_t>(w.n_states()), 1);
    CHECK(evaluate_window_policy(m, w, any).value == 0.0);
}

TEST_CASE("window error bound closed form") {
    RegularityConstants c;
    c.K1_bar = 1.0;
    c.K2_bar = 0.0;
    std::optional<double> b = window_error_bound(c, 3, 0.9);
    REQUIRE(b);
    CHECK(*b == doctest::Approx(75.0).epsilon(1e-12));
    c.K2_bar = 1.2;
    CHECK_FALSE(window_error_bound(c, 3, 0.9).has_value());
    c.K2_bar = 0.5;
    double prev = 1e300;
    for (int N = 1; N <= 30; ++N) {
        double v = *window_error_bound(c, N, 0.9);
        if (N > 1) CHECK(v / prev == doctest::Approx(0.5).epsilon(1e-12));
        prev = v;
    }
    CHECK(prev == doctest::Approx(6.0 * std::ldexp(1.0, -30) / (0.01 * 0.55)).epsilon(1e-12));
}

TEST_CASE("history Lipschitz estimates are nonnegative and exhaustive on small windows") {
    FinitePOMDP m = make_m1();
    WindowMDP w = build_window_mdp(m, 2, m.prior);
    HistoryLipschitz h = estimate_history_lipschitz(w, 100, 1);
    CHECK(h.K1_bar >= 0.0);
    CHECK(h.K2_bar >= 0.0);
    CHECK(h.pairs == 8 * 7 / 2);
}

TEST_CASE("Q-learning trivial fixed points") {
    Matrix c(1, 1);
    c << 1.0;
    FinitePOMDP one = make_fully_observed({Matrix::Ones(1, 1)}, c, 0.9, Vector::Ones(1));
    QLearningOptions harmonic;
    harmonic.rule = StepSizeRule::kHarmonic;
    QLearningResult q = q_learning_window(one, 1, Vector::Ones(1), 200000, 1);
    CHECK(std::abs(q.q(0, 0) - 10.0) <= 0.05);

    FinitePOMDP m = make_m1();
    m.cost.setZero();
    QLearningResult z = q_learning_window(m, 2, Vector::Constant(2, 0.5), 10000, 2, harmonic);
    CHECK(z.q.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Q-learning is deterministic in the seed and flags unvisited pairs") {
    FinitePOMDP m = make_m1();
    Vector explore = Vector::Constant(2, 0.5);
    QLearningResult a = q_learning_window(m, 2, explore, 20000, 5), b = q_learning_window(m, 2, explore, 20000, 5);
    CHECK(a.q == b.q);
    CHECK(a.visits == b.visits);
    QLearningResult few = q_learning_window(m, 4, explore, 20, 5);
    CHECK_FALSE(few.unvisited.empty());
    for (const auto& [s, u] : few.unvisited) CHECK(few.visits(s, u) == 0);
}

TEST_CASE("exploration stationary prior is invariant under the averaged kernel") {
    FinitePOMDP m = make_mixing_example(0.1, {3, 2, 2}, 19);
    Vector p(2);
    p << 0.3, 0.7;
    Belief s = exploration_stationary_prior(m, p);
    Matrix avg = p[0] * m.transition[0] + p[1] * m.transition[1];
    CHECK((Vector(avg.transpose() * s) - s).cwiseAbs().maxCoeff() <= 1e-12);
}
