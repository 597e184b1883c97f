#include "pomdp/window_mdp.hpp"

#include "pomdp/belief_mdp.hpp"
#include "pomdp/distances.hpp"

#include <Eigen/SparseLU>

#include <cmath>
#include <limits>

namespace pomdp {

// ---------------------------------------------------------------------------
// Encoding

WindowCodec::WindowCodec(int n_obs, int n_actions) : n_obs_(n_obs), n_actions_(n_actions) {
    if (n_obs < 1 || n_actions < 1) throw std::invalid_argument("WindowCodec: alphabet sizes must be positive");
}

long WindowCodec::count(int k) const {
    if (k < 1) throw std::invalid_argument("WindowCodec::count: k must be >= 1");
    double c = n_obs_;
    for (int i = 1; i < k; ++i) c *= static_cast<double>(n_obs_) * n_actions_;
    if (c > static_cast<double>(std::numeric_limits<long>::max() / 4))
        throw std::overflow_error("WindowCodec::count: window space too large");
    return static_cast<long>(c);
}

long WindowCodec::encode(std::span<const int> obs, std::span<const int> acts) const {
    if (obs.empty() || obs.size() != acts.size() + 1) throw std::invalid_argument("WindowCodec::encode: need |obs| = |acts| + 1 >= 1");
    long idx = obs[0];
    for (std::size_t i = 1; i < obs.size(); ++i) idx = extend(idx, acts[i - 1], obs[i]);
    return idx;
}

WindowState WindowCodec::decode(long index, int k) const {
    if (index < 0 || index >= count(k)) throw std::out_of_range("WindowCodec::decode: index out of range");
    WindowState w;
    w.canonical_index = index;
    w.obs_window.assign(static_cast<std::size_t>(k), 0);
    w.act_window.assign(static_cast<std::size_t>(k - 1), 0);
    for (int i = k - 1; i >= 1; --i) {
        w.obs_window[static_cast<std::size_t>(i)] = static_cast<int>(index % n_obs_);
        index /= n_obs_;
        w.act_window[static_cast<std::size_t>(i - 1)] = static_cast<int>(index % n_actions_);
        index /= n_actions_;
    }
    w.obs_window[0] = static_cast<int>(index);
    return w;
}

long WindowCodec::shift(long index, int length, int action, int obs) const {
    if (length == 1) return obs;
    return extend(index % count(length - 1), action, obs);
}

// ---------------------------------------------------------------------------
// Product metric

double product_metric(const TruncatedHistory& a, const TruncatedHistory& b, int terms) {
    if (terms < 1) throw std::invalid_argument("product_metric: terms must be >= 1");
    double d = 0.0;
    // Discrete component metrics: d/(1+d) = 1/2 when the coordinates differ.
    const std::size_t ko = std::min({a.obs.size(), b.obs.size(), static_cast<std::size_t>(terms) + 1});
    for (std::size_t k = 0; k < ko; ++k)
        if (a.obs[k] != b.obs[k]) d += 0.5 * std::ldexp(1.0, -static_cast<int>(k));
    const std::size_t ku = std::min({a.acts.size(), b.acts.size(), static_cast<std::size_t>(terms)});
    for (std::size_t m = 1; m <= ku; ++m)
        if (a.acts[m - 1] != b.acts[m - 1]) d += 0.5 * std::ldexp(1.0, -static_cast<int>(m - 1));
    return d;
}

TruncatedHistory as_history(const WindowState& w) {
    TruncatedHistory h;
    h.obs.assign(w.obs_window.rbegin(), w.obs_window.rend());
    h.acts.assign(w.act_window.rbegin(), w.act_window.rend());
    return h;
}

// ---------------------------------------------------------------------------
// Window MDP

namespace {

Belief floored_correct(const FinitePOMDP& model, const Vector& prediction, int obs, bool& impossible) {
    Vector post = prediction.cwiseProduct(model.observation.col(obs));
    const double z = post.sum();
    if (z >= kImpossibleObservationThreshold) return post / z;
    impossible = true;
    post = post.cwiseMax(kImpossibleObservationThreshold);
    return post / post.sum();
}

}  // namespace

Belief window_belief(const FinitePOMDP& model, const Belief& prior, std::span<const int> obs, std::span<const int> acts,
                     bool* impossible) {
    if (obs.size() != acts.size() + 1) throw std::invalid_argument("window_belief: need |obs| = |acts| + 1");
    bool flag = false;
    Belief b = floored_correct(model, prior, obs[0], flag);
    for (std::size_t k = 0; k < acts.size(); ++k) b = floored_correct(model, predict_state(model, b, acts[k]), obs[k + 1], flag);
    if (impossible) *impossible = flag;
    return b;
}

WindowMDP build_window_mdp(const FinitePOMDP& model, int N, const Belief& reference_prior, std::size_t cap) {
    if (N < 1) throw std::invalid_argument("build_window_mdp: N must be >= 1");
    if (reference_prior.size() != model.n_states || reference_prior.minCoeff() < 0.0 ||
        std::abs(reference_prior.sum() - 1.0) > 1e-12)
        throw std::invalid_argument("build_window_mdp: invalid reference prior");
    WindowMDP w;
    w.N = N;
    w.discount = model.discount;
    w.codec = WindowCodec(model.n_obs, model.n_actions);
    w.reference_prior = reference_prior;
    const long S = w.codec.count(N);
    const double transitions = static_cast<double>(S) * model.n_actions * model.n_obs;
    if (transitions > static_cast<double>(cap))
        throw std::invalid_argument("build_window_mdp: " + format_double(transitions) + " transitions exceed cap " +
                                    std::to_string(cap));

    w.belief_of_state.resize(static_cast<std::size_t>(S));
    w.impossible.assign(static_cast<std::size_t>(S), false);
    for (long s = 0; s < S; ++s) {
        const WindowState ws = w.codec.decode(s, N);
        bool flag = false;
        w.belief_of_state[static_cast<std::size_t>(s)] = window_belief(model, reference_prior, ws.obs_window, ws.act_window, &flag);
        w.impossible[static_cast<std::size_t>(s)] = flag;
    }

    ControlledChain& chain = w.chain;
    chain.n_states = static_cast<int>(S);
    chain.n_actions = model.n_actions;
    chain.cost.resize(S, model.n_actions);
    for (int u = 0; u < model.n_actions; ++u) {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(S) * static_cast<std::size_t>(model.n_obs));
        for (long s = 0; s < S; ++s) {
            const Belief& b = w.belief_of_state[static_cast<std::size_t>(s)];
            chain.cost(s, u) = belief_cost(model, b, u);
            const Vector h = predict_obs(model, b, u);
            const double total = h.sum();
            for (int y = 0; y < model.n_obs; ++y)
                if (h[y] > 0.0) trips.emplace_back(static_cast<int>(s), static_cast<int>(w.codec.shift(s, N, u, y)), h[y] / total);
        }
        SparseMatrix k(S, S);
        k.setFromTriplets(trips.begin(), trips.end());
        chain.kernel.push_back(std::move(k));
    }
    return w;
}

ValueTable solve_discounted_window(const WindowMDP& wmdp, double tol, int max_iterations) {
    return discounted_value_iteration(wmdp.chain, wmdp.discount, tol, max_iterations);
}

std::vector<std::vector<int>> short_window_policies(const FinitePOMDP& model, int N, double tol) {
    std::vector<std::vector<int>> out;
    for (int k = 1; k < N; ++k) {
        const WindowMDP shorter = build_window_mdp(model, k, model.prior);
        out.push_back(solve_discounted_window(shorter, tol).policy);
    }
    return out;
}

long padded_window_index(const WindowCodec& codec, const WindowState& partial, int N) {
    const int k = static_cast<int>(partial.obs_window.size());
    const int first_action = partial.act_window.empty() ? 0 : partial.act_window.front();
    std::vector<int> obs(static_cast<std::size_t>(N - k), partial.obs_window.front());
    std::vector<int> acts(static_cast<std::size_t>(N - k), first_action);
    obs.insert(obs.end(), partial.obs_window.begin(), partial.obs_window.end());
    acts.insert(acts.end(), partial.act_window.begin(), partial.act_window.end());
    return codec.encode(obs, acts);
}

WindowEvaluation evaluate_window_policy(const FinitePOMDP& model, const WindowMDP& wmdp, const std::vector<int>& policy,
                                        InitialFill fill, std::size_t cap) {
    const int N = wmdp.N;
    const WindowCodec& codec = wmdp.codec;
    if (static_cast<long>(policy.size()) != wmdp.n_states())
        throw std::invalid_argument("evaluate_window_policy: policy must cover every window state");
    const int nx = model.n_states;

    std::vector<long> offset(static_cast<std::size_t>(N) + 1, 0);
    for (int k = 1; k <= N; ++k) offset[static_cast<std::size_t>(k)] = offset[static_cast<std::size_t>(k - 1)] + codec.count(k) * nx;
    const long total = offset[static_cast<std::size_t>(N)];
    if (static_cast<double>(total) > static_cast<double>(cap))
        throw std::invalid_argument("evaluate_window_policy: joint space of " + std::to_string(total) + " states exceeds cap");

    std::vector<std::vector<int>> prefix;
    if (fill == InitialFill::kShortWindowPolicies) prefix = short_window_policies(model, N);

    auto action_at = [&](int k, long w) -> int {
        if (k == N) return policy[static_cast<std::size_t>(w)];
        if (fill == InitialFill::kShortWindowPolicies) return prefix[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(w)];
        return policy[static_cast<std::size_t>(padded_window_index(codec, codec.decode(w, k), N))];
    };

    std::vector<Eigen::Triplet<double>> trips;
    Vector cost(total);
    for (int k = 1; k <= N; ++k) {
        const long windows = codec.count(k);
        for (long w = 0; w < windows; ++w) {
            const int u = action_at(k, w);
            const Matrix& t = model.kernel(u);
            for (int x = 0; x < nx; ++x) {
                const long id = offset[static_cast<std::size_t>(k - 1)] + w * nx + x;
                cost[id] = model.cost(x, u);
                trips.emplace_back(id, id, 1.0);
                for (int x2 = 0; x2 < nx; ++x2) {
                    const double px = t(x, x2);
                    if (px <= 0.0) continue;
                    for (int y = 0; y < model.n_obs; ++y) {
                        const double py = model.observation(x2, y);
                        if (py <= 0.0) continue;
                        const long w2 = (k < N) ? codec.extend(w, u, y) : codec.shift(w, N, u, y);
                        const int k2 = (k < N) ? k + 1 : N;
                        const long id2 = offset[static_cast<std::size_t>(k2 - 1)] + w2 * nx + x2;
                        trips.emplace_back(id, id2, -model.discount * px * py);
                    }
                }
            }
        }
    }
    Eigen::SparseMatrix<double> a(total, total);
    a.setFromTriplets(trips.begin(), trips.end());
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw std::runtime_error("evaluate_window_policy: factorization failed");
    const Vector v = lu.solve(cost);

    WindowEvaluation out;
    out.joint_states = total;
    for (int x = 0; x < nx; ++x)
        for (int y = 0; y < model.n_obs; ++y) out.value += model.prior[x] * model.observation(x, y) * v[y * nx + x];
    return out;
}

std::optional<double> window_error_bound(const RegularityConstants& c, int N, double beta) {
    if (!(beta * c.K2_bar < 1.0)) return std::nullopt;
    const double bin_diameter = 3.0 * std::ldexp(1.0, -N);
    return 2.0 * c.K1_bar * bin_diameter / ((1.0 - beta) * (1.0 - beta) * (1.0 - beta * c.K2_bar));
}

HistoryLipschitz estimate_history_lipschitz(const WindowMDP& wmdp, int n_pairs, std::uint64_t seed, long exhaustive_limit) {
    const long S = wmdp.n_states();
    const int A = wmdp.chain.n_actions;
    std::vector<TruncatedHistory> hist(static_cast<std::size_t>(S));
    for (long s = 0; s < S; ++s) hist[static_cast<std::size_t>(s)] = as_history(wmdp.state(s));
    const int terms = wmdp.N;

    HistoryLipschitz out;
    auto visit = [&](long s, long t) {
        const double d = product_metric(hist[static_cast<std::size_t>(s)], hist[static_cast<std::size_t>(t)], terms);
        if (d <= 0.0) return;
        ++out.pairs;
        for (int u = 0; u < A; ++u) {
            out.K1_bar = std::max(out.K1_bar, std::abs(wmdp.chain.cost(s, u) - wmdp.chain.cost(t, u)) / d);
            const SparseMatrix& k = wmdp.chain.kernel[static_cast<std::size_t>(u)];
            std::vector<long> a_idx, b_idx;
            std::vector<double> a_w, b_w;
            for (SparseMatrix::InnerIterator it(k, s); it; ++it) {
                a_idx.push_back(it.col());
                a_w.push_back(it.value());
            }
            for (SparseMatrix::InnerIterator it(k, t); it; ++it) {
                b_idx.push_back(it.col());
                b_w.push_back(it.value());
            }
            Matrix ground(static_cast<Eigen::Index>(a_idx.size()), static_cast<Eigen::Index>(b_idx.size()));
            for (std::size_t i = 0; i < a_idx.size(); ++i)
                for (std::size_t j = 0; j < b_idx.size(); ++j)
                    ground(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                        product_metric(hist[static_cast<std::size_t>(a_idx[i])], hist[static_cast<std::size_t>(b_idx[j])], terms);
            const double w1 = transport_cost(Eigen::Map<const Vector>(a_w.data(), static_cast<Eigen::Index>(a_w.size())),
                                             Eigen::Map<const Vector>(b_w.data(), static_cast<Eigen::Index>(b_w.size())), ground);
            out.K2_bar = std::max(out.K2_bar, w1 / d);
        }
    };
    if (S <= exhaustive_limit) {
        for (long s = 0; s < S; ++s)
            for (long t = s + 1; t < S; ++t) visit(s, t);
    } else {
        Rng rng(seed, 0x6b626172);
        for (int i = 0; i < n_pairs; ++i) {
            const long s = static_cast<long>(rng.uniform() * static_cast<double>(S));
            long t = static_cast<long>(rng.uniform() * static_cast<double>(S));
            // Bias half of the samples toward near neighbours (same newest
            // observation, differing only deep in the window), where the
            // Lipschitz ratios are largest.
            if (i % 2 == 1 && wmdp.N > 1) {
                WindowState ws = wmdp.state(s);
                const int depth = 1 + rng.below(wmdp.N - 1);
                const int pos = wmdp.N - 1 - depth;
                ws.obs_window[static_cast<std::size_t>(pos)] = rng.below(wmdp.codec.n_obs());
                if (pos < wmdp.N - 1 && rng.uniform() < 0.5)
                    ws.act_window[static_cast<std::size_t>(pos)] = rng.below(wmdp.codec.n_actions());
                t = wmdp.codec.encode(ws.obs_window, ws.act_window);
            }
            if (s != t) visit(s, t);
        }
    }
    return out;
}

ActionRule window_action_rule(const WindowMDP& wmdp, std::vector<int> policy, std::vector<std::vector<int>> prefix_policies) {
    return [codec = wmdp.codec, N = wmdp.N, policy = std::move(policy), prefix = std::move(prefix_policies)](
               const History& h, Rng&) -> int {
        const int k = static_cast<int>(std::min<std::size_t>(h.obs.size(), static_cast<std::size_t>(N)));
        std::span<const int> obs(h.obs.data() + (h.obs.size() - k), static_cast<std::size_t>(k));
        std::span<const int> acts(h.acts.data() + (h.acts.size() - (k - 1)), static_cast<std::size_t>(k - 1));
        const long idx = codec.encode(obs, acts);
        if (k == N) return policy[static_cast<std::size_t>(idx)];
        if (!prefix.empty()) return prefix[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(idx)];
        return policy[static_cast<std::size_t>(padded_window_index(codec, codec.decode(idx, k), N))];
    };
}

Belief exploration_stationary_prior(const FinitePOMDP& model, const Vector& exploration) {
    Matrix mix = Matrix::Zero(model.n_states, model.n_states);
    for (int u = 0; u < model.n_actions; ++u) mix += exploration[u] * model.kernel(u);
    const SparseMatrix p = mix.sparseView();
    const auto classes = closed_classes(p);
    Belief pi = Belief::Zero(model.n_states);
    for (const auto& cls : classes) pi += class_stationary_distribution(p, cls);
    return pi / pi.sum();
}

QLearningResult q_learning_window(const FinitePOMDP& model, int N, const Vector& exploration, long steps,
                                  std::uint64_t seed, const QLearningOptions& options) {
    if (N < 1) throw std::invalid_argument("q_learning_window: N must be >= 1");
    if (exploration.size() != model.n_actions || exploration.minCoeff() <= 0.0)
        throw std::invalid_argument("q_learning_window: exploration must give every action positive probability");
    const WindowCodec codec(model.n_obs, model.n_actions);
    const long S = codec.count(N);
    QLearningResult out;
    out.N = N;
    out.q = Matrix::Zero(S, model.n_actions);
    out.visits = Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic>::Zero(S, model.n_actions);
    const double beta = model.discount;
    auto step_size = [&](long n) {
        switch (options.rule) {
            case StepSizeRule::kHarmonic: return 1.0 / (1.0 + static_cast<double>(n));
            case StepSizeRule::kRescaledLinear: return 1.0 / (1.0 + (1.0 - beta) * static_cast<double>(n));
            case StepSizeRule::kPolynomial: return std::pow(1.0 + static_cast<double>(n), -options.omega);
        }
        return 0.0;
    };

    Rng rng(seed, 0x716c);
    int x = rng.categorical(model.prior);
    long window = sample_observation(model, x, rng);
    // Fill the window.
    for (int k = 1; k < N; ++k) {
        const int u = rng.categorical(exploration);
        x = sample_next_state(model, x, u, rng);
        window = codec.extend(window, u, sample_observation(model, x, rng));
    }
    for (long step = 0; step < steps; ++step) {
        const int u = rng.categorical(exploration);
        const double c = model.cost(x, u);
        x = sample_next_state(model, x, u, rng);
        const long next = codec.shift(window, N, u, sample_observation(model, x, rng));
        long& n = out.visits(window, u);
        const double alpha = step_size(n);
        ++n;
        out.q(window, u) += alpha * (c + beta * out.q.row(next).minCoeff() - out.q(window, u));
        window = next;
    }
    out.greedy = greedy_policy(out.q);
    for (long s = 0; s < S; ++s)
        for (int u = 0; u < model.n_actions; ++u)
            if (out.visits(s, u) == 0) out.unvisited.emplace_back(s, u);
    return out;
}

CsvTable window_policy_csv(const WindowMDP& wmdp, const std::vector<int>& policy, const Vector* values) {
    std::vector<std::string> header{"window"};
    for (int i = 0; i < wmdp.N; ++i) header.push_back("y" + std::to_string(i));
    for (int i = 0; i + 1 < wmdp.N; ++i) header.push_back("u" + std::to_string(i));
    if (values) header.push_back("value");
    header.push_back("action");
    CsvTable csv(header);
    for (long s = 0; s < wmdp.n_states(); ++s) {
        const WindowState w = wmdp.state(s);
        std::vector<double> row{static_cast<double>(s)};
        for (int y : w.obs_window) row.push_back(y);
        for (int u : w.act_window) row.push_back(u);
        if (values) row.push_back((*values)[s]);
        row.push_back(policy[static_cast<std::size_t>(s)]);
        csv.add_row(row);
    }
    return csv;
}

CsvTable q_table_csv(const QLearningResult& r) {
    CsvTable csv({"window", "action", "q", "visits"});
    for (Eigen::Index s = 0; s < r.q.rows(); ++s)
        for (Eigen::Index u = 0; u < r.q.cols(); ++u)
            csv.add_row({static_cast<double>(s), static_cast<double>(u), r.q(s, u), static_cast<double>(r.visits(s, u))});
    return csv;
}

}  // namespace pomdp
