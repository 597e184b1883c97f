#include "pomdp/average_cost.hpp"

#include "pomdp/filter.hpp"
#include "pomdp/parallel.hpp"
#include "pomdp/rng.hpp"
#include "pomdp/simulation.hpp"

#include <algorithm>
#include <cmath>

namespace pomdp {

namespace {

// Basic variables below this are rounding noise of the simplex.
constexpr double kSupportTolerance = 1e-12;

}  // namespace

double invariance_residual(const ControlledChain& chain, const Matrix& v) {
    Vector flow = Vector::Zero(chain.n_states);
    for (int u = 0; u < chain.n_actions; ++u)
        flow += chain.kernel[static_cast<std::size_t>(u)].transpose() * v.col(u);
    return (v.rowwise().sum() - flow).lpNorm<Eigen::Infinity>();
}

OccupationLpResult occupation_lp(const ControlledChain& chain, const SimplexOptions& options) {
    const int S = chain.n_states;
    const int A = chain.n_actions;
    const int n = S * A;
    LinearProgram lp;
    lp.objective.resize(n);
    for (int s = 0; s < S; ++s)
        for (int u = 0; u < A; ++u) lp.objective[s * A + u] = chain.cost(s, u);
    // Invariance rows for s' = 0..S-2 (the last is implied by the others and
    // the mass row), then sum v = 1.
    lp.eq_lhs = Matrix::Zero(S, n);
    lp.eq_rhs = Vector::Zero(S);
    for (int s = 0; s + 1 < S; ++s)
        for (int u = 0; u < A; ++u) lp.eq_lhs(s, s * A + u) += 1.0;
    for (int u = 0; u < A; ++u) {
        const SparseMatrix& k = chain.kernel[static_cast<std::size_t>(u)];
        for (int s = 0; s < S; ++s)
            for (SparseMatrix::InnerIterator it(k, s); it; ++it)
                if (it.col() + 1 < S) lp.eq_lhs(it.col(), s * A + u) -= it.value();
    }
    lp.eq_lhs.row(S - 1).setOnes();
    lp.eq_rhs[S - 1] = 1.0;
    lp.le_lhs = Matrix::Zero(0, n);
    lp.le_rhs = Vector::Zero(0);

    const LpSolution sol = solve_lp(lp, options);
    if (sol.status != LpStatus::kOptimal)
        throw std::runtime_error(std::string("occupation_lp: internal error, simplex returned ") + to_string(sol.status));

    OccupationLpResult out;
    out.pivots = sol.pivots;
    Matrix& v = out.occupation.weights;
    v.resize(S, A);
    for (int s = 0; s < S; ++s)
        for (int u = 0; u < A; ++u) v(s, u) = sol.x[s * A + u] > kSupportTolerance ? sol.x[s * A + u] : 0.0;
    out.occupation.invariance_residual = invariance_residual(chain, v);
    if (!(out.occupation.invariance_residual <= 1e-8) || std::abs(v.sum() - 1.0) > 1e-9)
        throw std::runtime_error("occupation_lp: internal error, vertex violates invariance (residual " +
                                 format_double(out.occupation.invariance_residual) + ")");
    out.rho_star = (v.array() * chain.cost.array()).sum();
    out.policy = Matrix::Zero(S, A);
    for (int s = 0; s < S; ++s) {
        const double mass = v.row(s).sum();
        if (mass > 0.0) {
            out.policy.row(s) = v.row(s) / mass;
            out.support.push_back(s);
        } else {
            out.policy(s, 0) = 1.0;
        }
    }
    return out;
}

OccupationLpResult latent_state_lower_bound(const FinitePOMDP& model, const SimplexOptions& options) {
    ControlledChain chain;
    chain.n_states = model.n_states;
    chain.n_actions = model.n_actions;
    chain.cost = model.cost;
    for (int u = 0; u < model.n_actions; ++u) chain.kernel.push_back(model.kernel(u).sparseView());
    OccupationLpResult out = occupation_lp(chain, options);
    out.information_state = false;
    out.optimality_claim = "lower bound (full-observation relaxation)";
    return out;
}

std::vector<int> deterministic_policy(const Matrix& p) {
    std::vector<int> out(static_cast<std::size_t>(p.rows()), 0);
    for (Eigen::Index s = 0; s < p.rows(); ++s) {
        Eigen::Index best = 0;
        for (Eigen::Index u = 1; u < p.cols(); ++u)
            if (p(s, u) > p(s, best)) best = u;
        out[static_cast<std::size_t>(s)] = static_cast<int>(best);
    }
    return out;
}

Matrix randomized_policy(const std::vector<int>& policy, int n_actions) {
    Matrix p = Matrix::Zero(static_cast<Eigen::Index>(policy.size()), n_actions);
    for (std::size_t s = 0; s < policy.size(); ++s) p(static_cast<Eigen::Index>(s), policy[s]) = 1.0;
    return p;
}

bool support_is_ergodic(const ControlledChain& chain, const OccupationLpResult& result, double mass_tol) {
    std::vector<int> support;
    for (int s = 0; s < chain.n_states; ++s)
        if (result.occupation.weights.row(s).sum() > mass_tol) support.push_back(s);
    const auto classes = closed_classes(policy_matrix(chain, result.policy));
    return std::any_of(classes.begin(), classes.end(), [&](const std::vector<int>& c) { return c == support; });
}

Json to_json(const OccupationLpResult& r) {
    Json j;
    j["value"] = r.rho_star;
    j["invariance_residual"] = r.occupation.invariance_residual;
    j["mass"] = r.occupation.weights.sum();
    j["information_state"] = r.information_state;
    j["optimality_claim"] = r.optimality_claim;
    j["pivots"] = r.pivots;
    Json support = Json::array();
    for (Eigen::Index s = 0; s < r.occupation.weights.rows(); ++s)
        for (Eigen::Index u = 0; u < r.occupation.weights.cols(); ++u)
            if (r.occupation.weights(s, u) > 1e-12)
                support.push_back({{"state", s}, {"action", u}, {"weight", r.occupation.weights(s, u)}});
    j["support"] = std::move(support);
    j["policy"] = to_json(r.policy);
    return j;
}

// ---------------------------------------------------------------------------
// Closed loop

JointWindowChain joint_window_chain(const FinitePOMDP& model, const WindowCodec& codec, int N, const Matrix& policy) {
    JointWindowChain out;
    out.n_x = model.n_states;
    out.n_windows = codec.count(N);
    if (policy.rows() != out.n_windows || policy.cols() != model.n_actions)
        throw std::invalid_argument("joint_window_chain: policy must be (windows x actions)");
    const long n = out.n_windows * out.n_x;
    out.cost = Vector::Zero(n);
    std::vector<Eigen::Triplet<double>> trips;
    for (long w = 0; w < out.n_windows; ++w)
        for (int u = 0; u < model.n_actions; ++u) {
            const double pu = policy(w, u);
            if (pu <= 0.0) continue;
            const Matrix& t = model.kernel(u);
            for (int x = 0; x < out.n_x; ++x) {
                const long id = w * out.n_x + x;
                out.cost[id] += pu * model.cost(x, u);
                for (int x2 = 0; x2 < out.n_x; ++x2) {
                    if (t(x, x2) <= 0.0) continue;
                    for (int y = 0; y < model.n_obs; ++y) {
                        const double p = pu * t(x, x2) * model.observation(x2, y);
                        if (p > 0.0) trips.emplace_back(id, codec.shift(w, N, u, y) * out.n_x + x2, p);
                    }
                }
            }
        }
    out.transition.resize(n, n);
    out.transition.setFromTriplets(trips.begin(), trips.end());
    return out;
}

PolicyGain closed_loop_gain(const FinitePOMDP& model, const WindowCodec& codec, int N, const Matrix& policy) {
    const JointWindowChain j = joint_window_chain(model, codec, N, policy);
    return average_cost_of_policy(j.transition, j.cost);
}

namespace {

// Law of (x, window) at the first time the window is full, starting from
// X_0 ~ prior and padding the policy over partial windows.
Vector filled_initial_law(const FinitePOMDP& model, const WindowCodec& codec, int N, const Matrix& policy) {
    const int nx = model.n_states;
    Vector law = Vector::Zero(codec.count(1) * nx);
    for (int x = 0; x < nx; ++x)
        for (int y = 0; y < model.n_obs; ++y) law[y * nx + x] = model.prior[x] * model.observation(x, y);
    for (int k = 1; k < N; ++k) {
        Vector next = Vector::Zero(codec.count(k + 1) * nx);
        for (long w = 0; w < codec.count(k); ++w) {
            const long full = padded_window_index(codec, codec.decode(w, k), N);
            for (int x = 0; x < nx; ++x) {
                const double m = law[w * nx + x];
                if (m <= 0.0) continue;
                for (int u = 0; u < model.n_actions; ++u) {
                    const double pu = policy(full, u);
                    if (pu <= 0.0) continue;
                    for (int x2 = 0; x2 < nx; ++x2)
                        for (int y = 0; y < model.n_obs; ++y)
                            next[codec.extend(w, u, y) * nx + x2] += m * pu * model.kernel(u)(x, x2) * model.observation(x2, y);
                }
            }
        }
        law = std::move(next);
    }
    return law;
}

struct LoopState {
    int x = 0;
    long window = 0;
};

int draw_action(const Matrix& policy, long window, Rng& rng) { return rng.categorical(policy.row(window)); }

LoopState start_loop(const FinitePOMDP& model, const WindowCodec& codec, int N, const Matrix& policy, Rng& rng) {
    LoopState s;
    s.x = rng.categorical(model.prior);
    s.window = sample_observation(model, s.x, rng);
    for (int k = 1; k < N; ++k) {
        const long full = padded_window_index(codec, codec.decode(s.window, k), N);
        const int u = draw_action(policy, full, rng);
        s.x = sample_next_state(model, s.x, u, rng);
        s.window = codec.extend(s.window, u, sample_observation(model, s.x, rng));
    }
    return s;
}

// One closed-loop step; returns the stage cost and the action taken.
double step_loop(const FinitePOMDP& model, const WindowCodec& codec, int N, const Matrix& policy, LoopState& s, Rng& rng,
                 int* action = nullptr) {
    const int u = draw_action(policy, s.window, rng);
    if (action) *action = u;
    const double c = model.cost(s.x, u);
    s.x = sample_next_state(model, s.x, u, rng);
    s.window = codec.shift(s.window, N, u, sample_observation(model, s.x, rng));
    return c;
}

double batch_means_error(const std::vector<double>& costs) {
    const std::size_t batches = std::min<std::size_t>(20, costs.size() / 2);
    if (batches < 2) return 0.0;
    const std::size_t size = costs.size() / batches;
    std::vector<double> means(batches, 0.0);
    for (std::size_t b = 0; b < batches; ++b) {
        for (std::size_t i = 0; i < size; ++i) means[b] += costs[b * size + i];
        means[b] /= static_cast<double>(size);
    }
    double m = 0.0;
    for (double v : means) m += v;
    m /= static_cast<double>(batches);
    double var = 0.0;
    for (double v : means) var += (v - m) * (v - m);
    var /= static_cast<double>(batches - 1);
    return std::sqrt(var / static_cast<double>(batches));
}

// Residual of joint (x, window, action) weights against the exact joint kernel.
double joint_residual(const FinitePOMDP& model, const WindowCodec& codec, int N, const Matrix& joint) {
    const int nx = model.n_states;
    Vector flow = Vector::Zero(joint.rows());
    for (Eigen::Index id = 0; id < joint.rows(); ++id) {
        const long w = id / nx;
        const int x = static_cast<int>(id % nx);
        for (int u = 0; u < model.n_actions; ++u) {
            const double m = joint(id, u);
            if (m <= 0.0) continue;
            for (int x2 = 0; x2 < nx; ++x2)
                for (int y = 0; y < model.n_obs; ++y)
                    flow[codec.shift(w, N, u, y) * nx + x2] += m * model.kernel(u)(x, x2) * model.observation(x2, y);
        }
    }
    return (joint.rowwise().sum() - flow).lpNorm<Eigen::Infinity>();
}

Matrix window_marginal(const Matrix& joint, int nx) {
    Matrix out = Matrix::Zero(joint.rows() / nx, joint.cols());
    for (Eigen::Index id = 0; id < joint.rows(); ++id) out.row(id / nx) += joint.row(id);
    return out;
}

}  // namespace

EmpiricalOccupation empirical_occupation(const FinitePOMDP& model, const WindowMDP& wmdp, const Matrix& policy,
                                         long horizon, std::uint64_t seed) {
    if (horizon < 1) throw std::invalid_argument("empirical_occupation: horizon must be >= 1");
    const int nx = model.n_states;
    const WindowCodec& codec = wmdp.codec;
    Rng rng(seed, 0x656d70);
    LoopState s = start_loop(model, codec, wmdp.N, policy, rng);
    Matrix joint = Matrix::Zero(wmdp.n_states() * nx, model.n_actions);
    std::vector<double> costs;
    costs.reserve(static_cast<std::size_t>(horizon));
    for (long t = 0; t < horizon; ++t) {
        const long id = s.window * nx + s.x;
        int u = 0;
        costs.push_back(step_loop(model, codec, wmdp.N, policy, s, rng, &u));
        joint(id, u) += 1.0;
    }
    joint /= static_cast<double>(horizon);

    EmpiricalOccupation out;
    out.horizon = horizon;
    out.window_action.weights = window_marginal(joint, nx);
    out.window_action.invariance_residual = invariance_residual(wmdp.chain, out.window_action.weights);
    out.joint_residual = joint_residual(model, codec, wmdp.N, joint);
    double total = 0.0;
    for (double c : costs) total += c;
    out.average_cost = total / static_cast<double>(horizon);
    out.std_error = batch_means_error(costs);
    return out;
}

EmpiricalOccupation averaged_occupation(const FinitePOMDP& model, const WindowMDP& wmdp, const Matrix& policy,
                                        long horizon) {
    if (horizon < 1) throw std::invalid_argument("averaged_occupation: horizon must be >= 1");
    const int nx = model.n_states;
    const JointWindowChain chain = joint_window_chain(model, wmdp.codec, wmdp.N, policy);
    const SparseMatrix pt = chain.transition.transpose();
    Vector law = filled_initial_law(model, wmdp.codec, wmdp.N, policy);
    Matrix joint = Matrix::Zero(law.size(), model.n_actions);
    for (long t = 0; t < horizon; ++t) {
        for (Eigen::Index id = 0; id < law.size(); ++id)
            if (law[id] > 0.0) joint.row(id) += law[id] * policy.row(id / nx);
        law = pt * law;
    }
    joint /= static_cast<double>(horizon);

    EmpiricalOccupation out;
    out.horizon = horizon;
    out.window_action.weights = window_marginal(joint, nx);
    out.window_action.invariance_residual = invariance_residual(wmdp.chain, out.window_action.weights);
    out.joint_residual = joint_residual(model, wmdp.codec, wmdp.N, joint);
    for (Eigen::Index id = 0; id < joint.rows(); ++id)
        for (int u = 0; u < model.n_actions; ++u) out.average_cost += joint(id, u) * model.cost(id % nx, u);
    return out;
}

// ---------------------------------------------------------------------------
// Initialization experiment

long default_burn_in(const FinitePOMDP& model) {
    const double tau = stability_constants(model).birkhoff_tau;
    if (!(tau < 1.0)) return 1000;
    if (tau <= 0.0) return 10;
    return 10 * static_cast<long>(std::ceil(std::log(1e-6) / std::log(tau)));
}

InitializationResult initialization_experiment(const FinitePOMDP& model, const WindowMDP& wmdp, const Matrix& policy,
                                               double rho_star, long horizon, int replications, std::uint64_t seed,
                                               const InitializationOptions& options) {
    const int N = wmdp.N;
    const int W = options.proxy_length > 0 ? options.proxy_length : N;
    if (W < N) throw std::invalid_argument("initialization_experiment: proxy length must be >= N");
    if (horizon < 1 || replications < 1) throw std::invalid_argument("initialization_experiment: T and replications must be >= 1");
    const WindowCodec& codec = wmdp.codec;
    const int nx = model.n_states;

    // Policy lifted to W-windows through their last N entries.
    const long short_count = codec.count(N);
    Matrix lifted(codec.count(W), model.n_actions);
    for (long w = 0; w < lifted.rows(); ++w) lifted.row(w) = policy.row(w % short_count);

    InitializationResult out;
    out.rho_star = rho_star;
    out.burn_in = options.burn_in > 0 ? options.burn_in : default_burn_in(model);
    out.proxy_length = W;
    out.checkpoints = options.checkpoints;
    std::sort(out.checkpoints.begin(), out.checkpoints.end());

    // Long-run (x, W-window) law of the closed loop started like the burn-in.
    const JointWindowChain joint = joint_window_chain(model, codec, W, lifted);
    const Vector stationary = cesaro_limit(joint.transition, filled_initial_law(model, codec, W, lifted));

    out.replications.resize(static_cast<std::size_t>(replications));
    parallel_for(replications, options.threads, [&](int r) {
        InitializationReplication& rep = out.replications[static_cast<std::size_t>(r)];
        Rng rng(seed, static_cast<std::uint64_t>(r));
        LoopState s = start_loop(model, codec, W, lifted, rng);
        for (long t = 0; t < out.burn_in; ++t) step_loop(model, codec, W, lifted, s, rng);
        const long past = s.window;

        // Next-state law given the realized past window, under the long-run law.
        double window_mass = 0.0;
        Vector next = Vector::Zero(nx);
        for (int x = 0; x < nx; ++x) {
            const double m = stationary[past * nx + x];
            window_mass += m;
            for (int u = 0; u < model.n_actions; ++u) next += m * lifted(past, u) * model.kernel(u).row(x).transpose();
        }
        if (window_mass <= 0.0) {
            rep.absolutely_continuous = false;
        } else {
            next /= window_mass;
            for (int x = 0; x < nx; ++x)
                if (model.prior[x] > 0.0 && next[x] <= 1e-12) rep.absolutely_continuous = false;
        }

        // Splice: X_0 ~ prior independently of the past, Y_0 ~ Q(X_0, .).
        const int u_prev = draw_action(lifted, past, rng);
        s.x = rng.categorical(model.prior);
        s.window = codec.shift(past, W, u_prev, sample_observation(model, s.x, rng));
        double start_mass = 0.0;
        for (int x = 0; x < nx; ++x) start_mass += stationary[s.window * nx + x];
        rep.zero_probability_start = !(start_mass > 0.0);

        std::vector<double> costs;
        costs.reserve(static_cast<std::size_t>(horizon));
        double total = 0.0;
        std::size_t next_checkpoint = 0;
        const long stride = std::max<long>(1, options.trajectory_stride);
        for (long t = 1; t <= horizon; ++t) {
            const double c = step_loop(model, codec, W, lifted, s, rng);
            costs.push_back(c);
            total += c;
            const double mean = total / static_cast<double>(t);
            if (t % stride == 0 || t == horizon || t == 1) {
                rep.times.push_back(t);
                rep.running_mean.push_back(mean);
            }
            while (next_checkpoint < out.checkpoints.size() && out.checkpoints[next_checkpoint] == t) {
                rep.checkpoint_gap.push_back(std::abs(mean - rho_star));
                ++next_checkpoint;
            }
        }
        rep.terminal_mean = total / static_cast<double>(horizon);
        rep.terminal_gap = std::abs(rep.terminal_mean - rho_star);
        rep.std_error = batch_means_error(costs);
    });

    double sum = 0.0;
    for (const auto& rep : out.replications) {
        sum += rep.terminal_mean;
        if (!rep.absolutely_continuous) ++out.absolute_continuity_violations;
        if (rep.zero_probability_start) ++out.zero_probability_starts;
    }
    out.pooled_mean = sum / replications;
    if (replications > 1) {
        double var = 0.0;
        for (const auto& rep : out.replications) var += (rep.terminal_mean - out.pooled_mean) * (rep.terminal_mean - out.pooled_mean);
        out.pooled_std_error = std::sqrt(var / (replications - 1) / replications);
    } else {
        out.pooled_std_error = out.replications.front().std_error;
    }
    out.terminal_gap = std::abs(out.pooled_mean - rho_star);
    return out;
}

CsvTable initialization_csv(const InitializationResult& result) {
    CsvTable csv({"replication", "t", "running_mean"});
    for (std::size_t r = 0; r < result.replications.size(); ++r) {
        const auto& rep = result.replications[r];
        for (std::size_t i = 0; i < rep.times.size(); ++i)
            csv.add_row({static_cast<double>(r), static_cast<double>(rep.times[i]), rep.running_mean[i]});
    }
    return csv;
}

Json initialization_summary(const InitializationResult& result) {
    Json j;
    j["rho_star"] = result.rho_star;
    j["burn_in"] = result.burn_in;
    j["proxy_length"] = result.proxy_length;
    j["pooled_mean"] = result.pooled_mean;
    j["pooled_std_error"] = result.pooled_std_error;
    j["terminal_gap"] = result.terminal_gap;
    j["absolute_continuity_violations"] = result.absolute_continuity_violations;
    j["zero_probability_starts"] = result.zero_probability_starts;
    j["checkpoints"] = result.checkpoints;
    Json reps = Json::array();
    for (const auto& rep : result.replications)
        reps.push_back({{"terminal_mean", rep.terminal_mean},
                        {"terminal_gap", rep.terminal_gap},
                        {"std_error", rep.std_error},
                        {"checkpoint_gap", rep.checkpoint_gap},
                        {"absolutely_continuous", rep.absolutely_continuous},
                        {"zero_probability_start", rep.zero_probability_start}});
    j["replications"] = std::move(reps);
    return j;
}

}  // namespace pomdp
