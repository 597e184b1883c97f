#pragma once

#include "pomdp/filter.hpp"
#include "pomdp/mdp.hpp"
#include "pomdp/model.hpp"
#include "pomdp/report.hpp"
#include "pomdp/simulation.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace pomdp {

/// Observation/action window, oldest first: k observations, k - 1 actions.
struct WindowState {
    std::vector<int> obs_window;
    std::vector<int> act_window;
    long canonical_index = 0;
};

/**
 * Mixed-radix encoding of windows. Digits are interleaved oldest first
 * (y_0, u_0, y_1, ..., u_{k-2}, y_{k-1}), so a window with k observations maps
 * bijectively onto [0, n_obs^k n_actions^(k-1)).
 */
class WindowCodec {
public:
    WindowCodec(int n_obs, int n_actions);

    int n_obs() const { return n_obs_; }
    int n_actions() const { return n_actions_; }

    /// Number of windows with k observations (k >= 1).
    long count(int k) const;

    long encode(std::span<const int> obs, std::span<const int> acts) const;
    WindowState decode(long index, int k) const;

    /// Window with k observations -> window with k + 1 observations.
    long extend(long index, int action, int obs) const { return (index * n_actions_ + action) * n_obs_ + obs; }

    /// Full window of length N: drop the oldest (y, u) pair, append (u, y).
    long shift(long index, int length, int action, int obs) const;

private:
    int n_obs_;
    int n_actions_;
};

/// History truncated to finitely many coordinates, most recent first:
/// obs[k] = y_{-k} (k >= 0), acts[m - 1] = u_{-m} (m >= 1).
struct TruncatedHistory {
    std::vector<int> obs;
    std::vector<int> acts;
};

/// Product metric on histories with discrete component metrics:
/// sum_{k=0}^{terms} 2^{-k} [y differ]/2 + sum_{m=1}^{terms} 2^{-(m-1)} [u differ]/2.
/// Coordinates missing from either history count as agreeing.
double product_metric(const TruncatedHistory& a, const TruncatedHistory& b, int terms);

/// Window (oldest first) as a most-recent-first truncated history.
TruncatedHistory as_history(const WindowState& w);

/// Filter of `prior` through a window. Impossible Bayes steps are replaced by
/// the unnormalized posterior floored entrywise at 1e-300 and renormalized;
/// `impossible` is set when that happens.
Belief window_belief(const FinitePOMDP& model, const Belief& prior, std::span<const int> obs,
                     std::span<const int> acts, bool* impossible = nullptr);

struct WindowMDP {
    int N = 1;
    double discount = 0.9;
    WindowCodec codec{1, 1};
    ControlledChain chain;               ///< kernel P^N and cost c_bar^N
    Belief reference_prior;              ///< law of X at the oldest window observation
    std::vector<Belief> belief_of_state;
    std::vector<bool> impossible;        ///< zero probability under the reference prior

    long n_states() const { return chain.n_states; }
    WindowState state(long index) const { return codec.decode(index, N); }
};

inline constexpr std::size_t kDefaultWindowCap = 5'000'000;

/// Approximate MDP on full N-windows. For window s with belief b(s):
/// c_bar(s, u) = c~(b(s), u) and s' = shift(s, u, y') with probability
/// H(y' | b(s), u).
WindowMDP build_window_mdp(const FinitePOMDP& model, int N, const Belief& reference_prior,
                           std::size_t cap = kDefaultWindowCap);

ValueTable solve_discounted_window(const WindowMDP& wmdp, double tol, int max_iterations = 1'000'000);

enum class InitialFill {
    /// For t < N - 1 act with the optimal policy of a fresh (t + 1)-window MDP
    /// whose reference prior is the model prior.
    kShortWindowPolicies,
    /// Pad the missing past with copies of y_0 and the first action taken
    /// (action 0 before any action exists) and apply the N-window policy.
    kPadRepeat,
};

/// Full N-window obtained by padding a partial window (fewer than N
/// observations) on the old side, as InitialFill::kPadRepeat does.
long padded_window_index(const WindowCodec& codec, const WindowState& partial, int N);

struct WindowEvaluation {
    double value = 0.0;        ///< discounted cost from X_0 ~ prior
    long joint_states = 0;
};

inline constexpr std::size_t kDefaultJointCap = 2'000'000;

/// Exact discounted cost of a window policy on the true model: builds the
/// Markov chain on (x, window) including the partial windows of the first
/// N - 1 steps and solves (I - beta P) v = c.
WindowEvaluation evaluate_window_policy(const FinitePOMDP& model, const WindowMDP& wmdp, const std::vector<int>& policy,
                                        InitialFill fill = InitialFill::kShortWindowPolicies,
                                        std::size_t cap = kDefaultJointCap);

/// 2 K1_bar L(N) / ((1 - beta)^2 (1 - beta K2_bar)) with L(N) = 3 2^-N;
/// empty when beta K2_bar >= 1.
std::optional<double> window_error_bound(const RegularityConstants& constants, int N, double discount);

struct HistoryLipschitz {
    double K1_bar = 0.0;
    double K2_bar = 0.0;
    int pairs = 0;
};

/// Empirical Lipschitz ratios of c_bar and of the window kernel (W1 under the
/// product metric) over window-state pairs; all pairs when there are at most
/// `exhaustive_limit` states, otherwise n_pairs sampled pairs.
HistoryLipschitz estimate_history_lipschitz(const WindowMDP& wmdp, int n_pairs, std::uint64_t seed,
                                            long exhaustive_limit = 64);

/// Action rule applying a window policy to the last N entries of a history.
/// Before the window fills it uses `prefix_policies[k - 1]` for k < N
/// observations when given, else pads like InitialFill::kPadRepeat.
ActionRule window_action_rule(const WindowMDP& wmdp, std::vector<int> policy,
                              std::vector<std::vector<int>> prefix_policies = {});

/// Optimal policies of the k-window MDPs (k = 1..N-1) with the model prior as
/// reference; used for the first N - 1 steps.
std::vector<std::vector<int>> short_window_policies(const FinitePOMDP& model, int N, double tol = 1e-10);

enum class StepSizeRule {
    kHarmonic,        ///< 1 / (1 + n)
    kRescaledLinear,  ///< 1 / (1 + (1 - beta) n)
    kPolynomial,      ///< 1 / (1 + n)^omega
};

struct QLearningOptions {
    StepSizeRule rule = StepSizeRule::kRescaledLinear;
    double omega = 0.7;
};

struct QLearningResult {
    int N = 1;
    Matrix q;                          ///< (window, action)
    Eigen::Matrix<long, Eigen::Dynamic, Eigen::Dynamic> visits;
    std::vector<int> greedy;
    std::vector<std::pair<long, int>> unvisited;
};

/// Tabular Q-learning on the sliding N-window of the true POMDP under an
/// independently randomized exploration distribution over actions. Updates
/// start once the window is full; `steps` counts updates.
QLearningResult q_learning_window(const FinitePOMDP& model, int N, const Vector& exploration, long steps,
                                  std::uint64_t seed, const QLearningOptions& options = {});

/// Reference prior matching the exploration-induced stationary law: the
/// stationary distribution of sum_u p(u) T[u] (uniform mixture of closed
/// classes when it is not unique).
Belief exploration_stationary_prior(const FinitePOMDP& model, const Vector& exploration);

CsvTable window_policy_csv(const WindowMDP& wmdp, const std::vector<int>& policy, const Vector* values = nullptr);
CsvTable q_table_csv(const QLearningResult& result);

}  // namespace pomdp
