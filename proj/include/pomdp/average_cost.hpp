#pragma once

#include "pomdp/lp.hpp"
#include "pomdp/mdp.hpp"
#include "pomdp/model.hpp"
#include "pomdp/report.hpp"
#include "pomdp/window_mdp.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace pomdp {

/// Probability weights over (state, action) pairs of a finite controlled chain.
struct OccupationMeasure {
    Matrix weights;                    ///< (state, action)
    double invariance_residual = 0.0;  ///< max_s |v(s, U) - sum v(s', u) P_u(s', s)|
};

/// max over states of |v(s, U) - (v P)(s)|.
double invariance_residual(const ControlledChain& chain, const Matrix& weights);

struct OccupationLpResult {
    OccupationMeasure occupation;
    double rho_star = 0.0;
    Matrix policy;                  ///< randomized stationary policy (state, action)
    std::vector<int> support;       ///< states with positive mass, ascending
    /// True when the chain state is the information state, so any LP solution
    /// is realizable by an admissible policy. False for the latent-state
    /// relaxation, whose value is only a lower bound.
    bool information_state = true;
    std::string optimality_claim = "optimal";
    int pivots = 0;
};

/// min sum v c over invariant occupation measures of the chain; the simplex
/// returns a vertex. Off the support the policy plays action 0.
OccupationLpResult occupation_lp(const ControlledChain& chain, const SimplexOptions& options = {});

/// Full-observation relaxation (LP on the hidden state): a lower bound for the
/// partially observed average cost, labeled information_state = false.
OccupationLpResult latent_state_lower_bound(const FinitePOMDP& model, const SimplexOptions& options = {});

/// Deterministic policy taking the most probable action (lowest index on ties).
std::vector<int> deterministic_policy(const Matrix& randomized_policy);
Matrix randomized_policy(const std::vector<int>& policy, int n_actions);

/// True when the support of the LP occupation is exactly one closed
/// communicating class of the chain under the extracted policy.
bool support_is_ergodic(const ControlledChain& chain, const OccupationLpResult& result, double mass_tol = 1e-12);

Json to_json(const OccupationLpResult& result);

// ---------------------------------------------------------------------------
// Closed loop on the true model

/// Markov chain of (hidden state, full window) under a stationary window
/// policy; joint id = window * n_states + x, where x is the state at the time
/// of the newest observation in the window.
struct JointWindowChain {
    int n_x = 0;
    long n_windows = 0;
    SparseMatrix transition;
    Vector cost;  ///< expected stage cost under the policy
};

JointWindowChain joint_window_chain(const FinitePOMDP& model, const WindowCodec& codec, int N, const Matrix& policy);

/// Exact long-run average cost of a window policy on the true model.
PolicyGain closed_loop_gain(const FinitePOMDP& model, const WindowCodec& codec, int N, const Matrix& policy);

struct EmpiricalOccupation {
    OccupationMeasure window_action;  ///< tallies over (window, action); residual w.r.t. the window MDP kernel
    double joint_residual = 0.0;      ///< residual of the (x, window) tallies on the exact joint kernel
    double average_cost = 0.0;
    double std_error = 0.0;           ///< batch-means Monte Carlo standard error
    long horizon = 0;
};

/// Tallies (window, action) visits over T steps of the true POMDP under a
/// stationary window policy. The window is filled by padding (as
/// InitialFill::kPadRepeat); tallying starts once it is full.
EmpiricalOccupation empirical_occupation(const FinitePOMDP& model, const WindowMDP& wmdp, const Matrix& policy,
                                         long horizon, std::uint64_t seed);

/// Deterministic counterpart: (1/T) sum_t law_t over (x, window, action),
/// propagated exactly from the same initial law. Its joint residual is at
/// most 1/T.
EmpiricalOccupation averaged_occupation(const FinitePOMDP& model, const WindowMDP& wmdp, const Matrix& policy,
                                        long horizon);

// ---------------------------------------------------------------------------
// Initialization experiment

struct InitializationOptions {
    long burn_in = 0;                 ///< 0: 10 times the mixing-time estimate from birkhoff_tau
    int proxy_length = 0;             ///< W; 0: the policy window N
    std::vector<long> checkpoints;    ///< times at which |running mean - rho*| is recorded
    long trajectory_stride = 100;
    int threads = 1;
};

struct InitializationReplication {
    std::vector<long> times;          ///< recorded t (1-based count of averaged steps)
    std::vector<double> running_mean;
    std::vector<double> checkpoint_gap;
    double terminal_mean = 0.0;
    double terminal_gap = 0.0;
    double std_error = 0.0;
    bool zero_probability_start = false;
    bool absolutely_continuous = true;
};

struct InitializationResult {
    double rho_star = 0.0;
    long burn_in = 0;
    int proxy_length = 0;
    std::vector<long> checkpoints;
    std::vector<InitializationReplication> replications;
    double pooled_mean = 0.0;
    double pooled_std_error = 0.0;    ///< sd of terminal means / sqrt(replications)
    double terminal_gap = 0.0;        ///< |pooled mean - rho*|
    int absolute_continuity_violations = 0;
    int zero_probability_starts = 0;
};

long default_burn_in(const FinitePOMDP& model);

/// Burn-in of the closed loop supplies a window proxy for the stationary past;
/// X_0 ~ prior is drawn independently, Y_0 ~ Q(X_0, .), and the policy is run
/// for T steps from the spliced window. Replication r uses substream r.
InitializationResult initialization_experiment(const FinitePOMDP& model, const WindowMDP& wmdp, const Matrix& policy,
                                               double rho_star, long horizon, int replications, std::uint64_t seed,
                                               const InitializationOptions& options = {});

CsvTable initialization_csv(const InitializationResult& result);
Json initialization_summary(const InitializationResult& result);

}  // namespace pomdp
