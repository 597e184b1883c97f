#pragma once

#include "pomdp/model.hpp"
#include "pomdp/report.hpp"
#include "pomdp/simulation.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace pomdp {

/// State prediction sum_x pi(x) T[u](x, .).
Vector predict_state(const FinitePOMDP& model, const Belief& belief, int action);

/// Observation prediction H(y | pi, u) = sum_x' Q(x', y) sum_x pi(x) T[u](x, x').
Vector predict_obs(const FinitePOMDP& model, const Belief& belief, int action);

/// Bayes correction of a state distribution by observation y. Throws
/// ImpossibleObservation when the normalizer is below 1e-300.
Belief bayes_correct(const FinitePOMDP& model, const Vector& prediction, int obs);

/// Nonlinear filter recursion F(pi, u, y).
Belief filter_update(const FinitePOMDP& model, const Belief& belief, int action, int obs);

/// Posterior of X_0 given y_0 under the model prior (or `prior`).
Belief initial_posterior(const FinitePOMDP& model, int obs);
Belief initial_posterior(const FinitePOMDP& model, const Belief& prior, int obs);

/// Iterated filter over a full history starting from `prior`.
Belief run_filter(const FinitePOMDP& model, const Belief& prior, std::span<const int> obs,
                  std::span<const int> acts);

/// Posterior P(X_t | y_{0:t}, u_{0:t-1}) by summing the joint probability of
/// every state path x_{0:t} from the model prior. Exponential in t; intended as
/// an oracle for short horizons. Throws ImpossibleObservation when the history
/// has zero probability.
Belief brute_force_posterior(const FinitePOMDP& model, std::span<const int> obs, std::span<const int> acts);

struct RegularityConstants {
    double alpha = 0.0;              ///< TV-Lipschitz constant of the transition kernel
    double diameter_D = 0.0;         ///< max state_metric entry
    double dobrushin_delta_Q = 1.0;  ///< Dobrushin coefficient of the observation channel
    double K2 = 0.0;                 ///< alpha D (3 - 2 delta_Q) / 2
    double birkhoff_tau = 0.0;       ///< max over actions of the Birkhoff coefficient
    double K1 = 0.0;                 ///< cost Lipschitz constant
    double K1_bar = 0.0;             ///< history-space cost Lipschitz estimate
    double K2_bar = 0.0;             ///< history-space kernel W1-Lipschitz estimate
    bool history_estimates = false;  ///< K1_bar/K2_bar were estimated (not provable bounds)
};

inline double k2_from_parts(double alpha, double diameter, double delta_q) {
    return alpha * diameter * (3.0 - 2.0 * delta_q) / 2.0;
}

RegularityConstants stability_constants(const FinitePOMDP& model);

Json to_json(const RegularityConstants& c);

struct StabilityOptions {
    double tolerance = 1e-6;  ///< terminal sup-TV below this sets the stability verdict
    int threads = 1;
};

struct StabilityRow {
    int t = 0;
    double sup_tv = 0.0;
    double sup_bl = 0.0;
    double sup_w1 = 0.0;
};

struct StabilityReport {
    /// Per-step sup over prior pairs, then max over replications.
    std::vector<StabilityRow> rows;
    /// Per-replication sup-TV sequences (index = replication); empty for
    /// degenerate replications.
    std::vector<std::vector<double>> replication_tv;
    std::optional<double> fitted_rate;  ///< empty when there is no decay
    bool exact_merge = false;           ///< all distances hit 1e-12 before the horizon
    bool filter_stable = false;         ///< terminal sup-TV < tolerance
    std::vector<int> degenerate_replications;
    std::vector<std::string> degenerate_reasons;
    int replications = 0;
    double tolerance = 0.0;
};

/**
 * Simulates the true chain from the model prior under `rule` and, for each
 * replication, runs one filter per grid prior on the same realized (y, u)
 * sequence. Records per-step sup over prior pairs of the TV, bounded-Lipschitz
 * and W1 distances and fits a geometric rate to the sup-TV sequence.
 *
 * A replication in which some prior assigns zero probability to a realized
 * observation is listed as degenerate and excluded from the table.
 */
StabilityReport filter_stability_experiment(const FinitePOMDP& model, const ActionRule& rule,
                                            const std::vector<Belief>& prior_grid, int horizon,
                                            int replications, std::uint64_t seed,
                                            const StabilityOptions& options = {});

/// Least-squares geometric rate of d_t over t >= 1 while d_t > 1e-12.
std::optional<double> fit_geometric_rate(const std::vector<double>& distances, bool* exact_merge = nullptr);

CsvTable stability_table(const StabilityReport& report);
Json stability_summary(const StabilityReport& report);

}  // namespace pomdp
