#pragma once

#include "pomdp/filter.hpp"
#include "pomdp/mdp.hpp"
#include "pomdp/model.hpp"
#include "pomdp/report.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace pomdp {

struct WeightedBelief {
    Belief belief;
    double probability = 0.0;
};

/// Belief-MDP transition eta(. | pi, u): the filter successors F(pi, u, y)
/// with their predictive probabilities H(y | pi, u), for every y with
/// H(y | pi, u) >= 1e-300.
std::vector<WeightedBelief> belief_kernel(const FinitePOMDP& model, const Belief& belief, int action);

/// c~(pi, u) = sum_x pi(x) c(x, u).
inline double belief_cost(const FinitePOMDP& model, const Belief& belief, int action) {
    return belief.dot(model.cost.col(action));
}

/// W1 between beliefs under the model's state metric (closed form for the
/// discrete metric, transportation LP otherwise).
double belief_distance(const FinitePOMDP& model, const Belief& p, const Belief& q);

/**
 * All beliefs with entries in {0, 1/k, ..., 1}, enumerated in descending
 * lexicographic order of the integer compositions (index 0 is the point mass
 * on state 0). The quantizer returns the W1-nearest point, lowest index on
 * ties.
 */
class BeliefGrid {
public:
    static constexpr std::size_t kDefaultCap = 2'000'000;

    BeliefGrid(int n_states, int resolution, Matrix metric, std::size_t cap = kDefaultCap);

    int n_states() const { return n_states_; }
    int resolution() const { return resolution_; }
    std::size_t size() const { return points_.size(); }
    const std::vector<Belief>& points() const { return points_; }
    const Belief& point(std::size_t i) const { return points_[i]; }
    const std::vector<int>& composition(std::size_t i) const { return compositions_[i]; }
    const Matrix& metric() const { return metric_; }

    /// Index of the integer composition, or -1 when it is not on the grid.
    long index_of(const std::vector<int>& composition) const;

    int quantize(const Belief& p) const;

    /// Upper bound on the W1 distance from any belief to its quantized point.
    double covering_radius() const;

    /// C(k + n - 1, n - 1).
    static double count(int n_states, int resolution);

private:
    int quantize_lattice(const Belief& p) const;
    int quantize_search(const Belief& p) const;

    int n_states_;
    int resolution_;
    Matrix metric_;
    bool lattice_nearest_;
    std::vector<Belief> points_;
    std::vector<std::vector<int>> compositions_;
    std::map<std::vector<int>, long> lookup_;
};

BeliefGrid build_belief_grid(const FinitePOMDP& model, int resolution, std::size_t cap = BeliefGrid::kDefaultCap);

/// Finite MDP on grid indices: successors of belief_kernel mapped through the
/// quantizer (nearest neighbour, no interpolation), cost c~ at grid points.
ControlledChain quantized_belief_chain(const FinitePOMDP& model, const BeliefGrid& grid);

ValueTable solve_discounted_belief(const FinitePOMDP& model, const BeliefGrid& grid, double tol,
                                   int max_iterations = 1'000'000);

/// Discounted value at an arbitrary belief: one Bellman backup from `belief`
/// using grid values at the quantized successors.
double belief_value_at(const FinitePOMDP& model, const BeliefGrid& grid, const ValueTable& table,
                       const Belief& belief);

/// Optimal discounted cost from the model prior: expectation over y_0 of the
/// value at the initial posterior.
double belief_value_from_prior(const FinitePOMDP& model, const BeliefGrid& grid, const ValueTable& table);

enum class AcoeStatus { kConverged, kNotConvergedWarning };

struct AcoeResult {
    ValueTable h;
    double rho_star = 0.0;
    std::vector<double> span_history;
    AcoeStatus status = AcoeStatus::kConverged;
    double K2 = 0.0;
    /// Least-squares geometric rate of the span history tail (< 1 when
    /// decreasing geometrically).
    double span_rate = 1.0;
};

struct AcoeOptions {
    int reference = 0;
    int max_iterations = 200'000;
};

/// Relative value iteration on the quantized belief chain. Throws
/// ConvergenceError when K2 < 1 and the span does not reach tol; otherwise
/// non-convergence is reported as a warning status.
AcoeResult solve_acoe(const FinitePOMDP& model, const BeliefGrid& grid, double tol, const AcoeOptions& options = {});

struct ContractionViolation {
    Belief z;
    Belief z_prime;
    int action = 0;
    double lhs = 0.0;
    double rhs = 0.0;
};

struct ContractionReport {
    int pairs = 0;
    double K2 = 0.0;
    double max_ratio = 0.0;  ///< max of W1(eta, eta') / W1(z, z') over pairs with W1(z, z') > 1e-12
    double max_excess = -1.0;  ///< max of lhs - K2 W1(z, z')
    std::vector<ContractionViolation> violations;
};

/// Distance between two belief-MDP successor laws: transportation LP over the
/// successor atoms with ground cost W1(belief, belief).
double successor_distance(const FinitePOMDP& model, const Belief& z, const Belief& z_prime, int action);

/// Samples n_pairs (z, z', u) and checks W1(eta(.|z,u), eta(.|z',u)) <= K2 W1(z, z') + 1e-9.
ContractionReport check_wasserstein_contraction(const FinitePOMDP& model, int n_pairs, std::uint64_t seed);

/// Random belief: Dirichlet(1,...,1), with occasional point masses and
/// reduced supports so boundary beliefs are exercised.
Belief sample_belief(int n_states, Rng& rng);

CsvTable value_table_csv(const BeliefGrid& grid, const ValueTable& table);
Json acoe_summary(const AcoeResult& result);
Json to_json(const ContractionReport& report);

}  // namespace pomdp
