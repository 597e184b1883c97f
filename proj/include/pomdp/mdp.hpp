#pragma once

#include "pomdp/types.hpp"

#include <vector>

namespace pomdp {

/// Finite controlled Markov chain: kernel[u](s, s') and cost(s, u).
struct ControlledChain {
    int n_states = 0;
    int n_actions = 0;
    std::vector<SparseMatrix> kernel;
    Matrix cost;
};

/// Throws ValidationError unless every row of every kernel sums to 1 within tol
/// with nonnegative entries.
void validate_chain(const ControlledChain& chain, double tol = 1e-12);

struct ValueTable {
    Vector values;
    std::vector<int> policy;
    double residual = 0.0;
    int iterations = 0;
};

/// Q(s, u) = c(s, u) + beta sum_s' P_u(s, s') V(s').
Matrix q_values(const ControlledChain& chain, const Vector& values, double discount);

/// Row-wise argmin with lowest-index tie-breaking (ties within 1e-12 relative).
std::vector<int> greedy_policy(const Matrix& q);

/// Value iteration until the sup-norm Bellman residual is at most
/// tol (1 - beta) / (2 beta), which puts the iterate within tol of the fixed
/// point. Throws ConvergenceError after max_iterations sweeps.
ValueTable discounted_value_iteration(const ControlledChain& chain, double discount, double tol,
                                      int max_iterations = 1'000'000);

struct RelativeValueResult {
    ValueTable relative;  ///< values = h, normalized so h(reference) = 0
    double rho = 0.0;
    std::vector<double> span_history;
    bool converged = false;
};

/// Relative value iteration h <- Th - (Th)(reference). Stops when the span of
/// Th - h is at most tol; rho is the midpoint of its range.
RelativeValueResult relative_value_iteration(const ControlledChain& chain, int reference, double tol,
                                             int max_iterations = 1'000'000);

/// Transition matrix of a deterministic stationary policy.
SparseMatrix policy_matrix(const ControlledChain& chain, const std::vector<int>& policy);
/// Transition matrix of a randomized stationary policy (rows = states).
SparseMatrix policy_matrix(const ControlledChain& chain, const Matrix& randomized_policy);
Vector policy_cost(const ControlledChain& chain, const std::vector<int>& policy);

/// Exact discounted cost (I - beta P_pi)^{-1} c_pi.
Vector evaluate_discounted(const ControlledChain& chain, const std::vector<int>& policy, double discount);

/// Strongly connected components of the transition graph (entries > 0).
std::vector<std::vector<int>> communicating_classes(const SparseMatrix& transition);

/// Communicating classes with no transition leaving them.
std::vector<std::vector<int>> closed_classes(const SparseMatrix& transition);

/// Stationary distribution of the chain restricted to a closed class
/// (returned over the full state space, zero elsewhere).
Vector class_stationary_distribution(const SparseMatrix& transition, const std::vector<int>& cls);

/// lim (1/T) sum_t initial P^t: closed-class stationary laws weighted by the
/// probability of absorption from the initial law.
Vector cesaro_limit(const SparseMatrix& transition, const Vector& initial);

struct PolicyGain {
    std::vector<std::vector<int>> recurrent_classes;
    std::vector<double> class_costs;  ///< long-run average cost in each class
    Vector gain;                      ///< long-run average cost from each state
};

PolicyGain average_cost_of_policy(const SparseMatrix& transition, const Vector& stage_cost);
PolicyGain average_cost_of_policy(const ControlledChain& chain, const std::vector<int>& policy);

}  // namespace pomdp
