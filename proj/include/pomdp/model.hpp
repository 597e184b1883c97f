#pragma once

#include "pomdp/types.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace pomdp {

/**
 * Finite partially observed MDP.
 *
 * transition[u](x, x') = P(X_{t+1} = x' | X_t = x, U_t = u)
 * observation(x, y)    = P(Y_t = y | X_t = x)
 * cost(x, u)           = stage cost, in [0, c_max]
 *
 * Total variation everywhere in this library is the full variation
 * sum_i |p_i - q_i|.
 */
struct FinitePOMDP {
    int n_states = 0;
    int n_obs = 0;
    int n_actions = 0;
    std::vector<Matrix> transition;
    Matrix observation;
    Matrix cost;
    double discount = 0.9;
    Vector prior;
    Matrix state_metric;
    double c_max = 0.0;

    const Matrix& kernel(int action) const { return transition.at(static_cast<std::size_t>(action)); }
};

struct Violation {
    std::string field;
    std::string description;
    double magnitude = 0.0;
};

struct ValidationReport {
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
    std::string summary() const;
};

class ModelValidationError : public ValidationError {
public:
    explicit ModelValidationError(ValidationReport report);
    const ValidationReport& report() const { return report_; }

private:
    ValidationReport report_;
};

ValidationReport validate(const FinitePOMDP& model);

/// Throws ModelValidationError if the report is not ok.
void require_valid(const FinitePOMDP& model);

/// 1 off the diagonal, 0 on it.
Matrix discrete_metric(int n);

/// Parses the JSON model document; see README for the field list.
FinitePOMDP parse_model(const std::string& text);
FinitePOMDP load_model(const std::string& path);
std::string serialize_model(const FinitePOMDP& model);
void save_model(const FinitePOMDP& model, const std::string& path);

/// Wraps an MDP as a POMDP with the identity observation channel.
FinitePOMDP make_fully_observed(const std::vector<Matrix>& transition, const Matrix& cost,
                                double discount, const Vector& prior);

struct ModelDims {
    int n_states = 2;
    int n_obs = 2;
    int n_actions = 2;
};

/// Random model whose transition and observation entries are all >= eps:
/// each row is eps + (1 - n eps) * Dirichlet(1, ..., 1). Costs are uniform in
/// [0, 1), c_max = 1, prior uniform, discount 0.9. Requires
/// 0 < eps <= 1 / max(n_states, n_obs).
FinitePOMDP make_mixing_example(double eps, ModelDims dims, std::uint64_t seed);

/// Two-state, two-observation, two-action reference model shipped as
/// models/m1.json.
FinitePOMDP make_m1();

/// True iff every action induces the same transition matrix.
bool is_control_free(const FinitePOMDP& model);

/// Copy of the model with the observation kernel replaced.
FinitePOMDP with_observation(FinitePOMDP model, const Matrix& observation);

}  // namespace pomdp
