#pragma once

#include "pomdp/contraction.hpp"
#include "pomdp/types.hpp"

namespace pomdp {

/// True iff the metric is 1 off the diagonal and 0 on it.
bool is_discrete_metric(const Matrix& metric);

/// Optimal transport cost between weight vectors p (rows) and q (columns)
/// under an arbitrary nonnegative ground cost, solved as the transportation
/// linear program restricted to the supports of p and q.
double transport_cost(const Vector& p, const Vector& q, const Matrix& ground_cost);

/// Kantorovich distance W1 on a finite metric space (transportation LP).
double wasserstein1(const Vector& p, const Vector& q, const Matrix& metric);

/// Closed form of W1 under the discrete metric: half the full variation.
inline double wasserstein1_discrete(const Vector& p, const Vector& q) {
    return 0.5 * total_variation(p, q);
}

/// Bounded-Lipschitz distance sup { sum f (p - q) : |f| <= 1, |f(x) - f(x')| <= d(x, x') },
/// computed exactly as a linear program over the values of f.
double bounded_lipschitz(const Vector& p, const Vector& q, const Matrix& metric);

}  // namespace pomdp
