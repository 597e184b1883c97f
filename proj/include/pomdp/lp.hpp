#pragma once

#include "pomdp/types.hpp"

namespace pomdp {

/**
 * Linear program in the form
 *
 *     minimize    c' x
 *     subject to  A_eq x  = b_eq
 *                 A_le x <= b_le
 *                 x >= 0
 *
 * Either constraint block may have zero rows. Maximization is expressed by
 * negating c.
 */
struct LinearProgram {
    Vector objective;
    Matrix eq_lhs;
    Vector eq_rhs;
    Matrix le_lhs;
    Vector le_rhs;
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded, kIterationLimit };

struct LpSolution {
    LpStatus status = LpStatus::kIterationLimit;
    Vector x;
    double objective = 0.0;
    int pivots = 0;
};

struct SimplexOptions {
    double tolerance = 1e-11;
    /// Smallest admissible pivot element.
    double pivot_tolerance = 1e-9;
    /// Ratio-test ties keep only pivots at least this fraction of the largest.
    double pivot_threshold = 0.1;
    int max_pivots = 1'000'000;
};

/// Dense two-phase tableau simplex. Deterministic: entering column is the most
/// negative reduced cost (lowest index on ties); the leaving row is chosen by
/// the lexicographic ratio test, which rules out cycling.
LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options = {});

const char* to_string(LpStatus status);

}  // namespace pomdp
