#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>

namespace pomdp {

/// Full variation norm sum_i |p_i - q_i| (ranges over [0, 2] for
/// probability vectors).
template <typename A, typename B>
typename A::Scalar total_variation(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) {
    return (p - q).cwiseAbs().sum();
}

/// Dobrushin coefficient of a row-stochastic matrix:
/// min over row pairs of sum_y min(K[x][y], K[x'][y]). Equals 1 iff all rows
/// coincide.
template <typename Derived>
typename Derived::Scalar dobrushin_coefficient(const Eigen::MatrixBase<Derived>& kernel) {
    using Scalar = typename Derived::Scalar;
    Scalar best = Scalar(1);
    for (Eigen::Index i = 0; i < kernel.rows(); ++i)
        for (Eigen::Index j = i + 1; j < kernel.rows(); ++j)
            best = std::min(best, kernel.row(i).cwiseMin(kernel.row(j)).sum());
    return std::clamp(best, Scalar(0), Scalar(1));
}

/// Lipschitz constant of x -> K[x][.] from (states, metric) into the full
/// variation norm.
template <typename K, typename M>
typename K::Scalar tv_lipschitz_constant(const Eigen::MatrixBase<K>& kernel,
                                         const Eigen::MatrixBase<M>& metric) {
    using Scalar = typename K::Scalar;
    Scalar best = Scalar(0);
    for (Eigen::Index i = 0; i < kernel.rows(); ++i)
        for (Eigen::Index j = i + 1; j < kernel.rows(); ++j)
            best = std::max(best, total_variation(kernel.row(i), kernel.row(j)) / metric(i, j));
    return best;
}

/// Birkhoff's minimal cross ratio
///     phi(A) = min_{i,j,k,l} A[i][k] A[j][l] / (A[j][k] A[i][l]).
/// Returns 0 when some ratio has a zero denominator and nonzero numerator;
/// 0/0 quadruples are skipped.
template <typename Derived>
typename Derived::Scalar birkhoff_cross_ratio(const Eigen::MatrixBase<Derived>& a) {
    using Scalar = typename Derived::Scalar;
    Scalar phi = Scalar(1);
    const Eigen::Index n = a.rows(), m = a.cols();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) continue;
            for (Eigen::Index k = 0; k < m; ++k)
                for (Eigen::Index l = 0; l < m; ++l) {
                    if (k == l) continue;
                    const Scalar num = a(i, k) * a(j, l);
                    const Scalar den = a(j, k) * a(i, l);
                    if (den == Scalar(0)) {
                        if (num != Scalar(0)) return Scalar(0);
                        continue;
                    }
                    phi = std::min(phi, num / den);
                }
        }
    return phi;
}

/// Birkhoff contraction coefficient (1 - sqrt(phi)) / (1 + sqrt(phi)) of a
/// nonnegative matrix acting on the Hilbert projective metric.
template <typename Derived>
typename Derived::Scalar birkhoff_coefficient(const Eigen::MatrixBase<Derived>& a) {
    using std::sqrt;
    const auto s = sqrt(birkhoff_cross_ratio(a));
    return (1 - s) / (1 + s);
}

/// Hilbert projective distance log max(p/q) - log min(p/q); infinite unless
/// p and q have the same support.
template <typename A, typename B>
typename A::Scalar hilbert_metric(const Eigen::MatrixBase<A>& p, const Eigen::MatrixBase<B>& q) {
    using Scalar = typename A::Scalar;
    Scalar hi = -std::numeric_limits<Scalar>::infinity();
    Scalar lo = std::numeric_limits<Scalar>::infinity();
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        if (p[i] == Scalar(0) && q[i] == Scalar(0)) continue;
        if (p[i] == Scalar(0) || q[i] == Scalar(0)) return std::numeric_limits<Scalar>::infinity();
        const Scalar r = std::log(p[i] / q[i]);
        hi = std::max(hi, r);
        lo = std::min(lo, r);
    }
    return hi < lo ? Scalar(0) : hi - lo;
}

}  // namespace pomdp
