#include "pomdp/distances.hpp"

#include "pomdp/lp.hpp"

#include <cmath>

namespace pomdp {

namespace {

constexpr double kSupportEps = 1e-15;

std::vector<int> support(const Vector& w) {
    std::vector<int> idx;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w[i] > kSupportEps) idx.push_back(static_cast<int>(i));
    return idx;
}

}  // namespace

bool is_discrete_metric(const Matrix& metric) {
    for (Eigen::Index i = 0; i < metric.rows(); ++i)
        for (Eigen::Index j = 0; j < metric.cols(); ++j)
            if (metric(i, j) != (i == j ? 0.0 : 1.0)) return false;
    return true;
}

double transport_cost(const Vector& p, const Vector& q, const Matrix& ground_cost) {
    if (ground_cost.rows() != p.size() || ground_cost.cols() != q.size())
        throw std::invalid_argument("transport_cost: dimension mismatch");
    const auto sp = support(p);
    const auto sq = support(q);
    if (sp.empty() || sq.empty()) throw std::invalid_argument("transport_cost: empty support");
    const int a = static_cast<int>(sp.size());
    const int b = static_cast<int>(sq.size());

    if (a == 1 || b == 1) {
        double total = 0.0;
        for (int i : sp)
            for (int j : sq) total += (a == 1 ? q[j] : p[i]) * ground_cost(i, j);
        return total;
    }

    // Variables x[i*b + j]; row marginals for all i, column marginals for all
    // but the last j (implied by the total mass).
    LinearProgram lp;
    lp.objective.resize(a * b);
    for (int i = 0; i < a; ++i)
        for (int j = 0; j < b; ++j) lp.objective[i * b + j] = ground_cost(sp[i], sq[j]);
    lp.eq_lhs = Matrix::Zero(a + b - 1, a * b);
    lp.eq_rhs.resize(a + b - 1);
    double mass_p = 0.0, mass_q = 0.0;
    for (int i : sp) mass_p += p[i];
    for (int j : sq) mass_q += q[j];
    for (int i = 0; i < a; ++i) {
        for (int j = 0; j < b; ++j) lp.eq_lhs(i, i * b + j) = 1.0;
        lp.eq_rhs[i] = p[sp[i]] / mass_p;
    }
    for (int j = 0; j + 1 < b; ++j) {
        for (int i = 0; i < a; ++i) lp.eq_lhs(a + j, i * b + j) = 1.0;
        lp.eq_rhs[a + j] = q[sq[j]] / mass_q;
    }
    const LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::kOptimal)
        throw std::runtime_error(std::string("transport_cost: LP ") + to_string(sol.status));
    return std::max(0.0, sol.objective);
}

double wasserstein1(const Vector& p, const Vector& q, const Matrix& metric) {
    return transport_cost(p, q, metric);
}

double bounded_lipschitz(const Vector& p, const Vector& q, const Matrix& metric) {
    const int n = static_cast<int>(p.size());
    if (q.size() != n || metric.rows() != n) throw std::invalid_argument("bounded_lipschitz: dimension mismatch");
    // f = g - 1 with g in [0, 2]; the shift contributes -sum(p - q) = 0.
    const Vector diff = p - q;
    LinearProgram lp;
    lp.objective = -diff;
    lp.le_lhs = Matrix::Zero(n + n * (n - 1), n);
    lp.le_rhs.resize(n + n * (n - 1));
    int r = 0;
    for (int x = 0; x < n; ++x) {
        lp.le_lhs(r, x) = 1.0;
        lp.le_rhs[r++] = 2.0;
    }
    for (int x = 0; x < n; ++x)
        for (int y = 0; y < n; ++y) {
            if (x == y) continue;
            lp.le_lhs(r, x) = 1.0;
            lp.le_lhs(r, y) = -1.0;
            lp.le_rhs[r++] = metric(x, y);
        }
    const LpSolution sol = solve_lp(lp);
    if (sol.status != LpStatus::kOptimal)
        throw std::runtime_error(std::string("bounded_lipschitz: LP ") + to_string(sol.status));
    return std::max(0.0, -sol.objective - diff.sum());
}

}  // namespace pomdp
