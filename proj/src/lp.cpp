#include "pomdp/lp.hpp"

#include <cmath>
#include <limits>

namespace pomdp {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tableau {
public:
    // Rows 0..m-1 are constraints; column `cols_` is the right-hand side.
    Tableau(RowMatrix body, std::vector<int> basis, double tol)
        : t_(std::move(body)), basis_(std::move(basis)), identity_(basis_), tol_(tol) {
        m_ = static_cast<int>(t_.rows());
        cols_ = static_cast<int>(t_.cols()) - 1;
    }

    int rows() const { return m_; }
    int cols() const { return cols_; }
    const std::vector<int>& basis() const { return basis_; }
    double rhs(int r) const { return t_(r, cols_); }
    double at(int r, int c) const { return t_(r, c); }

    void pivot(int row, int col) {
        const double p = t_(row, col);
        t_.row(row) /= p;
        for (int r = 0; r < m_; ++r) {
            if (r == row) continue;
            const double f = t_(r, col);
            if (f != 0.0) t_.row(r) -= f * t_.row(row);
        }
        // Keep the pivot column exact.
        for (int r = 0; r < m_; ++r) t_(r, col) = (r == row) ? 1.0 : 0.0;
        basis_[row] = col;
    }

    void drop_row(int row) {
        RowMatrix next(m_ - 1, cols_ + 1);
        for (int r = 0, k = 0; r < m_; ++r)
            if (r != row) next.row(k++) = t_.row(r);
        t_ = std::move(next);
        basis_.erase(basis_.begin() + row);
        --m_;
    }

    // Minimizes cost' x over columns allowed[j]; returns status.
    LpStatus optimize(const Vector& cost, const std::vector<bool>& allowed,
                      const SimplexOptions& opt, int& pivots) {
        Vector reduced(cols_);
        std::vector<int> tied;
        while (true) {
            // reduced_j = c_j - c_B' column_j
            Vector cb(m_);
            for (int r = 0; r < m_; ++r) cb[r] = cost[basis_[r]];
            reduced = cost.head(cols_) - (cb.transpose() * t_.leftCols(cols_)).transpose();

            int enter = -1;
            double best = -tol_;
            for (int j = 0; j < cols_; ++j) {
                if (allowed[j] && reduced[j] < best) {
                    best = reduced[j];
                    enter = j;
                }
            }
            if (enter < 0) return LpStatus::kOptimal;

            double best_ratio = std::numeric_limits<double>::infinity();
            for (int r = 0; r < m_; ++r) {
                const double a = t_(r, enter);
                if (a > opt.pivot_tolerance) best_ratio = std::min(best_ratio, std::max(0.0, t_(r, cols_)) / a);
            }
            if (!std::isfinite(best_ratio)) return LpStatus::kUnbounded;
            tied.clear();
            for (int r = 0; r < m_; ++r) {
                const double a = t_(r, enter);
                if (a > opt.pivot_tolerance && std::max(0.0, t_(r, cols_)) / a <= best_ratio + tol_) tied.push_back(r);
            }
            // Threshold pivoting: among tied rows keep pivots within a factor
            // of the largest, then apply the lexicographic rule on the rows
            // of B^-1 (the initial identity columns); remaining ties by basic
            // index.
            double largest = 0.0;
            for (int r : tied) largest = std::max(largest, t_(r, enter));
            std::erase_if(tied, [&](int r) { return t_(r, enter) < opt.pivot_threshold * largest; });
            for (std::size_t k = 0; k < identity_.size() && tied.size() > 1; ++k) {
                const int c = identity_[k];
                double lo = std::numeric_limits<double>::infinity();
                for (int r : tied) lo = std::min(lo, t_(r, c) / t_(r, enter));
                std::vector<int> keep;
                for (int r : tied)
                    if (t_(r, c) / t_(r, enter) <= lo + tol_) keep.push_back(r);
                tied.swap(keep);
            }
            int leave = tied.front();
            for (int r : tied)
                if (basis_[r] < basis_[leave]) leave = r;

            pivot(leave, enter);
            if (++pivots >= opt.max_pivots) return LpStatus::kIterationLimit;
        }
    }

    Vector solution() const {
        Vector x = Vector::Zero(cols_);
        for (int r = 0; r < m_; ++r) x[basis_[r]] = std::max(0.0, t_(r, cols_));
        return x;
    }

private:
    RowMatrix t_;
    std::vector<int> basis_;
    std::vector<int> identity_;  // columns of the initial (identity) basis
    double tol_;
    int m_ = 0;
    int cols_ = 0;
};

}  // namespace

LpSolution solve_lp(const LinearProgram& lp, const SimplexOptions& options) {
    const int n = static_cast<int>(lp.objective.size());
    const int m_eq = static_cast<int>(lp.eq_lhs.rows());
    const int m_le = static_cast<int>(lp.le_lhs.rows());
    if ((m_eq > 0 && lp.eq_lhs.cols() != n) || (m_le > 0 && lp.le_lhs.cols() != n) ||
        lp.eq_rhs.size() != m_eq || lp.le_rhs.size() != m_le)
        throw std::invalid_argument("solve_lp: dimension mismatch");

    const int m = m_eq + m_le;
    // Columns: structural [0,n), slack/surplus for <= rows [n, n+m_le),
    // artificials [n+m_le, n+m_le+n_art).
    std::vector<int> artificial_row;
    std::vector<int> basis(m, -1);
    Matrix rows = Matrix::Zero(m, n + m_le);
    Vector rhs(m);
    for (int i = 0; i < m_eq; ++i) {
        const double s = lp.eq_rhs[i] < 0 ? -1.0 : 1.0;
        rows.row(i).head(n) = s * lp.eq_lhs.row(i);
        rhs[i] = s * lp.eq_rhs[i];
        artificial_row.push_back(i);
    }
    for (int i = 0; i < m_le; ++i) {
        const int r = m_eq + i;
        if (lp.le_rhs[i] >= 0) {
            rows.row(r).head(n) = lp.le_lhs.row(i);
            rows(r, n + i) = 1.0;
            rhs[r] = lp.le_rhs[i];
            basis[r] = n + i;
        } else {
            rows.row(r).head(n) = -lp.le_lhs.row(i);
            rows(r, n + i) = -1.0;
            rhs[r] = -lp.le_rhs[i];
            artificial_row.push_back(r);
        }
    }
    const int n_art = static_cast<int>(artificial_row.size());
    const int total = n + m_le + n_art;
    RowMatrix body = RowMatrix::Zero(m, total + 1);
    body.leftCols(n + m_le) = rows;
    body.col(total) = rhs;
    for (int k = 0; k < n_art; ++k) {
        body(artificial_row[k], n + m_le + k) = 1.0;
        basis[artificial_row[k]] = n + m_le + k;
    }

    Tableau tab(std::move(body), std::move(basis), options.tolerance);
    LpSolution out;
    std::vector<bool> allowed(total, true);

    if (n_art > 0) {
        Vector phase1 = Vector::Zero(total);
        phase1.tail(n_art).setOnes();
        const LpStatus s = tab.optimize(phase1, allowed, options, out.pivots);
        if (s == LpStatus::kIterationLimit) {
            out.status = s;
            return out;
        }
        double infeas = 0.0;
        for (int r = 0; r < tab.rows(); ++r)
            if (tab.basis()[r] >= n + m_le) infeas += tab.rhs(r);
        if (infeas > 1e-8) {
            out.status = LpStatus::kInfeasible;
            return out;
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        for (int r = tab.rows() - 1; r >= 0; --r) {
            if (tab.basis()[r] < n + m_le) continue;
            int col = -1;
            double best = options.tolerance * 1e3;
            for (int j = 0; j < n + m_le; ++j) {
                if (std::abs(tab.at(r, j)) > best) {
                    best = std::abs(tab.at(r, j));
                    col = j;
                }
            }
            if (col >= 0)
                tab.pivot(r, col);
            else
                tab.drop_row(r);
        }
        for (int k = 0; k < n_art; ++k) allowed[n + m_le + k] = false;
    }

    Vector phase2 = Vector::Zero(total);
    phase2.head(n) = lp.objective;
    out.status = tab.optimize(phase2, allowed, options, out.pivots);
    out.x = tab.solution().head(n);
    out.objective = lp.objective.dot(out.x);
    return out;
}

const char* to_string(LpStatus status) {
    switch (status) {
        case LpStatus::kOptimal: return "optimal";
        case LpStatus::kInfeasible: return "infeasible";
        case LpStatus::kUnbounded: return "unbounded";
        case LpStatus::kIterationLimit: return "iteration_limit";
    }
    return "unknown";
}

}  // namespace pomdp
