#pragma once

// Reference computations for the tests. Each one is written from the
// defining formula with plain loops and deliberately shares no code with the
// library routine it checks.

#include "pomdp/model.hpp"
#include "pomdp/rng.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <tuple>
#include <vector>

namespace oracle {

using pomdp::Matrix;
using pomdp::Vector;

/// P(X_t | y_{0:t}, u_{0:t-1}) by recursive enumeration of state paths.
/// Returns an empty vector when the history has zero probability.
inline Vector posterior_by_paths(const pomdp::FinitePOMDP& m, const std::vector<int>& obs, const std::vector<int>& acts) {
    const int n = m.n_states;
    Vector mass = Vector::Zero(n);
    std::function<void(std::size_t, int, double)> walk = [&](std::size_t k, int x, double p) {
        if (p == 0.0) return;
        if (k + 1 == obs.size()) {
            mass[x] += p;
            return;
        }
        for (int x2 = 0; x2 < n; ++x2)
            walk(k + 1, x2, p * m.transition[acts[k]](x, x2) * m.observation(x2, obs[k + 1]));
    };
    for (int x = 0; x < n; ++x) walk(0, x, m.prior[x] * m.observation(x, obs[0]));
    double z = mass.sum();
    if (z <= 0.0) return {};
    return mass / z;
}

/// Optimal average cost of a flat unichain MDP by relative value iteration on
/// the aperiodic transform (P + I) / 2, to a span change of 1e-13. `bias`
/// receives g = h / 2, which satisfies rho + g <= c(., u) + P_u g on the
/// original MDP.
inline double flat_relative_value_iteration(const std::vector<Matrix>& T, const Matrix& c, Vector* bias = nullptr) {
    const int n = static_cast<int>(c.rows());
    const int a = static_cast<int>(c.cols());
    Vector h = Vector::Zero(n);
    double rho = 0.0;
    for (int it = 0; it < 1000000; ++it) {
        Vector next(n);
        for (int x = 0; x < n; ++x) {
            double best = 1e300;
            for (int u = 0; u < a; ++u) best = std::min(best, c(x, u) + 0.5 * h[x] + 0.5 * T[u].row(x).dot(h));
            next[x] = best;
        }
        Vector diff = next - h;
        rho = next[0] - h[0];
        double span = diff.maxCoeff() - diff.minCoeff();
        h = next.array() - next[0];
        if (span < 1e-13) break;
    }
    if (bias) *bias = 0.5 * h;
    return rho;
}

/// Discounted optimal values of a flat MDP by Gauss-Jacobi value iteration
/// to a sup-norm change of 1e-14.
inline Vector flat_value_iteration(const std::vector<Matrix>& T, const Matrix& c, double beta,
                                   std::vector<int>* policy = nullptr) {
    const int n = static_cast<int>(c.rows());
    const int a = static_cast<int>(c.cols());
    Vector v = Vector::Zero(n);
    for (int it = 0; it < 100000; ++it) {
        Vector next(n);
        for (int x = 0; x < n; ++x) {
            double best = 1e300;
            for (int u = 0; u < a; ++u) {
                double q = c(x, u);
                for (int y = 0; y < n; ++y) q += beta * T[u](x, y) * v[y];
                best = std::min(best, q);
            }
            next[x] = best;
        }
        double change = (next - v).cwiseAbs().maxCoeff();
        v = next;
        if (change < 1e-14) break;
    }
    if (policy) {
        policy->assign(n, 0);
        for (int x = 0; x < n; ++x) {
            double best = 1e300;
            for (int u = 0; u < a; ++u) {
                double q = c(x, u);
                for (int y = 0; y < n; ++y) q += beta * T[u](x, y) * v[y];
                if (q < best - 1e-12) {
                    best = q;
                    (*policy)[x] = u;
                }
            }
        }
    }
    return v;
}

/// Reachability closure by Warshall's algorithm.
inline std::vector<std::vector<bool>> reachability(const Matrix& P) {
    const int n = static_cast<int>(P.rows());
    std::vector<std::vector<bool>> r(n, std::vector<bool>(n, false));
    for (int i = 0; i < n; ++i) {
        r[i][i] = true;
        for (int j = 0; j < n; ++j)
            if (P(i, j) > 0.0) r[i][j] = true;
    }
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            if (r[i][k])
                for (int j = 0; j < n; ++j)
                    if (r[k][j]) r[i][j] = true;
    return r;
}

/// Closed communicating classes: i is recurrent iff every j reachable from i
/// reaches i back.
inline std::vector<std::vector<int>> recurrent_classes(const Matrix& P) {
    const int n = static_cast<int>(P.rows());
    auto r = reachability(P);
    std::vector<bool> assigned(n, false);
    std::vector<std::vector<int>> classes;
    for (int i = 0; i < n; ++i) {
        if (assigned[i]) continue;
        bool recurrent = true;
        for (int j = 0; j < n; ++j)
            if (r[i][j] && !r[j][i]) recurrent = false;
        if (!recurrent) continue;
        std::vector<int> cls;
        for (int j = 0; j < n; ++j)
            if (r[i][j] && r[j][i]) {
                cls.push_back(j);
                assigned[j] = true;
            }
        classes.push_back(cls);
    }
    return classes;
}

/// Stationary law of the chain restricted to a closed class, by a dense
/// least-squares solve of pi (P - I) = 0, sum pi = 1.
inline Vector class_stationary(const Matrix& P, const std::vector<int>& cls) {
    const int k = static_cast<int>(cls.size());
    Matrix A(k + 1, k);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) A(j, i) = P(cls[i], cls[j]) - (i == j ? 1.0 : 0.0);
    A.row(k).setOnes();
    Vector b = Vector::Zero(k + 1);
    b[k] = 1.0;
    return A.colPivHouseholderQr().solve(b);
}

/// Long-run average costs of the recurrent classes of a stationary
/// deterministic policy on a flat controlled chain.
inline std::vector<double> class_gains(const std::vector<Matrix>& T, const Matrix& c, const std::vector<int>& policy) {
    const int n = static_cast<int>(c.rows());
    Matrix P(n, n);
    Vector cost(n);
    for (int x = 0; x < n; ++x) {
        P.row(x) = T[policy[x]].row(x);
        cost[x] = c(x, policy[x]);
    }
    std::vector<double> gains;
    for (const auto& cls : recurrent_classes(P)) {
        Vector pi = class_stationary(P, cls);
        double g = 0.0;
        for (std::size_t i = 0; i < cls.size(); ++i) g += pi[i] * cost[cls[i]];
        gains.push_back(g);
    }
    return gains;
}

/// Minimum over all deterministic stationary policies and recurrent classes
/// of the long-run average cost, by exhaustive enumeration.
inline double best_deterministic_gain(const std::vector<Matrix>& T, const Matrix& c, long* policies = nullptr,
                                      double* worst_violation = nullptr, double lp_value = 0.0) {
    const int n = static_cast<int>(c.rows());
    const int a = static_cast<int>(c.cols());
    std::vector<int> policy(n, 0);
    double best = 1e300;
    long count = 0;
    double violation = -1e300;
    while (true) {
        for (double g : class_gains(T, c, policy)) {
            best = std::min(best, g);
            violation = std::max(violation, lp_value - g);
        }
        ++count;
        int k = 0;
        while (k < n && ++policy[k] == a) policy[k++] = 0;
        if (k == n) break;
    }
    if (policies) *policies = count;
    if (worst_violation) *worst_violation = violation;
    return best;
}

/// Birkhoff coefficient tanh(Delta / 4) from the projective diameter
/// Delta = max log(A_ik A_jl / (A_il A_jk)).
inline double birkhoff_tanh(const Matrix& A) {
    double diam = 0.0;
    for (int i = 0; i < A.rows(); ++i)
        for (int j = 0; j < A.rows(); ++j)
            for (int k = 0; k < A.cols(); ++k)
                for (int l = 0; l < A.cols(); ++l) {
                    double num = A(i, k) * A(j, l), den = A(i, l) * A(j, k);
                    if (num == 0.0 && den == 0.0) continue;
                    if (num == 0.0 || den == 0.0) return 1.0;
                    diam = std::max(diam, std::log(num / den));
                }
    return std::tanh(diam / 4.0);
}

/// W1 on the line metric d(i, j) = |z_i - z_j| with sorted points z:
/// integral of the CDF difference.
inline double w1_line(const Vector& p, const Vector& q, const Vector& z) {
    double acc = 0.0, cdf = 0.0;
    for (int i = 0; i + 1 < p.size(); ++i) {
        cdf += p[i] - q[i];
        acc += std::abs(cdf) * (z[i + 1] - z[i]);
    }
    return acc;
}

/// Every composition of k into n nonnegative parts, normalized.
inline std::vector<Vector> simplex_lattice(int n, int k) {
    std::vector<Vector> out;
    std::vector<int> parts(n, 0);
    std::function<void(int, int)> rec = [&](int i, int left) {
        if (i == n - 1) {
            parts[i] = left;
            Vector v(n);
            for (int j = 0; j < n; ++j) v[j] = static_cast<double>(parts[j]) / k;
            out.push_back(v);
            return;
        }
        for (int c = left; c >= 0; --c) {
            parts[i] = c;
            rec(i + 1, left - c);
        }
    };
    rec(0, k);
    return out;
}

/// Random POMDP with some zero entries: Dirichlet rows with each entry
/// dropped with probability `sparsity` (at least one entry kept).
inline pomdp::FinitePOMDP sparse_random_model(int ns, int no, int na, double sparsity, std::uint64_t seed) {
    pomdp::Rng rng(seed, 0x6f7261);
    auto row = [&](int len) {
        Vector r(len);
        for (int i = 0; i < len; ++i) r[i] = rng.uniform() < sparsity ? 0.0 : rng.exponential();
        if (r.sum() == 0.0) r[rng.below(len)] = 1.0;
        return Vector(r / r.sum());
    };
    pomdp::FinitePOMDP m;
    m.n_states = ns;
    m.n_obs = no;
    m.n_actions = na;
    for (int u = 0; u < na; ++u) {
        Matrix t(ns, ns);
        for (int x = 0; x < ns; ++x) t.row(x) = row(ns).transpose();
        m.transition.push_back(t);
    }
    m.observation.resize(ns, no);
    for (int x = 0; x < ns; ++x) m.observation.row(x) = row(no).transpose();
    m.cost.resize(ns, na);
    for (int x = 0; x < ns; ++x)
        for (int u = 0; u < na; ++u) m.cost(x, u) = rng.uniform();
    m.discount = 0.9;
    m.prior = Vector::Constant(ns, 1.0 / ns);
    m.state_metric = pomdp::discrete_metric(ns);
    m.c_max = 1.0;
    return m;
}

/// Random flat MDP (transition tensor and costs), dense rows.
struct FlatMDP {
    std::vector<Matrix> T;
    Matrix c;
};

inline FlatMDP random_flat_mdp(int n, int a, std::uint64_t seed) {
    pomdp::Rng rng(seed, 0x666c6174);
    FlatMDP f;
    for (int u = 0; u < a; ++u) {
        Matrix t(n, n);
        for (int x = 0; x < n; ++x) {
            for (int y = 0; y < n; ++y) t(x, y) = rng.exponential();
            t.row(x) /= t.row(x).sum();
        }
        f.T.push_back(t);
    }
    f.c.resize(n, a);
    for (int x = 0; x < n; ++x)
        for (int u = 0; u < a; ++u) f.c(x, u) = rng.uniform();
    return f;
}

/// Discounted cost of an N-window policy on the true POMDP by forward
/// propagation of the law of (state, window) for `horizon` steps. Windows are
/// stored literally as (obs, acts) sequences, oldest first. `act` maps a
/// partial or full window to an action.
inline double window_policy_cost_forward(const pomdp::FinitePOMDP& m, int N,
                                         const std::function<int(const std::vector<int>&, const std::vector<int>&)>& act,
                                         int horizon) {
    using Key = std::tuple<int, std::vector<int>, std::vector<int>>;
    std::map<Key, double> law;
    for (int x = 0; x < m.n_states; ++x)
        for (int y = 0; y < m.n_obs; ++y) {
            double p = m.prior[x] * m.observation(x, y);
            if (p > 0.0) law[{x, {y}, {}}] += p;
        }
    double total = 0.0, disc = 1.0;
    for (int t = 0; t < horizon; ++t) {
        std::map<Key, double> next;
        for (const auto& [key, p] : law) {
            const auto& [x, obs, acts] = key;
            int u = act(obs, acts);
            total += disc * p * m.cost(x, u);
            for (int x2 = 0; x2 < m.n_states; ++x2) {
                double pt = m.transition[u](x, x2);
                if (pt == 0.0) continue;
                for (int y = 0; y < m.n_obs; ++y) {
                    double po = m.observation(x2, y);
                    if (po == 0.0) continue;
                    std::vector<int> o2 = obs, a2 = acts;
                    o2.push_back(y);
                    a2.push_back(u);
                    if (static_cast<int>(o2.size()) > N) {
                        o2.erase(o2.begin());
                        a2.erase(a2.begin());
                    }
                    next[{x2, o2, a2}] += p * pt * po;
                }
            }
        }
        law = std::move(next);
        disc *= m.discount;
    }
    return total;
}

/// Oldest-first interleaved index of a window: y0, then (i A + u) Y + y.
inline long window_index(const std::vector<int>& obs, const std::vector<int>& acts, int n_obs, int n_actions) {
    long idx = obs[0];
    for (std::size_t k = 1; k < obs.size(); ++k) idx = (idx * n_actions + acts[k - 1]) * n_obs + obs[k];
    return idx;
}

}  // namespace oracle
