#include "pomdp/mdp.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>

namespace pomdp {

void validate_chain(const ControlledChain& chain, double tol) {
    if (static_cast<int>(chain.kernel.size()) != chain.n_actions)
        throw ValidationError("chain: one kernel per action required");
    if (chain.cost.rows() != chain.n_states || chain.cost.cols() != chain.n_actions)
        throw ValidationError("chain: cost dimension mismatch");
    for (int u = 0; u < chain.n_actions; ++u) {
        const SparseMatrix& k = chain.kernel[static_cast<std::size_t>(u)];
        if (k.rows() != chain.n_states || k.cols() != chain.n_states) throw ValidationError("chain: kernel dimension mismatch");
        for (int s = 0; s < chain.n_states; ++s) {
            double sum = 0.0;
            for (SparseMatrix::InnerIterator it(k, s); it; ++it) {
                if (it.value() < 0.0) throw ValidationError("chain: negative transition probability");
                sum += it.value();
            }
            if (std::abs(sum - 1.0) > tol)
                throw ValidationError("chain: row " + std::to_string(s) + " of action " + std::to_string(u) +
                                      " sums to " + std::to_string(sum));
        }
    }
}

Matrix q_values(const ControlledChain& chain, const Vector& values, double discount) {
    Matrix q(chain.n_states, chain.n_actions);
    for (int u = 0; u < chain.n_actions; ++u)
        q.col(u) = chain.cost.col(u) + discount * (chain.kernel[static_cast<std::size_t>(u)] * values);
    return q;
}

std::vector<int> greedy_policy(const Matrix& q) {
    std::vector<int> policy(static_cast<std::size_t>(q.rows()), 0);
    for (Eigen::Index s = 0; s < q.rows(); ++s) {
        const double best = q.row(s).minCoeff();
        const double slack = 1e-12 * std::max(1.0, std::abs(best));
        for (Eigen::Index u = 0; u < q.cols(); ++u)
            if (q(s, u) <= best + slack) {
                policy[static_cast<std::size_t>(s)] = static_cast<int>(u);
                break;
            }
    }
    return policy;
}

ValueTable discounted_value_iteration(const ControlledChain& chain, double discount, double tol,
                                      int max_iterations) {
    if (!(tol > 0.0)) throw std::invalid_argument("value iteration: tol must be positive");
    const double stop = tol * (1.0 - discount) / (2.0 * discount);
    ValueTable out;
    out.values = Vector::Zero(chain.n_states);
    for (int it = 1; it <= max_iterations; ++it) {
        const Vector next = q_values(chain, out.values, discount).rowwise().minCoeff();
        out.residual = (next - out.values).lpNorm<Eigen::Infinity>();
        out.values = next;
        out.iterations = it;
        if (out.residual <= stop) {
            out.policy = greedy_policy(q_values(chain, out.values, discount));
            return out;
        }
    }
    throw ConvergenceError("value iteration did not converge", out.residual);
}

RelativeValueResult relative_value_iteration(const ControlledChain& chain, int reference, double tol,
                                             int max_iterations) {
    if (reference < 0 || reference >= chain.n_states) throw std::out_of_range("relative value iteration: bad reference");
    RelativeValueResult out;
    Vector h = Vector::Zero(chain.n_states);
    for (int it = 1; it <= max_iterations; ++it) {
        const Vector th = q_values(chain, h, 1.0).rowwise().minCoeff();
        const Vector diff = th - h;
        const double span = diff.maxCoeff() - diff.minCoeff();
        out.span_history.push_back(span);
        out.rho = 0.5 * (diff.maxCoeff() + diff.minCoeff());
        h = th - Vector::Constant(chain.n_states, th[reference]);
        out.relative.iterations = it;
        out.relative.residual = span;
        if (span <= tol) {
            out.converged = true;
            break;
        }
    }
    out.relative.values = h;
    out.relative.policy = greedy_policy(q_values(chain, h, 1.0));
    return out;
}

SparseMatrix policy_matrix(const ControlledChain& chain, const std::vector<int>& policy) {
    std::vector<Eigen::Triplet<double>> trips;
    for (int s = 0; s < chain.n_states; ++s) {
        const SparseMatrix& k = chain.kernel[static_cast<std::size_t>(policy[static_cast<std::size_t>(s)])];
        for (SparseMatrix::InnerIterator it(k, s); it; ++it) trips.emplace_back(s, static_cast<int>(it.col()), it.value());
    }
    SparseMatrix p(chain.n_states, chain.n_states);
    p.setFromTriplets(trips.begin(), trips.end());
    return p;
}

SparseMatrix policy_matrix(const ControlledChain& chain, const Matrix& randomized_policy) {
    std::vector<Eigen::Triplet<double>> trips;
    for (int s = 0; s < chain.n_states; ++s)
        for (int u = 0; u < chain.n_actions; ++u) {
            const double w = randomized_policy(s, u);
            if (w <= 0.0) continue;
            for (SparseMatrix::InnerIterator it(chain.kernel[static_cast<std::size_t>(u)], s); it; ++it)
                trips.emplace_back(s, static_cast<int>(it.col()), w * it.value());
        }
    SparseMatrix p(chain.n_states, chain.n_states);
    p.setFromTriplets(trips.begin(), trips.end());
    return p;
}

Vector policy_cost(const ControlledChain& chain, const std::vector<int>& policy) {
    Vector c(chain.n_states);
    for (int s = 0; s < chain.n_states; ++s) c[s] = chain.cost(s, policy[static_cast<std::size_t>(s)]);
    return c;
}

Vector evaluate_discounted(const ControlledChain& chain, const std::vector<int>& policy, double discount) {
    Eigen::SparseMatrix<double> a(chain.n_states, chain.n_states);
    a.setIdentity();
    a -= discount * Eigen::SparseMatrix<double>(policy_matrix(chain, policy));
    a.makeCompressed();
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw std::runtime_error("evaluate_discounted: factorization failed");
    return lu.solve(policy_cost(chain, policy));
}

std::vector<std::vector<int>> communicating_classes(const SparseMatrix& p) {
    // Iterative Tarjan; components come out in reverse topological order and
    // are then sorted by smallest member for determinism.
    const int n = static_cast<int>(p.rows());
    std::vector<int> index(n, -1), low(n, 0), stack;
    std::vector<bool> on_stack(n, false);
    std::vector<std::vector<int>> comps;
    int counter = 0;
    for (int root = 0; root < n; ++root) {
        if (index[root] >= 0) continue;
        std::vector<std::pair<int, SparseMatrix::InnerIterator>> work;
        auto open = [&](int v) {
            index[v] = low[v] = counter++;
            stack.push_back(v);
            on_stack[v] = true;
            work.emplace_back(v, SparseMatrix::InnerIterator(p, v));
        };
        open(root);
        while (!work.empty()) {
            auto& [v, it] = work.back();
            bool descended = false;
            for (; it; ++it) {
                if (it.value() <= 0.0) continue;
                const int w = static_cast<int>(it.col());
                if (index[w] < 0) {
                    ++it;
                    open(w);
                    descended = true;
                    break;
                }
                if (on_stack[w]) low[v] = std::min(low[v], index[w]);
            }
            if (descended) continue;
            const int done = v;
            work.pop_back();
            if (!work.empty()) low[work.back().first] = std::min(low[work.back().first], low[done]);
            if (low[done] == index[done]) {
                std::vector<int> comp;
                int w;
                do {
                    w = stack.back();
                    stack.pop_back();
                    on_stack[w] = false;
                    comp.push_back(w);
                } while (w != done);
                std::sort(comp.begin(), comp.end());
                comps.push_back(std::move(comp));
            }
        }
    }
    std::sort(comps.begin(), comps.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
    return comps;
}

std::vector<std::vector<int>> closed_classes(const SparseMatrix& p) {
    const auto comps = communicating_classes(p);
    std::vector<int> comp_of(static_cast<std::size_t>(p.rows()));
    for (std::size_t c = 0; c < comps.size(); ++c)
        for (int s : comps[c]) comp_of[static_cast<std::size_t>(s)] = static_cast<int>(c);
    std::vector<std::vector<int>> closed;
    for (std::size_t c = 0; c < comps.size(); ++c) {
        bool leaks = false;
        for (int s : comps[c]) {
            for (SparseMatrix::InnerIterator it(p, s); it && !leaks; ++it)
                if (it.value() > 0.0 && comp_of[static_cast<std::size_t>(it.col())] != static_cast<int>(c)) leaks = true;
            if (leaks) break;
        }
        if (!leaks) closed.push_back(comps[c]);
    }
    return closed;
}

Vector class_stationary_distribution(const SparseMatrix& p, const std::vector<int>& cls) {
    const int k = static_cast<int>(cls.size());
    std::vector<int> local(static_cast<std::size_t>(p.rows()), -1);
    for (int i = 0; i < k; ++i) local[static_cast<std::size_t>(cls[i])] = i;
    // Solve pi (P - I) = 0 with the last balance equation replaced by sum(pi) = 1.
    Eigen::SparseMatrix<double> a(k, k);
    std::vector<Eigen::Triplet<double>> trips;
    for (int i = 0; i < k; ++i) {
        for (SparseMatrix::InnerIterator it(p, cls[i]); it; ++it) {
            const int j = local[static_cast<std::size_t>(it.col())];
            if (j < 0 || j == k - 1) continue;
            trips.emplace_back(j, i, it.value());
        }
        if (i != k - 1) trips.emplace_back(i, i, -1.0);
        trips.emplace_back(k - 1, i, 1.0);
    }
    a.setFromTriplets(trips.begin(), trips.end());
    a.makeCompressed();
    Vector rhs = Vector::Zero(k);
    rhs[k - 1] = 1.0;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(a);
    if (lu.info() != Eigen::Success) throw std::runtime_error("class_stationary_distribution: singular system");
    const Vector local_pi = lu.solve(rhs);
    Vector pi = Vector::Zero(p.rows());
    for (int i = 0; i < k; ++i) pi[cls[i]] = std::max(0.0, local_pi[i]);
    return pi / pi.sum();
}

Vector cesaro_limit(const SparseMatrix& p, const Vector& initial) {
    const int n = static_cast<int>(p.rows());
    const auto classes = closed_classes(p);
    std::vector<int> class_of(static_cast<std::size_t>(n), -1);
    for (std::size_t c = 0; c < classes.size(); ++c)
        for (int s : classes[c]) class_of[static_cast<std::size_t>(s)] = static_cast<int>(c);
    std::vector<int> transient, local(static_cast<std::size_t>(n), -1);
    for (int s = 0; s < n; ++s)
        if (class_of[static_cast<std::size_t>(s)] < 0) {
            local[static_cast<std::size_t>(s)] = static_cast<int>(transient.size());
            transient.push_back(s);
        }
    Vector absorbed = Vector::Zero(static_cast<Eigen::Index>(classes.size()));
    for (int s = 0; s < n; ++s)
        if (class_of[static_cast<std::size_t>(s)] >= 0) absorbed[class_of[static_cast<std::size_t>(s)]] += initial[s];
    if (!transient.empty()) {
        // Expected visits to transient states: z = initial_T (I - P_TT)^{-1}.
        const int k = static_cast<int>(transient.size());
        Eigen::SparseMatrix<double> a(k, k);
        std::vector<Eigen::Triplet<double>> trips;
        Vector rhs(k);
        for (int i = 0; i < k; ++i) {
            rhs[i] = initial[transient[i]];
            trips.emplace_back(i, i, 1.0);
            for (SparseMatrix::InnerIterator it(p, transient[i]); it; ++it) {
                const int j = local[static_cast<std::size_t>(it.col())];
                if (j >= 0) trips.emplace_back(j, i, -it.value());
            }
        }
        a.setFromTriplets(trips.begin(), trips.end());
        a.makeCompressed();
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(a);
        if (lu.info() != Eigen::Success) throw std::runtime_error("cesaro_limit: singular transient system");
        const Vector z = lu.solve(rhs);
        for (int i = 0; i < k; ++i)
            for (SparseMatrix::InnerIterator it(p, transient[i]); it; ++it) {
                const int c = class_of[static_cast<std::size_t>(it.col())];
                if (c >= 0) absorbed[c] += z[i] * it.value();
            }
    }
    Vector out = Vector::Zero(n);
    for (std::size_t c = 0; c < classes.size(); ++c)
        if (absorbed[static_cast<Eigen::Index>(c)] > 0.0)
            out += absorbed[static_cast<Eigen::Index>(c)] * class_stationary_distribution(p, classes[c]);
    return out;
}

PolicyGain average_cost_of_policy(const SparseMatrix& p, const Vector& c) {
    const int n = static_cast<int>(p.rows());
    PolicyGain out;
    out.recurrent_classes = closed_classes(p);
    out.gain = Vector::Zero(n);
    std::vector<bool> recurrent(static_cast<std::size_t>(n), false);
    for (const auto& cls : out.recurrent_classes) {
        const Vector pi = class_stationary_distribution(p, cls);
        const double g = pi.dot(c);
        out.class_costs.push_back(g);
        for (int s : cls) {
            out.gain[s] = g;
            recurrent[static_cast<std::size_t>(s)] = true;
        }
    }
    // Transient states: g_T = P_TT g_T + P_TR g_R.
    std::vector<int> transient, local(static_cast<std::size_t>(n), -1);
    for (int s = 0; s < n; ++s)
        if (!recurrent[static_cast<std::size_t>(s)]) {
            local[static_cast<std::size_t>(s)] = static_cast<int>(transient.size());
            transient.push_back(s);
        }
    if (!transient.empty()) {
        const int k = static_cast<int>(transient.size());
        Eigen::SparseMatrix<double> a(k, k);
        std::vector<Eigen::Triplet<double>> trips;
        Vector rhs = Vector::Zero(k);
        for (int i = 0; i < k; ++i) {
            trips.emplace_back(i, i, 1.0);
            for (SparseMatrix::InnerIterator it(p, transient[i]); it; ++it) {
                const int j = local[static_cast<std::size_t>(it.col())];
                if (j >= 0) trips.emplace_back(i, j, -it.value());
                else rhs[i] += it.value() * out.gain[it.col()];
            }
        }
        a.setFromTriplets(trips.begin(), trips.end());
        a.makeCompressed();
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(a);
        const Vector g = lu.solve(rhs);
        for (int i = 0; i < k; ++i) out.gain[transient[i]] = g[i];
    }
    return out;
}

PolicyGain average_cost_of_policy(const ControlledChain& chain, const std::vector<int>& policy) {
    return average_cost_of_policy(policy_matrix(chain, policy), policy_cost(chain, policy));
}

}  // namespace pomdp
