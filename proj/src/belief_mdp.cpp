#include "pomdp/belief_mdp.hpp"

#include "pomdp/distances.hpp"
#include "pomdp/rng.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace pomdp {

std::vector<WeightedBelief> belief_kernel(const FinitePOMDP& model, const Belief& belief, int action) {
    const Vector pred = predict_state(model, belief, action);
    const Vector h = model.observation.transpose() * pred;
    std::vector<WeightedBelief> out;
    for (int y = 0; y < model.n_obs; ++y) {
        if (!(h[y] >= kImpossibleObservationThreshold)) continue;
        out.push_back({bayes_correct(model, pred, y), h[y]});
    }
    return out;
}

double belief_distance(const FinitePOMDP& model, const Belief& p, const Belief& q) {
    if (is_discrete_metric(model.state_metric)) return wasserstein1_discrete(p, q);
    return wasserstein1(p, q, model.state_metric);
}

// ---------------------------------------------------------------------------
// BeliefGrid

double BeliefGrid::count(int n, int k) {
    // C(k + n - 1, n - 1) in floating point to detect overflow.
    double c = 1.0;
    for (int i = 1; i < n; ++i) c = c * (k + i) / i;
    return std::round(c);
}

BeliefGrid::BeliefGrid(int n_states, int resolution, Matrix metric, std::size_t cap)
    : n_states_(n_states), resolution_(resolution), metric_(std::move(metric)) {
    if (n_states < 1) throw std::invalid_argument("BeliefGrid: n_states must be positive");
    if (resolution < 1) throw std::invalid_argument("BeliefGrid: resolution must be >= 1");
    if (count(n_states, resolution) > static_cast<double>(cap))
        throw std::invalid_argument("BeliefGrid: grid size " + format_double(count(n_states, resolution)) +
                                    " exceeds cap " + std::to_string(cap));
    lattice_nearest_ = n_states <= 2 || is_discrete_metric(metric_);

    std::vector<int> comp(static_cast<std::size_t>(n_states), 0);
    const std::function<void(int, int)> rec = [&](int pos, int remaining) {
        if (pos == n_states - 1) {
            comp[static_cast<std::size_t>(pos)] = remaining;
            lookup_.emplace(comp, static_cast<long>(compositions_.size()));
            compositions_.push_back(comp);
            return;
        }
        for (int m = remaining; m >= 0; --m) {
            comp[static_cast<std::size_t>(pos)] = m;
            rec(pos + 1, remaining - m);
        }
    };
    rec(0, resolution);
    points_.reserve(compositions_.size());
    for (const auto& c : compositions_) {
        Belief b(n_states);
        for (int i = 0; i < n_states; ++i) b[i] = static_cast<double>(c[static_cast<std::size_t>(i)]) / resolution;
        points_.push_back(std::move(b));
    }
}

long BeliefGrid::index_of(const std::vector<int>& composition) const {
    const auto it = lookup_.find(composition);
    return it == lookup_.end() ? -1 : it->second;
}

int BeliefGrid::quantize(const Belief& p) const {
    if (p.size() != n_states_) throw std::invalid_argument("BeliefGrid::quantize: dimension mismatch");
    return lattice_nearest_ ? quantize_lattice(p) : quantize_search(p);
}

// Minimizes sum_i |k p_i - m_i| over compositions m of k (W1 is proportional
// to this for the discrete metric and for two states): floor everything, then
// hand the remaining units to the largest fractional parts. Among tied
// fractional parts the lowest coordinates win, which yields the lowest grid
// index under the descending lexicographic enumeration.
int BeliefGrid::quantize_lattice(const Belief& p) const {
    const int n = n_states_;
    const int k = resolution_;
    std::vector<int> m(static_cast<std::size_t>(n));
    std::vector<double> frac(static_cast<std::size_t>(n));
    int used = 0;
    for (int i = 0; i < n; ++i) {
        const double scaled = std::max(0.0, p[i]) * k;
        int f = static_cast<int>(std::floor(scaled + 1e-12));
        f = std::min(f, k);
        m[static_cast<std::size_t>(i)] = f;
        frac[static_cast<std::size_t>(i)] = std::max(0.0, scaled - f);
        used += f;
    }
    while (used > k) {
        // Only reachable through rounding on inputs summing to slightly above 1.
        int best = -1;
        for (int i = 0; i < n; ++i)
            if (m[static_cast<std::size_t>(i)] > 0 && (best < 0 || frac[static_cast<std::size_t>(i)] < frac[static_cast<std::size_t>(best)]))
                best = i;
        --m[static_cast<std::size_t>(best)];
        frac[static_cast<std::size_t>(best)] += 1.0;
        --used;
    }
    int remaining = k - used;
    if (remaining > 0) {
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
            const double fa = frac[static_cast<std::size_t>(a)], fb = frac[static_cast<std::size_t>(b)];
            if (std::abs(fa - fb) <= 1e-12) return a < b;
            return fa > fb;
        });
        const double threshold = frac[static_cast<std::size_t>(order[static_cast<std::size_t>(remaining - 1)])];
        // Definitely-in coordinates first, then tied ones by index.
        for (int i : order)
            if (remaining > 0 && frac[static_cast<std::size_t>(i)] > threshold + 1e-12) {
                ++m[static_cast<std::size_t>(i)];
                --remaining;
            }
        for (int i = 0; i < n && remaining > 0; ++i)
            if (std::abs(frac[static_cast<std::size_t>(i)] - threshold) <= 1e-12) {
                ++m[static_cast<std::size_t>(i)];
                --remaining;
            }
    }
    const long idx = index_of(m);
    if (idx < 0) throw std::logic_error("BeliefGrid::quantize: composition not on grid");
    return static_cast<int>(idx);
}

int BeliefGrid::quantize_search(const Belief& p) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < points_.size(); ++i) {
        const double d = wasserstein1(p, points_[i], metric_);
        if (d < best_d - 1e-12) {
            best_d = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

double BeliefGrid::covering_radius() const {
    const int n = n_states_;
    // Largest-remainder rounding leaves sum |k p - m| <= 2 r (n - r) / n with
    // r the number of rounded-up coordinates; maximized at r = n / 2.
    const double lo = std::floor(n / 2.0), hi = std::ceil(n / 2.0);
    const double l1 = 2.0 * lo * hi / n / resolution_;
    const double diameter = metric_.size() > 0 ? metric_.maxCoeff() : 0.0;
    return 0.5 * l1 * diameter;
}

BeliefGrid build_belief_grid(const FinitePOMDP& model, int resolution, std::size_t cap) {
    return BeliefGrid(model.n_states, resolution, model.state_metric, cap);
}

ControlledChain quantized_belief_chain(const FinitePOMDP& model, const BeliefGrid& grid) {
    const int n = static_cast<int>(grid.size());
    ControlledChain chain;
    chain.n_states = n;
    chain.n_actions = model.n_actions;
    chain.cost.resize(n, model.n_actions);
    for (int u = 0; u < model.n_actions; ++u) {
        std::vector<Eigen::Triplet<double>> trips;
        trips.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(model.n_obs));
        for (int g = 0; g < n; ++g) {
            const Belief& b = grid.point(static_cast<std::size_t>(g));
            chain.cost(g, u) = belief_cost(model, b, u);
            const auto succ = belief_kernel(model, b, u);
            double total = 0.0;
            for (const auto& s : succ) total += s.probability;
            for (const auto& s : succ) trips.emplace_back(g, grid.quantize(s.belief), s.probability / total);
        }
        SparseMatrix k(n, n);
        k.setFromTriplets(trips.begin(), trips.end());  // duplicates are summed
        chain.kernel.push_back(std::move(k));
    }
    return chain;
}

ValueTable solve_discounted_belief(const FinitePOMDP& model, const BeliefGrid& grid, double tol, int max_iterations) {
    const ControlledChain chain = quantized_belief_chain(model, grid);
    return discounted_value_iteration(chain, model.discount, tol, max_iterations);
}

double belief_value_at(const FinitePOMDP& model, const BeliefGrid& grid, const ValueTable& table, const Belief& belief) {
    double best = std::numeric_limits<double>::infinity();
    for (int u = 0; u < model.n_actions; ++u) {
        double q = belief_cost(model, belief, u);
        for (const auto& s : belief_kernel(model, belief, u))
            q += model.discount * s.probability * table.values[grid.quantize(s.belief)];
        best = std::min(best, q);
    }
    return best;
}

double belief_value_from_prior(const FinitePOMDP& model, const BeliefGrid& grid, const ValueTable& table) {
    const Vector py = model.observation.transpose() * model.prior;
    double v = 0.0;
    for (int y = 0; y < model.n_obs; ++y) {
        if (!(py[y] >= kImpossibleObservationThreshold)) continue;
        v += py[y] * belief_value_at(model, grid, table, initial_posterior(model, y));
    }
    return v;
}

AcoeResult solve_acoe(const FinitePOMDP& model, const BeliefGrid& grid, double tol, const AcoeOptions& options) {
    if (!(tol > 0.0)) throw std::invalid_argument("solve_acoe: tol must be positive");
    const ControlledChain chain = quantized_belief_chain(model, grid);
    AcoeResult out;
    out.K2 = stability_constants(model).K2;
    RelativeValueResult rvi = relative_value_iteration(chain, options.reference, tol, options.max_iterations);
    out.h = std::move(rvi.relative);
    out.rho_star = rvi.rho;
    out.span_history = std::move(rvi.span_history);
    out.status = rvi.converged ? AcoeStatus::kConverged : AcoeStatus::kNotConvergedWarning;
    // Rate over the strictly positive part of the span history.
    std::vector<double> tail;
    for (double s : out.span_history)
        if (s > 1e-15) tail.push_back(s);
    if (tail.size() >= 2) {
        std::vector<double> padded{0.0};
        padded.insert(padded.end(), tail.begin(), tail.end());
        const auto rate = fit_geometric_rate(padded);
        out.span_rate = rate ? *rate : 1.0;
    } else {
        out.span_rate = 0.0;
    }
    if (!rvi.converged && out.K2 < 1.0)
        throw ConvergenceError("ACOE relative value iteration did not converge although K2 < 1",
                               out.span_history.empty() ? 0.0 : out.span_history.back());
    return out;
}

double successor_distance(const FinitePOMDP& model, const Belief& z, const Belief& z_prime, int action) {
    const auto a = belief_kernel(model, z, action);
    const auto b = belief_kernel(model, z_prime, action);
    Vector p(static_cast<Eigen::Index>(a.size())), q(static_cast<Eigen::Index>(b.size()));
    Matrix ground(p.size(), q.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        p[static_cast<Eigen::Index>(i)] = a[i].probability;
        for (std::size_t j = 0; j < b.size(); ++j)
            ground(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = belief_distance(model, a[i].belief, b[j].belief);
    }
    for (std::size_t j = 0; j < b.size(); ++j) q[static_cast<Eigen::Index>(j)] = b[j].probability;
    return transport_cost(p, q, ground);
}

Belief sample_belief(int n, Rng& rng) {
    const double r = rng.uniform();
    Belief b = Belief::Zero(n);
    if (r < 0.1) {
        b[rng.below(n)] = 1.0;
        return b;
    }
    const bool sparse = r < 0.25 && n > 2;
    for (int i = 0; i < n; ++i) b[i] = (sparse && rng.uniform() < 0.5) ? 0.0 : rng.exponential();
    if (b.sum() <= 0.0) b[rng.below(n)] = 1.0;
    return b / b.sum();
}

ContractionReport check_wasserstein_contraction(const FinitePOMDP& model, int n_pairs, std::uint64_t seed) {
    if (n_pairs < 1) throw std::invalid_argument("check_wasserstein_contraction: n_pairs must be >= 1");
    ContractionReport report;
    report.pairs = n_pairs;
    report.K2 = stability_constants(model).K2;
    Rng rng(seed, 0x77317731);
    for (int i = 0; i < n_pairs; ++i) {
        const Belief z = sample_belief(model.n_states, rng);
        const Belief zp = (rng.uniform() < 0.05) ? z : sample_belief(model.n_states, rng);
        const int u = rng.below(model.n_actions);
        const double base = belief_distance(model, z, zp);
        const double lhs = successor_distance(model, z, zp, u);
        const double rhs = report.K2 * base;
        report.max_excess = std::max(report.max_excess, lhs - rhs);
        if (base > 1e-12) report.max_ratio = std::max(report.max_ratio, lhs / base);
        if (lhs > rhs + 1e-9) report.violations.push_back({z, zp, u, lhs, rhs});
    }
    return report;
}

CsvTable value_table_csv(const BeliefGrid& grid, const ValueTable& table) {
    std::vector<std::string> header;
    for (int i = 0; i < grid.n_states(); ++i) header.push_back("b" + std::to_string(i));
    header.push_back("value");
    header.push_back("action");
    CsvTable csv(header);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        std::vector<double> row;
        for (int i = 0; i < grid.n_states(); ++i) row.push_back(grid.point(g)[i]);
        row.push_back(table.values[static_cast<Eigen::Index>(g)]);
        row.push_back(table.policy[g]);
        csv.add_row(row);
    }
    return csv;
}

Json acoe_summary(const AcoeResult& r) {
    Json j;
    j["rho_star"] = r.rho_star;
    j["status"] = r.status == AcoeStatus::kConverged ? "converged" : "warning_not_converged";
    j["K2"] = r.K2;
    j["iterations"] = r.h.iterations;
    j["final_span"] = r.h.residual;
    j["span_rate"] = r.span_rate;
    j["span_history"] = r.span_history;
    return j;
}

Json to_json(const ContractionReport& r) {
    Json j;
    j["pairs"] = r.pairs;
    j["K2"] = r.K2;
    j["max_ratio"] = r.max_ratio;
    j["max_excess"] = r.max_excess;
    j["violation_count"] = r.violations.size();
    Json v = Json::array();
    for (const auto& x : r.violations) {
        Json e;
        e["z"] = to_json(x.z);
        e["z_prime"] = to_json(x.z_prime);
        e["action"] = x.action;
        e["lhs"] = x.lhs;
        e["rhs"] = x.rhs;
        v.push_back(e);
    }
    j["violations"] = v;
    return j;
}

}  // namespace pomdp
