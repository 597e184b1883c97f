#include "pomdp/ergodicity.hpp"

#include "pomdp/contraction.hpp"
#include "pomdp/filter.hpp"
#include "pomdp/mdp.hpp"
#include "pomdp/parallel.hpp"
#include "pomdp/rng.hpp"
#include "pomdp/simulation.hpp"

#include <cmath>

namespace pomdp {

namespace {

void require_control_free(const FinitePOMDP& model, const char* who) {
    if (!is_control_free(model)) throw std::invalid_argument(std::string(who) + ": dynamics depend on the action");
}

}  // namespace

FilterTrajectory simulate_filter_chain(const FinitePOMDP& model, const Belief& prior, long horizon, std::uint64_t seed,
                                       std::uint64_t stream) {
    require_control_free(model, "simulate_filter_chain");
    if (horizon < 1) throw std::invalid_argument("simulate_filter_chain: T must be >= 1");
    if (prior.size() != model.n_states) throw std::invalid_argument("simulate_filter_chain: prior dimension mismatch");
    FilterTrajectory out;
    out.beliefs.reserve(static_cast<std::size_t>(horizon));
    Rng rng(seed, stream);
    int x = rng.categorical(model.prior);
    Belief pi;
    for (long t = 0; t < horizon; ++t) {
        if (t > 0) x = sample_next_state(model, x, 0, rng);
        const int y = sample_observation(model, x, rng);
        out.states.push_back(x);
        out.observations.push_back(y);
        if (out.impossible) continue;
        try {
            pi = t == 0 ? initial_posterior(model, prior, y) : filter_update(model, pi, 0, y);
            out.beliefs.push_back(pi);
        } catch (const ImpossibleObservation&) {
            out.impossible = true;
            out.impossible_step = t;
        }
    }
    return out;
}

BeliefHistogram::BeliefHistogram(std::shared_ptr<const BeliefGrid> grid)
    : grid_(std::move(grid)), counts_(grid_->size(), 0) {}

void BeliefHistogram::add(const Belief& belief) {
    ++counts_[static_cast<std::size_t>(grid_->quantize(belief))];
    ++total_;
}

void BeliefHistogram::merge(const BeliefHistogram& other) {
    if (other.counts_.size() != counts_.size()) throw std::invalid_argument("BeliefHistogram::merge: grid mismatch");
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    total_ += other.total_;
}

Vector BeliefHistogram::normalized() const {
    Vector p(static_cast<Eigen::Index>(counts_.size()));
    for (std::size_t i = 0; i < counts_.size(); ++i)
        p[static_cast<Eigen::Index>(i)] = total_ > 0 ? static_cast<double>(counts_[i]) / static_cast<double>(total_) : 0.0;
    return p;
}

int default_histogram_resolution(int n_states) {
    if (n_states <= 2) return 20;
    if (n_states == 3) return 8;
    return 4;
}

long default_ergodicity_burn_in(const FinitePOMDP& model, long horizon, double tol) {
    const double tau = stability_constants(model).birkhoff_tau;
    if (!(tau < 1.0)) return horizon / 10;
    if (tau <= 0.0) return 1;
    return std::max<long>(1, static_cast<long>(std::ceil(std::log(tol) / std::log(tau))));
}

UniqueErgodicityReport unique_ergodicity_test(const FinitePOMDP& model, const std::vector<Belief>& priors, long horizon,
                                              std::uint64_t seed, const UniqueErgodicityOptions& options) {
    require_control_free(model, "unique_ergodicity_test");
    if (priors.size() < 2) throw std::invalid_argument("unique_ergodicity_test: need at least two priors");
    UniqueErgodicityReport out;
    out.horizon = horizon;
    out.tol = options.tol;
    out.burn_in = options.burn_in >= 0 ? options.burn_in : default_ergodicity_burn_in(model, horizon, options.tol);
    if (horizon <= out.burn_in) throw std::invalid_argument("unique_ergodicity_test: T must exceed the burn-in");

    const SparseMatrix t = model.kernel(0).sparseView();
    const auto classes = closed_classes(t);
    out.closed_classes = static_cast<int>(classes.size());
    for (const auto& cls : classes)
        out.y_marginals.push_back(model.observation.transpose() * class_stationary_distribution(t, cls));
    out.y_marginal_unique = true;
    for (const Vector& m : out.y_marginals)
        if ((m - out.y_marginals.front()).lpNorm<1>() > 1e-12) out.y_marginal_unique = false;

    const int resolution = options.resolution > 0 ? options.resolution : default_histogram_resolution(model.n_states);
    auto grid = std::make_shared<const BeliefGrid>(build_belief_grid(model, resolution));
    const int k = static_cast<int>(priors.size());
    out.histograms.assign(static_cast<std::size_t>(k), BeliefHistogram(grid));
    out.impossible.assign(static_cast<std::size_t>(k), false);
    std::vector<char> impossible(static_cast<std::size_t>(k), 0);
    parallel_for(k, options.threads, [&](int i) {
        const FilterTrajectory traj = simulate_filter_chain(model, priors[static_cast<std::size_t>(i)], horizon, seed,
                                                            static_cast<std::uint64_t>(i));
        impossible[static_cast<std::size_t>(i)] = traj.impossible;
        for (std::size_t s = static_cast<std::size_t>(out.burn_in); s < traj.beliefs.size(); ++s)
            out.histograms[static_cast<std::size_t>(i)].add(traj.beliefs[s]);
    });
    for (int i = 0; i < k; ++i) out.impossible[static_cast<std::size_t>(i)] = impossible[static_cast<std::size_t>(i)] != 0;

    out.pairwise_tv = Matrix::Zero(k, k);
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) {
            const double d = total_variation(out.histograms[static_cast<std::size_t>(i)].normalized(),
                                             out.histograms[static_cast<std::size_t>(j)].normalized());
            out.pairwise_tv(i, j) = out.pairwise_tv(j, i) = d;
            out.max_tv = std::max(out.max_tv, d);
        }
    out.uniquely_ergodic = out.max_tv <= options.tol;
    out.verdict = out.uniquely_ergodic ? kUniquelyErgodic : kNotUniquelyErgodic;
    return out;
}

CsvTable histogram_csv(const UniqueErgodicityReport& report) {
    const BeliefGrid& grid = report.histograms.front().grid();
    std::vector<std::string> header{"bin"};
    for (int x = 0; x < grid.n_states(); ++x) header.push_back("p" + std::to_string(x));
    for (std::size_t i = 0; i < report.histograms.size(); ++i) header.push_back("count_prior" + std::to_string(i));
    CsvTable csv(header);
    for (std::size_t b = 0; b < grid.size(); ++b) {
        std::vector<double> row{static_cast<double>(b)};
        for (int x = 0; x < grid.n_states(); ++x) row.push_back(grid.point(b)[x]);
        for (const auto& h : report.histograms) row.push_back(static_cast<double>(h.counts()[b]));
        csv.add_row(row);
    }
    return csv;
}

Json ergodicity_summary(const UniqueErgodicityReport& r) {
    Json j;
    j["verdict"] = r.verdict;
    j["uniquely_ergodic"] = r.uniquely_ergodic;
    j["closed_classes"] = r.closed_classes;
    j["y_marginal_unique"] = r.y_marginal_unique;
    Json marginals = Json::array();
    for (const Vector& m : r.y_marginals) marginals.push_back(to_json(m));
    j["y_marginals"] = std::move(marginals);
    j["burn_in"] = r.burn_in;
    j["horizon"] = r.horizon;
    j["tol"] = r.tol;
    j["resolution"] = r.histograms.front().grid().resolution();
    j["pairwise_tv"] = to_json(r.pairwise_tv);
    j["max_tv"] = r.max_tv;
    j["impossible"] = r.impossible;
    return j;
}

MyopicResult myopic_policy_cost(const FinitePOMDP& model, long horizon, int replications, std::uint64_t seed,
                                const MyopicOptions& options) {
    require_control_free(model, "myopic_policy_cost");
    if (horizon <= options.burn_in || replications < 1)
        throw std::invalid_argument("myopic_policy_cost: need T > burn_in and at least one replication");
    const Belief prior = options.filter_prior.size() > 0 ? options.filter_prior : model.prior;
    const int A = model.n_actions;

    struct Rep {
        double realized = 0.0, filtered = 0.0;
        Vector constant, constant_filtered;
        long violations = 0;
    };
    std::vector<Rep> reps(static_cast<std::size_t>(replications));
    parallel_for(replications, options.threads, [&](int r) {
        Rep& rep = reps[static_cast<std::size_t>(r)];
        rep.constant = Vector::Zero(A);
        rep.constant_filtered = Vector::Zero(A);
        Rng rng(seed, static_cast<std::uint64_t>(r));
        int x = rng.categorical(model.prior);
        Belief pi = initial_posterior(model, prior, sample_observation(model, x, rng));
        for (long t = 0; t < horizon; ++t) {
            const Vector conditional = model.cost.transpose() * pi;
            const double best = conditional.minCoeff();
            int u = 0;
            while (conditional[u] > best + 1e-12 * std::max(1.0, std::abs(best))) ++u;
            for (int a = 0; a < A; ++a) {
                double direct = 0.0;
                for (int s = 0; s < model.n_states; ++s) direct += pi[s] * model.cost(s, a);
                if (direct < conditional[u] - 1e-12 * std::max(1.0, std::abs(best))) ++rep.violations;
            }
            if (t >= options.burn_in) {
                rep.realized += model.cost(x, u);
                rep.filtered += conditional[u];
                rep.constant += model.cost.row(x).transpose();
                rep.constant_filtered += conditional;
            }
            x = sample_next_state(model, x, u, rng);
            pi = filter_update(model, pi, u, sample_observation(model, x, rng));
        }
        const double n = static_cast<double>(horizon - options.burn_in);
        rep.realized /= n;
        rep.filtered /= n;
        rep.constant /= n;
        rep.constant_filtered /= n;
    });

    MyopicResult out;
    out.steps = (horizon - options.burn_in) * replications;
    out.constant_action_costs = Vector::Zero(A);
    out.constant_action_filtered = Vector::Zero(A);
    for (const Rep& rep : reps) {
        out.average_cost += rep.realized / replications;
        out.filtered_average += rep.filtered / replications;
        out.constant_action_costs += rep.constant / replications;
        out.constant_action_filtered += rep.constant_filtered / replications;
        out.certificate_violations += rep.violations;
    }
    if (replications > 1) {
        double var = 0.0;
        for (const Rep& rep : reps) var += (rep.realized - out.average_cost) * (rep.realized - out.average_cost);
        out.std_error = std::sqrt(var / (replications - 1) / replications);
    }
    return out;
}

Json to_json(const MyopicResult& r) {
    Json j;
    j["average_cost"] = r.average_cost;
    j["std_error"] = r.std_error;
    j["filtered_average"] = r.filtered_average;
    j["constant_action_costs"] = to_json(r.constant_action_costs);
    j["constant_action_filtered"] = to_json(r.constant_action_filtered);
    j["steps"] = r.steps;
    j["certificate_violations"] = r.certificate_violations;
    return j;
}

}  // namespace pomdp
