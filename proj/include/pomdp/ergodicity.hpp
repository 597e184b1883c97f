#pragma once

#include "pomdp/belief_mdp.hpp"
#include "pomdp/model.hpp"
#include "pomdp/report.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace pomdp {

struct FilterTrajectory {
    std::vector<Belief> beliefs;   ///< pi_0 .. pi_{T-1}
    std::vector<int> states;
    std::vector<int> observations;
    bool impossible = false;       ///< an observation had zero probability under the filter
    long impossible_step = -1;     ///< beliefs stop before this step
};

/// Hidden chain from X_0 ~ model.prior, filter from `prior`. The path depends
/// only on (seed, stream), so two priors with the same seed see the same
/// observations. Requires action-independent dynamics; action 0 is applied.
FilterTrajectory simulate_filter_chain(const FinitePOMDP& model, const Belief& prior, long horizon, std::uint64_t seed,
                                       std::uint64_t stream = 0);

/// Counts of beliefs by nearest BeliefGrid point.
class BeliefHistogram {
public:
    explicit BeliefHistogram(std::shared_ptr<const BeliefGrid> grid);

    void add(const Belief& belief);
    void merge(const BeliefHistogram& other);

    const BeliefGrid& grid() const { return *grid_; }
    const std::vector<long>& counts() const { return counts_; }
    long total() const { return total_; }
    Vector normalized() const;

private:
    std::shared_ptr<const BeliefGrid> grid_;
    std::vector<long> counts_;
    long total_ = 0;
};

/// 20 for two states, 8 for three, 4 beyond.
int default_histogram_resolution(int n_states);

/// ceil(log(tol) / log(tau)) for the Birkhoff coefficient tau < 1, else T / 10.
long default_ergodicity_burn_in(const FinitePOMDP& model, long horizon, double tol);

struct UniqueErgodicityOptions {
    int resolution = 0;    ///< 0: default_histogram_resolution
    long burn_in = -1;     ///< negative: default_ergodicity_burn_in
    double tol = 0.05;     ///< on pairwise histogram total variation
    int threads = 1;
};

inline constexpr const char* kUniquelyErgodic = "uniquely ergodic (empirical)";
inline constexpr const char* kNotUniquelyErgodic = "not uniquely ergodic";

struct UniqueErgodicityReport {
    int closed_classes = 0;              ///< of the state chain
    std::vector<Vector> y_marginals;     ///< stationary observation law per closed class
    bool y_marginal_unique = false;
    long burn_in = 0;
    long horizon = 0;
    double tol = 0.0;
    std::vector<BeliefHistogram> histograms;
    std::vector<bool> impossible;        ///< per prior
    Matrix pairwise_tv;                  ///< sum |p - q| between normalized histograms
    double max_tv = 0.0;
    bool uniquely_ergodic = false;
    std::string verdict;
};

/// Prior i is simulated on substream i of `seed`.
UniqueErgodicityReport unique_ergodicity_test(const FinitePOMDP& model, const std::vector<Belief>& priors, long horizon,
                                              std::uint64_t seed, const UniqueErgodicityOptions& options = {});

CsvTable histogram_csv(const UniqueErgodicityReport& report);
Json ergodicity_summary(const UniqueErgodicityReport& report);

struct MyopicOptions {
    Belief filter_prior;   ///< empty: model.prior
    long burn_in = 0;      ///< steps excluded from the averages
    int threads = 1;
};

struct MyopicResult {
    double average_cost = 0.0;         ///< realized c(X_t, U_t)
    double std_error = 0.0;
    double filtered_average = 0.0;     ///< c~(pi_t, U_t)
    Vector constant_action_costs;      ///< realized averages of each constant policy on the same paths
    Vector constant_action_filtered;   ///< c~(pi_t, u) averages of each constant policy
    long steps = 0;
    long certificate_violations = 0;   ///< steps where some action had strictly smaller c~
};

/// U_t = argmin_u c~(pi_t, u) (lowest index on ties) on control-free dynamics.
/// Replication r uses substream r.
MyopicResult myopic_policy_cost(const FinitePOMDP& model, long horizon, int replications, std::uint64_t seed,
                                const MyopicOptions& options = {});

Json to_json(const MyopicResult& result);

}  // namespace pomdp
