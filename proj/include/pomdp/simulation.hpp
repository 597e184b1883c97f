#pragma once

#include "pomdp/model.hpp"
#include "pomdp/rng.hpp"

#include <functional>
#include <vector>

namespace pomdp {

/// Observation and action record y_0..y_t, u_0..u_{t-1}, oldest first.
struct History {
    std::vector<int> obs;
    std::vector<int> acts;
};

/// Maps the information available at time t to an action. The rng argument
/// serves randomized rules; deterministic rules ignore it.
using ActionRule = std::function<int(const History&, Rng&)>;

inline ActionRule constant_action(int action) {
    return [action](const History&, Rng&) { return action; };
}

/// Independently randomized actions with the given probabilities.
inline ActionRule randomized_actions(Vector probabilities) {
    return [p = std::move(probabilities)](const History&, Rng& rng) { return rng.categorical(p); };
}

inline ActionRule uniform_actions(int n_actions) {
    return randomized_actions(Vector::Constant(n_actions, 1.0 / n_actions));
}

/// One step of the hidden chain.
inline int sample_next_state(const FinitePOMDP& m, int x, int u, Rng& rng) {
    return rng.categorical(m.kernel(u).row(x));
}

inline int sample_observation(const FinitePOMDP& m, int x, Rng& rng) {
    return rng.categorical(m.observation.row(x));
}

}  // namespace pomdp
