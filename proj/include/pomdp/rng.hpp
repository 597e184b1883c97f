#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>

namespace pomdp {

/// splitmix64 finalizer; used to derive stream keys.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/**
 * Counter-based generator: the i-th draw of stream (seed, stream) is a pure
 * function of (seed, stream, i). Replications keyed by index therefore see the
 * same numbers no matter how they are scheduled across threads.
 *
 * Sampling is implemented here rather than through <random> distributions so
 * the streams are identical across standard library implementations.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : key_(mix64(mix64(seed) ^ (stream * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL))) {}

    using result_type = std::uint64_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix64(key_ ^ mix64(counter_++)); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n).
    int below(int n) {
        if (n <= 0) throw std::invalid_argument("Rng::below: n must be positive");
        return static_cast<int>(uniform() * n);
    }

    /// Index drawn from a (not necessarily normalized) nonnegative weight vector.
    template <typename Weights>
    int categorical(const Weights& w) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < w.size(); ++i) total += w[i];
        const double r = uniform() * total;
        double acc = 0.0;
        int last_positive = -1;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            if (w[i] <= 0.0) continue;
            acc += w[i];
            last_positive = static_cast<int>(i);
            if (r < acc) return static_cast<int>(i);
        }
        if (last_positive < 0) throw std::invalid_argument("Rng::categorical: no positive weight");
        return last_positive;
    }

    /// Exponential(1) variate; used for Dirichlet(1,...,1) draws.
    double exponential() {
        double u = uniform();
        while (u <= 0.0) u = uniform();
        return -std::log(u);
    }

    /// Uniform draw from the probability simplex in R^n.
    Eigen::VectorXd dirichlet(int n) {
        Eigen::VectorXd w(n);
        for (int i = 0; i < n; ++i) w[i] = exponential();
        return w / w.sum();
    }

    std::uint64_t counter() const { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace pomdp
