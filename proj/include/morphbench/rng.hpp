#pragma once

#include <cmath>
#include <cstdint>

namespace morphbench {

// Deterministic random stream. A small value type so streams can be
// copied, forked per sample and compared across reruns. splitmix64
// underneath; all distributions are derived here rather than through
// <random> so the byte streams are stable across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection-free modulo is fine: n is small against 2^64.
        return n == 0 ? 0 : next_u64() % n;
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(uniform_index(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    double normal(double mean = 0.0, double sigma = 1.0) {
        // Box-Muller, no cached second value (keeps the stream position simple).
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sigma * r * std::cos(6.283185307179586476925286766559 * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Fisher-Yates over index vectors and similar containers.
    template <class Vec>
    void shuffle(Vec& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Independent child stream, e.g. one per sample.
    Rng fork(std::uint64_t salt) {
        std::uint64_t s = state_ ^ (salt * 0xd6e8feb86659fd93ull + 0xa5a5a5a5a5a5a5a5ull);
        Rng child(s);
        child.next_u64();
        return child;
    }

  private:
    std::uint64_t state_;
};

}  // namespace morphbench
