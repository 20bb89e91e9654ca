#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace latlab {

// Deterministic random source. std::mt19937 output is fully specified by the
// standard; the distributions layered on top here are hand-rolled so that a
// given seed produces the same stream on every platform and stdlib.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(static_cast<uint32_t>(seed ^ (seed >> 32))) {}

    uint32_t next_u32() { return engine_(); }

    // Uniform integer in [0, bound), bound > 0. Rejection sampling, no modulo bias.
    uint32_t below(uint32_t bound) {
        const uint32_t limit = UINT32_MAX - UINT32_MAX % bound;
        uint32_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    // Uniform in [0, 1) with 32 bits of precision.
    double uniform() { return engine_() * (1.0 / 4294967296.0); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller (no cached second value; keeps the
    // stream position a pure function of call count).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = below(static_cast<uint32_t>(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // n distinct indices drawn uniformly from [0, pool). Partial Fisher-Yates.
    std::vector<size_t> sample_indices(size_t pool, size_t n) {
        std::vector<size_t> idx(pool);
        for (size_t i = 0; i < pool; ++i) idx[i] = i;
        for (size_t i = 0; i < n && i + 1 < pool; ++i) {
            const size_t j = i + below(static_cast<uint32_t>(pool - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(n);
        return idx;
    }

private:
    std::mt19937 engine_;
};

}  // namespace latlab
