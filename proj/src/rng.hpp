#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace crx {

// Deterministic RNG used wherever the pipeline needs randomness.
// splitmix64 core with independent streams derived from (seed, stream id),
// so per-patient and per-tree work can run in parallel and still produce
// bit-identical results for a given master seed. No libc/std distributions
// are used; all mappings are fixed here.
class Rng {
public:
    explicit Rng(uint64_t state) : state_(state) {}

    // Independent stream for a worker identified by stream_id.
    static Rng stream(uint64_t seed, uint64_t stream_id) {
        return Rng(avalanche(seed + 0x9E3779B97F4A7C15ull * (stream_id + 1)));
    }

    uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ull;
        return avalanche(state_);
    }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform in [0, n) without modulo bias (Lemire).
    uint64_t bounded(uint64_t n) {
        if (n <= 1) return 0;
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        auto lo = static_cast<uint64_t>(m);
        if (lo < n) {
            const uint64_t t = (0 - n) % n;
            while (lo < t) {
                m = static_cast<unsigned __int128>(next_u64()) * n;
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<uint64_t>(m >> 64);
    }

    // Standard normal via Box-Muller; draws two uniforms per call.
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Knuth's method; fine for the small lambdas used here.
    int poisson(double lambda) {
        if (lambda <= 0.0) return 0;
        const double limit = std::exp(-lambda);
        int k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform01();
        } while (p > limit);
        return k - 1;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    std::vector<size_t> permutation(size_t n) {
        std::vector<size_t> p(n);
        for (size_t i = 0; i < n; ++i) p[i] = i;
        shuffle(p);
        return p;
    }

private:
    static uint64_t avalanche(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    uint64_t state_;
};

}  // namespace crx
