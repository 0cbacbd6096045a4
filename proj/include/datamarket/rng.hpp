#pragma once

// Deterministic randomness for the market simulator.
//
// Every stochastic component (noise replications, price sampling, permutation
// sampling) pulls from an Rng seeded through derive_seed, so a run is fully
// reproducible from one master seed. Distribution sampling is implemented
// here rather than with std::uniform_real_distribution and friends because
// the standard leaves their output implementation-defined; we need identical
// streams across compilers for golden-value tests.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace datamarket {

// SplitMix64 step. Used both as a stream generator for seed derivation and
// as the seed scrambler recommended for seeding other engines.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent child seed from a parent seed and up to three
// stream labels. Children with distinct labels get decorrelated streams;
// the same labels always reproduce the same child.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t s = seed;
    std::uint64_t z = splitmix64(s);
    s ^= a + 0x632be59bd9b4e019ULL;
    z ^= splitmix64(s);
    s ^= b + 0x2545f4914f6cdd1dULL;
    z ^= splitmix64(s);
    s ^= c + 0x9e3779b97f4a7c15ULL;
    z ^= splitmix64(s);
    return z;
}

// Engine wrapper with portable sampling helpers.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1): top 53 bits of the engine output.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Unbiased integer in [0, n) via 128-bit multiply rejection.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n == 0) return 0;
        while (true) {
            std::uint64_t x = next_u64();
            __uint128_t m = static_cast<__uint128_t>(x) * n;
            auto lo = static_cast<std::uint64_t>(m);
            if (lo >= n) return static_cast<std::uint64_t>(m >> 64);
            // Tail rejection keeps the distribution exact.
            std::uint64_t threshold = (0 - n) % n;
            if (lo >= threshold) return static_cast<std::uint64_t>(m >> 64);
        }
    }

    // Standard normal via the Marsaglia polar method with a cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform01() - 1.0;
            v = 2.0 * uniform01() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double scale = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * scale;
        has_spare_ = true;
        return u * scale;
    }

    // Fisher-Yates shuffle of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

  private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace datamarket
