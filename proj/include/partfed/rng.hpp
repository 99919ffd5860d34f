#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace partfed {

// All randomness in the project flows through this wrapper. std::mt19937_64
// is fully specified by the standard; the distribution transforms below are
// hand-rolled because the std ones are implementation-defined, and we freeze
// expected values in tests.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t next_u64() { return gen_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
    uint64_t below(uint64_t n) {
        if (n <= 1) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = gen_();
        while (v >= limit) v = gen_();
        return v % n;
    }

    // Standard normal via Box-Muller; consumes exactly two draws.
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 == 0.0) u1 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    // Fisher-Yates.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 gen_;
};

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives a stream seed from a base seed and up to three labels. Used to give
// every (agent, round) training run its own reproducible stream.
inline uint64_t mix_seed(uint64_t base, uint64_t a = 0, uint64_t b = 0, uint64_t c = 0) {
    uint64_t s = splitmix64(base);
    s = splitmix64(s ^ a);
    s = splitmix64(s ^ b);
    s = splitmix64(s ^ c);
    return s;
}

}  // namespace partfed
