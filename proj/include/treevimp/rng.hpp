#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace treevimp {

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Stream seed for sub-task `index` of a run seeded with `seed`. Documented
// contract: stream(seed, i) = mix64(mix64(seed) ^ mix64(i + 1)), so streams
// for distinct indices never coincide with the parent stream.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t index) {
    return mix64(mix64(seed) ^ mix64(index + 1));
}

// Seedable random stream. Wraps std::mt19937_64 (bit-reproducible across
// platforms per the standard) and supplies the few variate kinds the library
// needs, avoiding std distributions whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // Uniform double in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // Unbiased integer in [0, n); rejection sampling.
    std::uint64_t uniform_int(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

    bool coin() { return (gen_() >> 63) != 0; }

    // Standard normal via Box-Muller (fresh pair per call, no caching).
    double normal() {
        double u1;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Uniform random permutation of {0, ..., n-1} (Fisher-Yates).
    std::vector<std::size_t> permutation(std::size_t n) {
        std::vector<std::size_t> p(n);
        for (std::size_t i = 0; i < n; ++i) p[i] = i;
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(p[i - 1], p[j]);
        }
        return p;
    }

    // k distinct values from {0, ..., n-1}, ascending.
    std::vector<int> sample_without_replacement(int n, int k);

private:
    std::mt19937_64 gen_;
};

} // namespace treevimp
