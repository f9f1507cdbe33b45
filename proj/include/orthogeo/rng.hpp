#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace orthogeo {

namespace detail {

// SplitMix64 finalizer; used to derive well-separated engine seeds from
// (seed, stream) pairs.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

}  // namespace detail

// Deterministic random source. All distribution transforms are implemented
// here (rather than with std::*_distribution) so that identical seeds give
// identical streams on every standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(detail::splitmix64(seed)) {}

    // Independent substream: same seed + different stream id gives an
    // unrelated sequence. Used to decouple dataset, init, and shuffle draws.
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
        return Rng(detail::splitmix64(seed) ^ detail::splitmix64(0x5851f42d4c957f2dull * (stream_id + 1)));
    }

    std::uint64_t next_u64() { return gen_(); }

    // Uniform on the open interval (0, 1); never returns an exact 0 or 1,
    // which keeps log() and Box-Muller safe.
    double uniform() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1p-53; }

    // Standard normal via Box-Muller with a cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * 3.14159265358979323846 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Unbiased integer in [0, n) via rejection.
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x = gen_();
        while (x >= limit) x = gen_();
        return x % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::swap(items[i - 1], items[bounded(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace orthogeo
