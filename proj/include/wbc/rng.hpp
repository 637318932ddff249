#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace wbc {

/// splitmix64 step; advances `state` and returns the next mixed value.
/// Used only for seed derivation, never as the training stream itself.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a root seed and up to two stream
/// coordinates (e.g. (class, sample index) or (member index, epoch)). The
/// same inputs always yield the same seed, so work split across threads can
/// reproduce the serial result exactly.
inline std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0) {
    std::uint64_t s = root;
    s = splitmix64_next(s) ^ (0x9e3779b97f4a7c15ULL * (a + 1));
    s = splitmix64_next(s) ^ (0xc2b2ae3d27d4eb4fULL * (b + 1));
    return splitmix64_next(s);
}

/// Deterministic random stream with explicitly-implemented distributions.
/// std::mt19937_64 has a standard-specified engine algorithm, but the
/// standard distributions are implementation-defined, so uniform/normal/
/// bernoulli are realized here and produce identical sequences on every
/// platform and compiler.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    void reseed(std::uint64_t seed) { engine_.seed(seed); }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    bool bernoulli(double p) { return uniform() < p; }

    /// Standard normal via the Box-Muller transform (two uniforms per draw,
    /// no cached spare, so the consumption pattern is fixed).
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]; keeps log() finite
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Unbiased integer in [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t max = std::numeric_limits<std::uint64_t>::max();
        const std::uint64_t limit = max - max % n;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    int below_int(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

private:
    static constexpr double kTwoPi = 6.283185307179586476925286766559;
    std::mt19937_64 engine_;
};

/// Fisher-Yates shuffle driven by an RngStream (std::shuffle's draw pattern
/// is implementation-defined; this one is pinned).
template <typename T>
void shuffle(std::vector<T>& items, RngStream& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace wbc
