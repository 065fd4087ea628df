#pragma once

// Deterministic random numbers with a fully specified bit stream.
// std::mt19937 would be reproducible, but the std distributions are not
// pinned down by the standard, so uniforms and normals are generated
// explicitly here. The engine is xoshiro256++ seeded through splitmix64;
// independent substreams are derived from (seed, tag, index) so replicate
// k always sees the same stream no matter how work is scheduled across
// threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

#include "gwsd/errors.hpp"

namespace gwsd {

// splitmix64 finalizer; also used to hash substream coordinates.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& w : state_)
            w = mix64(x++);
        if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0)
            state_[0] = 0x9E3779B97F4A7C15ull; // all-zero state is absorbing
    }

    // Stream for one unit of work. tag separates uses (cohort draw, stage
    // split, permutation, ...), index separates replicates within a use.
    static Rng substream(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
        std::uint64_t h = mix64(seed ^ 0x6A09E667F3BCC908ull);
        h = mix64(h ^ tag);
        h = mix64(h ^ index);
        return Rng(h);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform on [0,1) with 53 random bits.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) {
        return uniform() < p;
    }

    // Unbiased draw from {0, ..., n-1} (Lemire rejection).
    std::uint64_t below(std::uint64_t n) {
        if (n == 0)
            throw validation_error("Rng::below: n must be positive");
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold)
                return r % n;
        }
    }

    // Standard normal via Box-Muller (cosine branch), one value per call.
    double normal() {
        double u1 = uniform();
        if (u1 <= 0.0)
            u1 = 0x1.0p-53;
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    std::int64_t binomial(std::int64_t n, double p) {
        std::int64_t k = 0;
        for (std::int64_t i = 0; i < n; ++i)
            k += bernoulli(p);
        return k;
    }

    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            const std::uint64_t j = below(i);
            using std::swap;
            swap(first[i - 1], first[j]);
        }
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::array<std::uint64_t, 4> state_;
};

// Substream tags. Keeping them in one place guarantees distinct uses of
// the same user seed never collide.
namespace stream_tag {
inline constexpr std::uint64_t cohort = 1;
inline constexpr std::uint64_t stage_split = 2;
inline constexpr std::uint64_t mc_draw = 3;
inline constexpr std::uint64_t permutation = 4;
inline constexpr std::uint64_t pseudo_split = 5;
inline constexpr std::uint64_t risk_index = 6;
inline constexpr std::uint64_t subsample = 7;
} // namespace stream_tag

} // namespace gwsd
