#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <vector>

namespace judgeagg {

// All randomness in the library flows through these helpers. std::mt19937_64
// has a standard-specified output sequence, and the mappings below avoid the
// implementation-defined std::*_distribution classes, so a given seed yields
// the same draws on every standard library.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Combines a base seed with stream tags into a fresh 64-bit seed.
inline std::uint64_t mix_seed(std::uint64_t base, std::uint64_t tag_a, std::uint64_t tag_b = 0) {
    std::uint64_t s = base ^ 0x6a09e667f3bcc909ULL;
    splitmix64(s);
    s ^= tag_a * 0x9e3779b97f4a7c15ULL;
    splitmix64(s);
    s ^= tag_b * 0xc2b2ae3d27d4eb4fULL;
    return splitmix64(s);
}

inline std::uint64_t mix_seed(std::uint64_t base, std::string_view tag, std::uint64_t tag_b = 0) {
    return mix_seed(base, fnv1a64(tag), tag_b);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, bound) via multiply-shift; bound >= 1.
    std::uint64_t uniform_below(std::uint64_t bound) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
    }

    /// Uniform double in [0, 1) with 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller; draws two uniforms per call.
    double gaussian() {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double gaussian(double mean, double stddev) { return mean + stddev * gaussian(); }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace judgeagg
