#pragma once

// Deterministic randomness for replica-parallel experiments.
//
// One 64-bit master seed drives everything. A replica's stream is keyed by
// (master seed, stream tag, replica index) through a SplitMix64 mixing chain,
// so replica k can be regenerated in isolation and the result never depends
// on how replicas are scheduled across workers.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mcre {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Counter-based seed derivation: seed_k = mix(mix(mix(master) ^ tag) ^ index).
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                           std::uint64_t index) noexcept {
    return splitmix64(splitmix64(splitmix64(master) ^ tag) ^ index);
}

/// Well-known stream tags; distinct tags give statistically independent streams.
namespace stream_tag {
inline constexpr std::uint64_t uniforms = 0x55AA0001;
inline constexpr std::uint64_t environment = 0x55AA0002;
inline constexpr std::uint64_t innovations = 0x55AA0003;
inline constexpr std::uint64_t brownian = 0x55AA0004;
inline constexpr std::uint64_t direct = 0x55AA0005;
inline constexpr std::uint64_t correlation = 0x55AA0006;
}  // namespace stream_tag

class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

    RandomStream(std::uint64_t master, std::uint64_t tag, std::uint64_t index)
        : engine_(derive_seed(master, tag, index)) {}

    /// Uniform on the open interval (0,1): 53-bit midpoint lattice, never 0 or 1.
    double uniform() {
        return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Standard normal by Box-Muller. std::normal_distribution is
    /// implementation-defined, which would break cross-platform replay.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double radius = std::sqrt(-2.0 * std::log(uniform()));
        const double angle = 2.0 * std::numbers::pi * uniform();
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace mcre
