#ifndef KEDFL_RNG_HPP
#define KEDFL_RNG_HPP

#include <cstdint>

namespace kedfl {

// splitmix64 finalizer
inline constexpr std::uint64_t mix64(std::uint64_t z)
{
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Counter-based uniform draw on [0, 1). The value depends only on
/// (seed, sample, stream), so concurrent sampling is reproducible
/// regardless of scheduling.
inline double uniform01(std::uint64_t seed, std::uint64_t sample, std::uint64_t stream)
{
    const std::uint64_t z = mix64(mix64(mix64(seed) ^ sample) ^ stream);
    return static_cast<double>(z >> 11) * 0x1.0p-53;
}

inline double uniform(std::uint64_t seed, std::uint64_t sample, std::uint64_t stream, double lo,
                      double hi)
{
    return lo + (hi - lo) * uniform01(seed, sample, stream);
}

}  // namespace kedfl

#endif
