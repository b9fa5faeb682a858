#pragma once

#include <cstdint>
#include <random>

namespace ndbc {

/// Independent random streams derived from the single run seed.
enum class Stream : std::uint32_t {
    InitialCondition = 1,
    BetaRestart = 2,
    Validation = 3,
};

/// Generator for (seed, stream, index): a seed_seq over the two 32-bit halves
/// of the seed, the stream tag and the index within the stream.
inline std::mt19937_64 stream_rng(std::uint64_t seed, Stream stream, std::uint32_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), index};
    return std::mt19937_64(seq);
}

}  // namespace ndbc
