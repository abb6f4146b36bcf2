#pragma once

// Named random substreams. Every random draw in the simulator comes from a
// generator derived from (config seed, stream, trial, index), so results do
// not depend on evaluation order or on which other streams were consumed.

#include <cstdint>
#include <random>

namespace mapx {

using Rng = std::mt19937_64;

enum class Stream : std::uint32_t {
    placement = 1,
    field = 2,
    fading = 3,
    noise = 4,
    training = 5,
    collection = 6,
    init = 7,
};

inline Rng make_rng(std::uint64_t seed, Stream stream, std::uint64_t trial = 0, std::uint64_t index = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(trial),
                      static_cast<std::uint32_t>(trial >> 32), static_cast<std::uint32_t>(index),
                      static_cast<std::uint32_t>(index >> 32)};
    return Rng(seq);
}

}  // namespace mapx
