#pragma once
// Seed-derived random streams. Every consumer (pedestrian, conflict, spawner) draws from its own
// stream keyed by the scenario seed plus an identifying tuple, so results do not depend on call order.

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace pedsim {

using Rng = std::mt19937_64;

enum class StreamTag : std::uint64_t { Pedestrian = 1, Conflict = 2, Spawn = 3 };

inline Rng make_stream(std::uint64_t seed, StreamTag tag, std::initializer_list<std::uint64_t> key) {
    std::vector<std::uint32_t> words;
    auto push = [&](std::uint64_t v) {
        words.push_back(static_cast<std::uint32_t>(v));
        words.push_back(static_cast<std::uint32_t>(v >> 32));
    };
    push(seed);
    push(static_cast<std::uint64_t>(tag));
    for (auto k : key) push(k);
    std::seed_seq seq(words.begin(), words.end());
    return Rng(seq);
}

/// Uniform draw in [0, 1).
inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

/// Uniform integer in [0, n).
inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace pedsim
