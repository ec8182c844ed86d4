#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace glmselect {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-derived seed: the same (master, stream, index) triple always yields
// the same engine state, independent of how work is scheduled.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream,
                                 std::uint64_t index) {
    return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index);
}

inline Engine make_engine(std::uint64_t master, std::uint64_t stream,
                          std::uint64_t index) {
    return Engine(derive_seed(master, stream, index));
}

// Uniform k-subset of {0, ..., p-1}, sorted ascending.
std::vector<int> random_subset(int p, int k, Engine& rng);

// Advances `c` to the next k-combination of {0..p-1} in lexicographic order.
// Returns false after the last combination.
bool next_combination(std::vector<int>& c, int p);

}  // namespace glmselect
