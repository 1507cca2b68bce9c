#ifndef MTGP_RANDOM_HPP
#define MTGP_RANDOM_HPP

#include <cstdint>
#include <initializer_list>

namespace mtgp {

/// SplitMix64 finalizer.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Independent child seed for a named sub-stream, e.g.
/// derive_seed(seed, {kStreamNoise}) or derive_seed(seed, {n, replicate}).
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix64(seed);
    for (auto p : path) h = mix64(h ^ mix64(p + 0x632be59bd9b4e019ULL));
    return h;
}

}  // namespace mtgp

#endif  // MTGP_RANDOM_HPP
