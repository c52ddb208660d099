#ifndef SMLSBM_RNG_HPP
#define SMLSBM_RNG_HPP

#include <cstdint>
#include <random>

namespace smlsbm {

// splitmix64 finalizer; used both to derive independent substream seeds and
// as a counter-based generator for edge sampling (one call per (layer,i,j)
// counter, so sampling order never affects the result).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a) {
    return splitmix64(seed ^ splitmix64(a));
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
    return splitmix64(mix_seed(seed, a) ^ splitmix64(b + 0x51ed270b0a9cf2adULL));
}

// Uniform double in [0,1) from the top 53 bits; avoids the
// implementation-defined behaviour of std::uniform_real_distribution.
inline double u64_to_unit(std::uint64_t x) {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

inline double next_unit(std::mt19937_64& g) { return u64_to_unit(g()); }

// Unbiased-enough index draw for small n (n << 2^64).
inline std::size_t next_index(std::mt19937_64& g, std::size_t n) {
    return static_cast<std::size_t>(g() % n);
}

}  // namespace smlsbm

#endif
