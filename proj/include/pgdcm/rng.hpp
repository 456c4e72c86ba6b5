#ifndef PGDCM_RNG_HPP
#define PGDCM_RNG_HPP

#include <cstdint>
#include <random>
#include <string_view>

namespace pgdcm {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed of the named sub-stream `purpose`/`index` of a master seed. Streams
/// with different names or indices are statistically independent, so
/// replications and chains can run in any order and still reproduce.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose, std::uint64_t index = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (char c : purpose) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return splitmix64(splitmix64(master ^ h) + splitmix64(index + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t master, std::string_view purpose, std::uint64_t index = 0) {
    return Rng(derive_seed(master, purpose, index));
}

/// Uniform draw on [0, 1) with 53 random bits. Used instead of
/// std::uniform_real_distribution so results do not depend on the standard
/// library's implementation of that distribution.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace pgdcm

#endif
