#pragma once

#include <cstdint>
#include <random>

namespace tcpd {

/// SplitMix64 step; also used to derive independent stream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Seed for stream `index` split off a master seed. Streams are
/// reproducible and independent of how work is distributed.
inline std::uint64_t stream_seed(std::uint64_t master, std::uint64_t index) {
    std::uint64_t s = master;
    std::uint64_t z = splitmix64(s);
    s = z ^ (index * 0xD6E8FEB86659FD93ULL + 0xA5A5A5A5A5A5A5A5ULL);
    return splitmix64(s);
}

/// mt19937_64 seeded via SplitMix64 so nearby seeds give unrelated states.
inline std::mt19937_64 make_engine(std::uint64_t seed) {
    std::uint64_t s = seed;
    return std::mt19937_64(splitmix64(s));
}

}  // namespace tcpd
