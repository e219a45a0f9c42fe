#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tsc {

// splitmix64 step; the workhorse for deriving independent stream seeds from
// (master seed, stream id...) tuples. Replica results are a function of the
// derived seed only, never of scheduling order.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a;
    std::uint64_t h = splitmix64(s);
    s ^= b + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
    return splitmix64(s);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d) {
    return mix_seed(mix_seed(a, b, c), d);
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t seed) {
    std::uint64_t s = seed;
    return Engine(splitmix64(s));
}

inline double uniform01(Engine& eng) {
    // 53-bit mantissa draw in [0,1)
    return (eng() >> 11) * 0x1.0p-53;
}

inline double exp_draw(Engine& eng, double rate) {
    double u;
    do {
        u = uniform01(eng);
    } while (u <= 0.0);
    return -std::log(u) / rate;
}

}  // namespace tsc
