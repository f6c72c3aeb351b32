#pragma once

#include <cstdint>
#include <random>

namespace ringcorr {

// mt19937_64 output is fixed by the standard, so seeded runs are reproducible
// across toolchains as long as only engine output is consumed directly.
using Rng = std::mt19937_64;

// Independent stream for worker `stream` under a run seed.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                      0x52434f52u};
    return Rng(seq);
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n), n > 0, by rejection (no modulo bias).
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t v;
    do { v = rng(); } while (v >= limit);
    return v % n;
}

} // namespace ringcorr
