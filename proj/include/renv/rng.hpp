#pragma once

#include <cmath>
#include <cstdint>

// Counter-based random numbers.  Every draw is a pure function of
// (stream, counter), so refinement, replicas and workers can evaluate in any
// order or in parallel and still see identical values.

namespace renv::rng {

// SplitMix64 finalizer (full avalanche).
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

struct Stream {
    std::uint64_t hi = 0;
    std::uint64_t lo = 0;
};

constexpr Stream stream(std::uint64_t seed, std::uint64_t tag) {
    return {mix64(seed ^ mix64(tag ^ 0x6a09e667f3bcc909ull)),
            mix64(seed + 0x9e3779b97f4a7c15ull * (tag + 1))};
}

// Independent substream i of s; replica i of a run uses split(master, i).
constexpr Stream split(Stream s, std::uint64_t i) {
    return {mix64(s.hi ^ mix64(i + 0x243f6a8885a308d3ull)),
            mix64(s.lo + mix64(i ^ 0x13198a2e03707344ull))};
}

constexpr std::uint64_t bits(Stream s, std::uint64_t ctr) {
    return mix64(mix64(s.hi ^ mix64(ctr)) + s.lo);
}

// Uniform on (0,1); never returns 0 or 1.
inline double u01(Stream s, std::uint64_t ctr) {
    return static_cast<double>(bits(s, ctr) >> 11) * 0x1.0p-53 + 0x1.0p-54;
}

// Standard normal via Box-Muller; consumes counters 2*ctr and 2*ctr+1, so a
// stream must not mix normal() and u01() draws.
inline double normal(Stream s, std::uint64_t ctr) {
    const double u1 = u01(s, 2 * ctr);
    const double u2 = u01(s, 2 * ctr + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
}

}  // namespace renv::rng
