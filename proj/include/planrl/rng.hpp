#pragma once

#include <cstdint>

namespace planrl {

// splitmix64; deterministic across platforms and standard libraries.
struct Rng {
    uint64_t state;

    explicit Rng(uint64_t seed) : state(seed + 0x9e3779b97f4a7c15ULL) {}

    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    int below(int n) { return (int)(next() % (uint64_t)n); }

    double uniform() { return (double)(next() >> 11) * 0x1.0p-53; }
};

} // namespace planrl
