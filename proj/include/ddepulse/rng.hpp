#pragma once

// Deterministic uniform draws for the randomized property suites. The
// mt19937_64 stream is pinned by the standard, and the bit-to-double map
// below avoids std::uniform_real_distribution (whose output is
// implementation-defined), so a given seed reproduces identical draws on
// every platform.

#include <cstdint>
#include <random>

namespace ddepulse {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace ddepulse
