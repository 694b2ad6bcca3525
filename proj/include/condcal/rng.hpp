#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace condcal {

// Counter-based random streams. Every draw is a pure function of
// (seed, stream, index), so randomized predictions and simulation trials are
// reproducible under any evaluation order or thread count.
inline uint64_t splitmix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class CounterRng {
  public:
    explicit CounterRng(uint64_t seed) : seed_(seed) {}

    uint64_t bits(uint64_t stream, uint64_t index) const {
        uint64_t h = splitmix64(seed_ ^ 0x5851f42d4c957f2dULL);
        h = splitmix64(h ^ stream);
        return splitmix64(h ^ (index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
    }

    // Uniform on [0,1) with 53 random bits.
    double uniform01(uint64_t stream, uint64_t index) const {
        return static_cast<double>(bits(stream, index) >> 11) * 0x1.0p-53;
    }

    // Uniform on [lo, hi).
    double uniform(uint64_t stream, uint64_t index, double lo, double hi) const {
        return lo + (hi - lo) * uniform01(stream, index);
    }

    // Standard normal via Box-Muller; draw i consumes uniforms (2i, 2i+1).
    double normal(uint64_t stream, uint64_t index) const {
        double u1 = uniform01(stream, 2 * index);
        double u2 = uniform01(stream, 2 * index + 1);
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    uint64_t seed() const { return seed_; }

  private:
    uint64_t seed_;
};

}  // namespace condcal
