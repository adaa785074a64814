#pragma once

#include <cmath>
#include <cstdint>

namespace advlab {

// Counter-free splitmix64 generator. Streams are derived from (seed, id)
// pairs so every example / batch / purpose draws from its own generator and
// results do not depend on thread scheduling. The stream derivation is part
// of the reproducibility contract: identical (seed, id) always replays the
// same sequence.
struct Rng {
    uint64_t s;

    explicit Rng(uint64_t seed) : s(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

    static uint64_t mix(uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    static Rng stream(uint64_t seed, uint64_t id) {
        Rng r(seed);
        r.s = mix(r.s ^ mix(id + 0x632be59bd9b4e019ull));
        return r;
    }
    static Rng stream(uint64_t seed, uint64_t id, uint64_t sub) {
        return stream(mix(seed) ^ mix(id), sub);
    }

    uint64_t next() {
        s += 0x9e3779b97f4a7c15ull;
        uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return double(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; consumes exactly two draws per call.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Uniform integer in [0, n). Modulo bias is negligible for the small n
    // used here and keeps the draw count fixed.
    int uniform_int(int n) { return int(next() % uint64_t(n)); }

    // Fair coin as +-1.
    double sign() { return (next() & 1) ? 1.0 : -1.0; }
};

}  // namespace advlab
