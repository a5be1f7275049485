#pragma once

// Deterministic PRNG used for every source of randomness in the toolkit
// (init, dropout, word dropout, shuffling, synthetic data). xoshiro256**
// seeded through splitmix64; integer-only state transitions, so identical
// seeds give identical draw sequences on any platform. std:: distributions
// are implementation-defined and deliberately not used here.
//
// Stream splitting: every consumer derives its own child generator with
// derive(label) / derive(label, index) from one root seed. The label tree
// used by the pipeline is documented in the README.

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace lcmt {

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
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

class Rng {
  public:
    explicit Rng(uint64_t seed = 0) : seed_(seed) {
        uint64_t sm = seed;
        for (auto& word : state_) word = splitmix64(sm);
    }

    uint64_t seed() const { return seed_; }

    // child stream; independent of draws already made on the parent
    Rng derive(std::string_view label, uint64_t index = 0) const {
        uint64_t mix = seed_;
        uint64_t child = splitmix64(mix) ^ fnv1a64(label);
        child += index * 0x9e3779b97f4a7c15ULL;
        return Rng(child);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // [0, n), n >= 1; Lemire's multiply-shift, no modulo bias
    int uniform_int(int n) {
        auto bound = static_cast<uint64_t>(n);
        unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * bound;
        auto lo = static_cast<uint64_t>(m);
        if (lo < bound) {
            uint64_t threshold = (0 - bound) % bound;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next_u64()) * bound;
                lo = static_cast<uint64_t>(m);
            }
        }
        return static_cast<int>(m >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller from our own uniforms; pairs cached
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<uint64_t, 4> state_{};
    uint64_t seed_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace lcmt
