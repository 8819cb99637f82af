#pragma once

// Deterministic random streams. All sampling goes through Rng so that runs are
// reproducible bit-for-bit regardless of platform or standard library: the
// generator is splitmix64 and every distribution transform is owned here.
// Substreams are derived by hashing (seed, tag, index...) so parallel and
// serial schedules draw identical values.

#include <cmath>
#include <cstdint>

namespace ifm {

inline uint64_t splitmix64_next(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Hash-combine for substream derivation.
inline uint64_t mix_seed(uint64_t a, uint64_t b) {
    uint64_t s = a ^ (b + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2));
    return splitmix64_next(s);
}

template <typename... Rest>
uint64_t mix_seed(uint64_t a, uint64_t b, Rest... rest) {
    return mix_seed(mix_seed(a, b), static_cast<uint64_t>(rest)...);
}

class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {
        // decorrelate trivially related seeds
        splitmix64_next(state_);
    }

    uint64_t next_u64() { return splitmix64_next(state_); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // uniform in [lo, hi]
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        // rejection sampling to avoid modulo bias
        uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return lo + static_cast<int64_t>(v % span);
    }

    // standard normal, Box-Muller (uses both values)
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace ifm
