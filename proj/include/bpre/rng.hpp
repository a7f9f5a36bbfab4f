#ifndef BPRE_RNG_HPP
#define BPRE_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace bpre {

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stream derivation: (master seed, replica index, salt) -> independent seed.
inline uint64_t mix_seed(uint64_t master, uint64_t stream, uint64_t salt = 0) {
    uint64_t s = master;
    uint64_t a = splitmix64(s);
    s = a ^ (stream * 0x9e3779b97f4a7c15ULL);
    a = splitmix64(s);
    s = a ^ (salt + 0x632be59bd9b4e019ULL);
    return splitmix64(s);
}

// Seeded stream wrapper. mt19937_64 output is fully pinned by the standard,
// and uniform01 avoids std::uniform_real_distribution so draws are
// reproducible bit for bit.
struct Rng {
    std::mt19937_64 engine;

    explicit Rng(uint64_t seed) : engine(seed) {}

    uint64_t next_u64() { return engine(); }

    // uniform on [0,1) with 53 random bits
    double uniform01() { return static_cast<double>(engine() >> 11) * 0x1.0p-53; }
};

inline Rng derived_rng(uint64_t master, uint64_t replica, uint64_t salt = 0) {
    return Rng(mix_seed(master, replica, salt));
}

// Inverse-CDF draw over precomputed cumulative weights (last entry == 1).
inline int pick_index(const std::vector<double>& cumulative, double u) {
    int lo = 0;
    int hi = static_cast<int>(cumulative.size()) - 1;
    while (lo < hi) {
        const int mid = (lo + hi) / 2;
        if (u < cumulative[static_cast<size_t>(mid)])
            hi = mid;
        else
            lo = mid + 1;
    }
    return lo;
}

}  // namespace bpre

#endif
