#pragma once

#include <cstdint>

namespace mrd {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t hash_combine(uint64_t a, uint64_t b) {
    return splitmix64(a ^ (b + 0x9e3779b97f4a7c15ull + (a << 6) + (a >> 2)));
}

// PCG32 (O'Neill). Streams are derived from hashed counters so any worker
// can reconstruct the exact sample sequence of any pixel independently of
// scheduling.
class Pcg32 {
public:
    Pcg32() : state_(0x853c49e6748fea9bull), inc_(0xda3e39cb94b95bdbull) {}

    Pcg32(uint64_t initstate, uint64_t initseq) {
        state_ = 0u;
        inc_ = (initseq << 1u) | 1u;
        next_u32();
        state_ += initstate;
        next_u32();
    }

    uint32_t next_u32() {
        uint64_t old = state_;
        state_ = old * 6364136223846793005ull + inc_;
        uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
        uint32_t rot = static_cast<uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((~rot + 1u) & 31u));
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u32()) * (1.0 / 4294967296.0);
    }

private:
    uint64_t state_;
    uint64_t inc_;
};

// Deterministic per-(seed, a, b, c) stream; independent of thread count.
inline Pcg32 make_stream(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
    uint64_t h = splitmix64(seed);
    h = hash_combine(h, a);
    h = hash_combine(h, b);
    h = hash_combine(h, c);
    return Pcg32(h, splitmix64(h));
}

}  // namespace mrd
