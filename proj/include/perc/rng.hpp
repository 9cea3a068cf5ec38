#pragma once

// Counter-based RNG (Philox4x32-10). Every random draw in the project is a
// pure function of (seed, sample_index, stream, draw_index), so parallel
// sampling is schedule-independent and bit-reproducible across runs and
// thread counts.

#include <array>
#include <cassert>
#include <cstdint>

namespace perc {

namespace detail {

inline void philox_round(std::array<uint32_t, 4>& ctr, std::array<uint32_t, 2>& key) {
    constexpr uint32_t M0 = 0xD2511F53u;
    constexpr uint32_t M1 = 0xCD9E8D57u;
    const uint64_t p0 = static_cast<uint64_t>(M0) * ctr[0];
    const uint64_t p1 = static_cast<uint64_t>(M1) * ctr[2];
    const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32), lo0 = static_cast<uint32_t>(p0);
    const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32), lo1 = static_cast<uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += 0x9E3779B9u;  // Weyl increments
    key[1] += 0xBB67AE85u;
}

}  // namespace detail

inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr, std::array<uint32_t, 2> key) {
    for (int r = 0; r < 10; ++r) detail::philox_round(ctr, key);
    return ctr;
}

// Draw layout: key carries the 64-bit seed; the 128-bit counter carries
// (draw, sample_index, stream). sample_index < 2^48 and stream < 2^16 keep
// the packing injective, which the asserts below enforce.
inline std::array<uint32_t, 4> philox_block(uint64_t seed, uint64_t sample_index, uint32_t stream, uint64_t draw) {
    assert(sample_index < (uint64_t(1) << 48));
    assert(stream < (1u << 16));
    std::array<uint32_t, 4> ctr = {
        static_cast<uint32_t>(draw),
        static_cast<uint32_t>(draw >> 32),
        static_cast<uint32_t>(sample_index),
        static_cast<uint32_t>(((sample_index >> 32) & 0xFFFFu) | (stream << 16)),
    };
    std::array<uint32_t, 2> key = {static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
    return philox4x32(ctr, key);
}

// Purpose tags; distinct streams never share draws.
enum RngStream : uint32_t {
    kStreamSiteColor = 1,
    kStreamSwInit = 2,
    kStreamSwBond = 3,
    kStreamSwSpin = 4,
    kStreamSwEmit = 5,
    kStreamClusterSign = 6,
    kStreamBootstrap = 7,
    kStreamScratch = 8,
};

// Sequential view over the counter space for code that wants a plain
// generator (bootstrap resampling, Metropolis-style decisions).
class CounterRng {
  public:
    CounterRng(uint64_t seed, uint64_t sample_index, uint32_t stream)
        : seed_(seed), sample_(sample_index), stream_(stream) {}

    uint32_t next_u32() {
        if (lane_ == 4) {
            buf_ = philox_block(seed_, sample_, stream_, draw_++);
            lane_ = 0;
        }
        return buf_[lane_++];
    }

    uint64_t next_u64() {
        const uint64_t lo = next_u32();
        const uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    // Uniform in [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Integer in [0, n) by rejection-free 64-bit scaling (bias < 2^-64).
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>((static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    bool bernoulli(double p) {
        if (p <= 0.0) return false;
        if (p >= 1.0) return true;
        return uniform01() < p;
    }

  private:
    uint64_t seed_, sample_;
    uint32_t stream_;
    uint64_t draw_ = 0;
    std::array<uint32_t, 4> buf_{};
    int lane_ = 4;
};

// Stateless per-item draws: item i always sees the same value no matter who
// evaluates it or in which order.
inline uint32_t item_u32(uint64_t seed, uint64_t sample_index, uint32_t stream, uint64_t item) {
    return philox_block(seed, sample_index, stream, item >> 2)[item & 3];
}

inline uint64_t item_u64(uint64_t seed, uint64_t sample_index, uint32_t stream, uint64_t item) {
    const auto b = philox_block(seed, sample_index, stream, item >> 1);
    const int lane = static_cast<int>(item & 1) * 2;
    return static_cast<uint64_t>(b[lane]) | (static_cast<uint64_t>(b[lane + 1]) << 32);
}

// Threshold for P(u32 < threshold) = p, exact at p = 0, 1/2, 1.
inline uint64_t bernoulli_threshold(double p) {
    if (p <= 0.0) return 0;
    if (p >= 1.0) return uint64_t(1) << 32;
    return static_cast<uint64_t>(p * 0x1.0p32);
}

}  // namespace perc
