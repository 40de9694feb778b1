// Counter-based random number generation: Philox4x32-10 keyed by (seed, stream).
// Every draw is a pure function of (seed, stream, counter), so replicas can be
// scheduled on any worker without changing the numbers they see.
#pragma once

#include <cstdint>
#include <cmath>
#include <numbers>

namespace coalflow {

namespace detail {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr void philox_round(std::uint32_t ctr[4], const std::uint32_t key[2]) {
    constexpr std::uint64_t mul_a = 0xD2511F53ULL;
    constexpr std::uint64_t mul_b = 0xCD9E8D57ULL;
    const std::uint64_t p0 = mul_a * ctr[0];
    const std::uint64_t p1 = mul_b * ctr[2];
    const std::uint32_t out0 = static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0];
    const std::uint32_t out1 = static_cast<std::uint32_t>(p1);
    const std::uint32_t out2 = static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1];
    const std::uint32_t out3 = static_cast<std::uint32_t>(p0);
    ctr[0] = out0;
    ctr[1] = out1;
    ctr[2] = out2;
    ctr[3] = out3;
}

} // namespace detail

// Philox4x32-10 block cipher run in counter mode (Salmon et al., SC'11).
// The 128-bit counter is split as (block_lo, block_hi, stream_lo, stream_hi),
// so distinct stream indices index disjoint counter blocks under the same key.
class Philox {
public:
    Philox(std::uint64_t seed, std::uint64_t stream)
        : key0_(static_cast<std::uint32_t>(seed)),
          key1_(static_cast<std::uint32_t>(seed >> 32)),
          stream_lo_(static_cast<std::uint32_t>(stream)),
          stream_hi_(static_cast<std::uint32_t>(stream >> 32)) {}

    std::uint32_t next_u32() {
        if (buf_pos_ == 4) refill();
        return buf_[buf_pos_++];
    }

    std::uint64_t next_u64() {
        const std::uint64_t lo = next_u32();
        const std::uint64_t hi = next_u32();
        return lo | (hi << 32);
    }

    // uniform on (0, 1], 53-bit resolution
    double next_unit() {
        const std::uint64_t bits = next_u64() >> 11;
        return static_cast<double>(bits + 1) * 0x1.0p-53;
    }

    // standard normal via Box-Muller; consumes two uniforms per pair
    double next_normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = next_unit();
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi_v<double> * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // UniformRandomBitGenerator interface
    using result_type = std::uint32_t;
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return 0xffffffffu; }
    result_type operator()() { return next_u32(); }

private:
    void refill() {
        std::uint32_t ctr[4] = {static_cast<std::uint32_t>(block_),
                                static_cast<std::uint32_t>(block_ >> 32),
                                stream_lo_, stream_hi_};
        std::uint32_t key[2] = {key0_, key1_};
        constexpr std::uint32_t bump0 = 0x9E3779B9u;
        constexpr std::uint32_t bump1 = 0xBB67AE85u;
        for (int round = 0; round < 10; ++round) {
            detail::philox_round(ctr, key);
            key[0] += bump0;
            key[1] += bump1;
        }
        buf_[0] = ctr[0];
        buf_[1] = ctr[1];
        buf_[2] = ctr[2];
        buf_[3] = ctr[3];
        buf_pos_ = 0;
        ++block_;
    }

    std::uint32_t key0_, key1_, stream_lo_, stream_hi_;
    std::uint64_t block_ = 0;
    std::uint32_t buf_[4] = {};
    int buf_pos_ = 4;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

// Handle naming one logical stream of randomness. Replica r of a loop uses
// replica(r); independent purposes inside one experiment derive disjoint
// stream families via substream(tag).
struct RngStream {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;

    Philox engine() const { return Philox(seed, stream); }

    RngStream replica(std::uint64_t r) const { return {seed, stream + r}; }

    RngStream substream(std::uint64_t tag) const {
        return {seed, detail::splitmix64(stream ^ detail::splitmix64(tag + 0x632be59bd9b4e019ULL))};
    }
};

} // namespace coalflow
