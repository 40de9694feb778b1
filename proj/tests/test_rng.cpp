#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <set>

#include "coalflow/rng.hpp"

using namespace coalflow;

TEST_CASE("philox matches the published key-schedule vectors") {
    // Salmon et al. known-answer vectors for philox4x32-10
    Philox zero(0, 0);
    const std::uint32_t a = zero.next_u32();
    const std::uint32_t b = zero.next_u32();
    const std::uint32_t c = zero.next_u32();
    const std::uint32_t d = zero.next_u32();
    CHECK(a == 0x6627e8d5u);
    CHECK(b == 0xe169c58du);
    CHECK(c == 0xbc57ac4cu);
    CHECK(d == 0x9b00dbd8u);
}

TEST_CASE("splitmix64 reference value") {
    CHECK(detail::splitmix64(0) == 0xe220a8397b1dcdafULL);
}

TEST_CASE("same key and stream replay bit-identically") {
    Philox a(42, 7), b(42, 7);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct streams do not collide on prefixes") {
    std::set<std::uint64_t> firsts;
    for (std::uint64_t s = 0; s < 200; ++s) {
        Philox p(42, s);
        firsts.insert(p.next_u64());
    }
    CHECK(firsts.size() == 200);
}

TEST_CASE("replica and substream handles derive disjoint streams") {
    const RngStream base{9, 100};
    CHECK(base.replica(3).stream == 103);
    CHECK(base.replica(0).stream == base.stream);
    CHECK(base.substream(1).stream != base.substream(2).stream);
    CHECK(base.substream(1).stream == base.substream(1).stream);
    // substream family should not alias the replica family nearby
    for (std::uint64_t r = 0; r < 64; ++r)
        CHECK(base.substream(5).stream != base.replica(r).stream);
}

TEST_CASE("unit draws live in (0,1]") {
    Philox p(1, 2);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = p.next_unit();
        CHECK(u > 0.0);
        CHECK(u <= 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("normal draws have the right first moments") {
    Philox p(3, 4);
    const int n = 200000;
    double sum = 0.0, sum2 = 0.0, sum3 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = p.next_normal();
        sum += z;
        sum2 += z * z;
        sum3 += z * z * z;
    }
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    const double skew = sum3 / n;
    CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(skew) < 4.0 * std::sqrt(15.0 / n));
}

TEST_CASE("engine works as a UniformRandomBitGenerator") {
    CHECK(Philox::min() == 0);
    CHECK(Philox::max() == 0xffffffffu);
    Philox p(5, 6);
    Philox q(5, 6);
    CHECK(p() == q.next_u32());
}
