#include "doctest.h"
#include "perc/rng.hpp"

#include <algorithm>

using namespace perc;

TEST_CASE("philox4x32-10 known-answer vectors") {
    // Reference vectors from the Random123 distribution.
    auto r0 = philox4x32({0, 0, 0, 0}, {0, 0});
    CHECK(r0[0] == 0x6627e8d5u);
    CHECK(r0[1] == 0xe169c58du);
    CHECK(r0[2] == 0xbc57ac4cu);
    CHECK(r0[3] == 0x9b00dbd8u);

    auto r1 = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu});
    CHECK(r1[0] == 0x408f276du);
    CHECK(r1[1] == 0x41c83b0eu);
    CHECK(r1[2] == 0xa20bc7c6u);
    CHECK(r1[3] == 0x6d5451fdu);
}

TEST_CASE("stateless draws are reproducible and stream-separated") {
    CHECK(item_u32(7, 3, kStreamSiteColor, 11) == item_u32(7, 3, kStreamSiteColor, 11));
    CHECK(item_u32(7, 3, kStreamSiteColor, 11) != item_u32(7, 3, kStreamSwBond, 11));
    CHECK(item_u32(7, 3, kStreamSiteColor, 11) != item_u32(8, 3, kStreamSiteColor, 11));
    CHECK(item_u32(7, 3, kStreamSiteColor, 11) != item_u32(7, 4, kStreamSiteColor, 11));

    CounterRng a(1, 2, 3), b(1, 2, 3);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform01 lies in [0,1) and covers the interval") {
    CounterRng r(42, 0, kStreamScratch);
    double mn = 1.0, mx = 0.0, sum = 0.0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        mn = std::min(mn, u);
        mx = std::max(mx, u);
        sum += u;
    }
    CHECK(mn < 0.01);
    CHECK(mx > 0.99);
    CHECK(sum / n == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("bernoulli threshold exact at 0, 1/2, 1") {
    CHECK(bernoulli_threshold(0.0) == 0);
    CHECK(bernoulli_threshold(1.0) == (uint64_t(1) << 32));
    CHECK(bernoulli_threshold(0.5) == (uint64_t(1) << 31));
}
