#include "har/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using har::Rng;

TEST_CASE("philox known-answer blocks") {
    // Philox4x32-10 reference vectors (Random123 kat_vectors).
    const auto zero = Rng::block(0, 0, 0);
    CHECK(zero[0] == 0x6627e8d5u);
    CHECK(zero[1] == 0xe169c58du);
    CHECK(zero[2] == 0xbc57ac4cu);
    CHECK(zero[3] == 0x9b00dbd8u);
    const auto ones = Rng::block(~0ull, ~0ull, ~0ull);
    CHECK(ones[0] == 0x408f276du);
    CHECK(ones[1] == 0x41c83b0eu);
    CHECK(ones[2] == 0xa20bc7c6u);
    CHECK(ones[3] == 0x6d5451fdu);
}

TEST_CASE("streams are reproducible and distinct") {
    Rng a(42, 7), b(42, 7), c(42, 8);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
        const auto x = a.next_u32();
        CHECK(x == b.next_u32());
        differs |= x != c.next_u32();
    }
    CHECK(differs);
    const Rng root(5);
    CHECK(root.split(3).next_u64() == root.split(3).next_u64());
    CHECK(root.split(3).next_u64() != root.split(4).next_u64());
}

TEST_CASE("uniform, below and normal stay in range with sane moments") {
    Rng r(11);
    double s = 0.0, s2 = 0.0;
    constexpr int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        REQUIRE(r.below(7) < 7u);
        const double z = r.normal();
        s += z;
        s2 += z * z;
    }
    CHECK(std::abs(s / n) < 0.01);
    CHECK(std::abs(s2 / n - 1.0) < 0.02);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) seen.insert(r.below(5));
    CHECK(seen.size() == 5);
}
