#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "hmcgap/rng.hpp"

using namespace hmcgap;

// Known-answer vectors from the Random123 distribution (kat_vectors, philox4x32_10).
TEST_CASE("philox known answers") {
    using A4 = std::array<std::uint32_t, 4>;
    using A2 = std::array<std::uint32_t, 2>;
    CHECK(philox4x32(A4{0, 0, 0, 0}, A2{0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
    CHECK(philox4x32(A4{0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, A2{0xffffffff, 0xffffffff}) ==
          A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
    CHECK(philox4x32(A4{0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, A2{0xa4093822, 0x299f31d0}) ==
          A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("streams are reproducible and independent of consumption order") {
    RandomStream a(42, 3, 17);
    std::vector<double> first;
    for (int i = 0; i < 10; ++i) first.push_back(a.normal());
    RandomStream other(42, 4, 17);
    for (int i = 0; i < 5; ++i) other.uniform();
    RandomStream b(42, 3, 17);
    for (int i = 0; i < 10; ++i) CHECK(b.normal() == first[static_cast<std::size_t>(i)]);
    RandomStream c(42, 3, 18);
    CHECK(c.normal() != first[0]);
}

TEST_CASE("uniform moments") {
    double s = 0.0, s2 = 0.0;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
        RandomStream r(7, 0, static_cast<std::uint64_t>(k));
        const double u = r.uniform();
        REQUIRE(u > 0.0);
        REQUIRE(u < 1.0);
        s += u;
        s2 += u * u;
    }
    CHECK(std::abs(s / n - 0.5) < 5.0 * std::sqrt(1.0 / 12.0 / n));
    CHECK(std::abs(s2 / n - 1.0 / 3.0) < 0.005);
}

TEST_CASE("normal moments") {
    RandomStream r(1, 0, 0);
    double s = 0.0, s2 = 0.0, s4 = 0.0;
    const int n = 400000;
    for (int k = 0; k < n; ++k) {
        const double z = r.normal();
        s += z;
        s2 += z * z;
        s4 += z * z * z * z;
    }
    CHECK(std::abs(s / n) < 5.0 / std::sqrt(n));
    CHECK(std::abs(s2 / n - 1.0) < 5.0 * std::sqrt(2.0 / n));
    CHECK(std::abs(s4 / n - 3.0) < 5.0 * std::sqrt(96.0 / n));
}
