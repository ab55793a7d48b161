#include <cmath>
#include <set>
#include <vector>

#include "doctest.h"
#include "sdsm/rng.hpp"

using sdsm::Philox4x32;
using sdsm::RandomStream;

TEST_CASE("philox known-answer vectors") {
  // Random123 kat_vectors for philox4x32_10.
  auto zero = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
  CHECK(zero == Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
  auto ones = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                   {0xffffffffu, 0xffffffffu});
  CHECK(ones == Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
  auto pi = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                 {0xa4093822u, 0x299f31d0u});
  CHECK(pi == Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and distinct") {
  RandomStream a(42, 7), b(42, 7), c(42, 8), d(43, 7);
  std::vector<std::uint64_t> va, vb, vc, vd;
  for (int i = 0; i < 16; ++i) {
    va.push_back(a.next_u64());
    vb.push_back(b.next_u64());
    vc.push_back(c.next_u64());
    vd.push_back(d.next_u64());
  }
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(va != vd);

  RandomStream s1 = a.substream(3), s2 = b.substream(3), s3 = a.substream(4);
  CHECK(s1.normal() == s2.normal());
  CHECK(s1.next_u64() != s3.next_u64());
}

TEST_CASE("substream draws do not depend on earlier consumption") {
  RandomStream base(1, 2);
  RandomStream fresh = base.substream(10);
  double expected = fresh.uniform();
  for (int i = 0; i < 100; ++i) base.normal();
  CHECK(base.substream(10).uniform() == expected);
}

TEST_CASE("uniform and normal moments") {
  RandomStream rng(2024, 0);
  const int n = 200000;
  double su = 0, su2 = 0, sz = 0, sz2 = 0, sz4 = 0;
  for (int i = 0; i < n; ++i) {
    double u = rng.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    su += u;
    su2 += u * u;
    double z = rng.normal();
    sz += z;
    sz2 += z * z;
    sz4 += z * z * z * z;
  }
  // Oracles: U(0,1) mean 1/2 (sd 1/sqrt(12)); N(0,1) mean 0, variance 1
  // (sd of z^2 is sqrt(2)).
  CHECK(std::abs(su / n - 0.5) < 4.0 / std::sqrt(12.0 * n));
  CHECK(std::abs(sz / n) < 4.0 / std::sqrt(double(n)));
  CHECK(std::abs(sz2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(sz4 / n - 3.0) < 4.0 * std::sqrt(96.0 / n));
}

TEST_CASE("exponential and index draws") {
  RandomStream rng(9, 9);
  const int n = 100000;
  double s = 0;
  for (int i = 0; i < n; ++i) s += rng.exponential(2.0);
  CHECK(std::abs(s / n - 0.5) < 4.0 * 0.5 / std::sqrt(double(n)));

  std::vector<int> counts(5, 0);
  for (int i = 0; i < 50000; ++i) counts[rng.uniform_index(5)]++;
  for (int c : counts) CHECK(std::abs(c - 10000) < 4.0 * std::sqrt(50000 * 0.2 * 0.8));
}
