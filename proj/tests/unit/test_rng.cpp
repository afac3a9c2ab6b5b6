#include <doctest.h>

#include <cmath>
#include <set>

#include "ftat/rng.hpp"

using ftat::Philox;

TEST_CASE("Philox4x32-10 known answer") {
  // Reference vector from the Random123 distribution (counter 0, key 0).
  const auto out = Philox::block({0, 0, 0, 0}, {0, 0});
  CHECK(out[0] == 0x6627e8d5u);
  CHECK(out[1] == 0xe169c58du);
  CHECK(out[2] == 0xbc57ac4cu);
  CHECK(out[3] == 0x9b00dbd8u);

  const auto ones = Philox::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                  {0xffffffffu, 0xffffffffu});
  CHECK(ones[0] == 0x408f276du);
  CHECK(ones[1] == 0x41c83b0eu);
  CHECK(ones[2] == 0xa20bc7c6u);
  CHECK(ones[3] == 0x6d5451fdu);
}

TEST_CASE("same seed and stream give the same sequence") {
  Philox a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
}

TEST_CASE("streams and substreams differ") {
  Philox a(42, 0), b(42, 1);
  CHECK(a.next_u64() != b.next_u64());
  Philox root(9, 0);
  Philox s0 = root.substream(0), s1 = root.substream(1);
  CHECK(s0.next_u64() != s1.next_u64());
  // Deriving a substream does not consume the parent.
  Philox fresh(9, 0);
  CHECK(root.next_u64() == fresh.next_u64());
}

TEST_CASE("uniform and normal moments") {
  Philox rng(1, 0);
  const int n = 200000;
  double su = 0.0, sn = 0.0, sn2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 0.01);
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("below stays in range and covers it") {
  Philox rng(2, 0);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto v = rng.below(7);
    REQUIRE(v < 7);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
  CHECK(rng.uniform_open() > 0.0);
}
