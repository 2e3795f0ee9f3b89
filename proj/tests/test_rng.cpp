#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "br/rng.hpp"

TEST_CASE("splitmix64 reference stream") {
  br::SplitMix64 r(0);
  CHECK(r.next() == 0xe220a8397b1dcdafULL);
  CHECK(r.next() == 0x6e789e6aa1b965f4ULL);
  CHECK(r.next() == 0x06c45d188009454fULL);
}

TEST_CASE("uniform01 stays in [0, 1)") {
  br::SplitMix64 r(42);
  for (int i = 0; i < 10000; ++i) {
    const double u = r.uniform01();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
  }
}

TEST_CASE("below is in range and hits every value") {
  br::SplitMix64 r(5);
  std::vector<int> seen(7, 0);
  for (int i = 0; i < 7000; ++i) {
    const auto v = r.below(7);
    REQUIRE(v < 7);
    ++seen[v];
  }
  for (int c : seen) CHECK(c > 800);
  CHECK(r.below(1) == 0);
  CHECK(r.below(0) == 0);
}

TEST_CASE("derived seeds differ by stream name and root") {
  CHECK(br::derive_seed(1, "a") == br::derive_seed(1, "a"));
  CHECK(br::derive_seed(1, "a") != br::derive_seed(1, "b"));
  CHECK(br::derive_seed(1, "a") != br::derive_seed(2, "a"));
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> a(50);
  std::iota(a.begin(), a.end(), 0);
  std::vector<int> b(a.begin(), a.end());
  br::SplitMix64 r1(9), r2(9);
  br::shuffle(std::span<int>(a), r1);
  br::shuffle(std::span<int>(b), r2);
  CHECK(a == b);
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> ref(50);
  std::iota(ref.begin(), ref.end(), 0);
  CHECK(sorted == ref);
  CHECK(a != ref);
}
