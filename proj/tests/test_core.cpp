#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "pbn/alias.hpp"
#include "pbn/bitstate.hpp"
#include "pbn/errors.hpp"
#include "pbn/rng.hpp"

using pbn::alias_table;
using pbn::state;

TEST_CASE("state bit access and chunk operations") {
  state s(130);
  CHECK(s.size() == 130);
  for (std::uint32_t i : {0u, 63u, 64u, 129u}) {
    CHECK_FALSE(s.test(i));
    s.set(i, true);
    CHECK(s.test(i));
  }
  s.set(64, false);
  CHECK_FALSE(s.test(64));

  SUBCASE("xor_chunk spanning a word boundary") {
    state a(130);
    a.xor_chunk(0xFFFFULL, 60);  // bits 60..75
    for (std::uint32_t i = 0; i < 130; ++i) CHECK(a.test(i) == (i >= 60 && i < 76));
    a.xor_chunk(0xFFFFULL, 60);
    for (std::uint32_t i = 0; i < 130; ++i) CHECK_FALSE(a.test(i));
  }

  SUBCASE("or_chunk at aligned and unaligned offsets") {
    state a(130);
    a.or_chunk(0b1011ULL, 0);
    a.or_chunk(0b11ULL, 127);
    CHECK(a.test(0));
    CHECK(a.test(1));
    CHECK_FALSE(a.test(2));
    CHECK(a.test(3));
    CHECK(a.test(127));
    CHECK(a.test(128));
    CHECK_FALSE(a.test(129));
  }

  SUBCASE("round trip through integers") {
    for (std::uint64_t v : {0ULL, 1ULL, 0b101101ULL, (1ULL << 63) | 5ULL}) {
      state a = state::from_uint(v, 64);
      CHECK(a.to_uint() == v);
    }
    CHECK(state::from_uint(0b111, 2).to_uint() == 0b11);  // masked to width
  }

  SUBCASE("xor_with and equality") {
    state a = state::from_uint(0b1100, 6);
    state b = state::from_uint(0b1010, 6);
    a.xor_with(b);
    CHECK(a == state::from_uint(0b0110, 6));
    a.swap(b);
    CHECK(a == state::from_uint(0b1010, 6));
  }
}

TEST_CASE("xoshiro256 determinism and range") {
  pbn::xoshiro256 a(12345), b(12345), c(54321);
  bool all_equal = true, any_diff_seed = false;
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t x = a.next_u64();
    all_equal = all_equal && (x == b.next_u64());
    any_diff_seed = any_diff_seed || (x != c.next_u64());
  }
  CHECK(all_equal);
  CHECK(any_diff_seed);

  pbn::xoshiro256 r(7);
  double mean = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = r.next_double();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    mean += u;
  }
  mean /= 100000.0;
  CHECK(std::abs(mean - 0.5) < 0.01);
}

TEST_CASE("alias table basics") {
  SUBCASE("size-1 table always returns 0") {
    const auto t = alias_table::build(std::vector<double>{1.0});
    CHECK(t.size() == 1);
    CHECK(t.next(0.0, 0.0) == 0);
    CHECK(t.next(0.999, 0.999) == 0);
  }

  SUBCASE("uniform pair splits evenly") {
    const auto t = alias_table::build(std::vector<double>{0.5, 0.5});
    const auto d = t.implied_distribution();
    CHECK(d[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(d[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(t.next(0.1, 0.0) == 0);
  }

  SUBCASE("fixed skewed distribution") {
    const auto t = alias_table::build(std::vector<double>{0.2, 0.3, 0.5});
    const auto d = t.implied_distribution();
    CHECK(std::abs(d[0] - 0.2) < 1e-12);
    CHECK(std::abs(d[1] - 0.3) < 1e-12);
    CHECK(std::abs(d[2] - 0.5) < 1e-12);
  }

  SUBCASE("invalid inputs rejected") {
    CHECK_THROWS_AS(alias_table::build(std::vector<double>{}), pbn::model_error);
    CHECK_THROWS_AS(alias_table::build(std::vector<double>{0.5, 0.4}), pbn::model_error);
    CHECK_THROWS_AS(alias_table::build(std::vector<double>{1.5, -0.5}), pbn::model_error);
  }
}

TEST_CASE("alias table implied distribution equals input for random distributions") {
  pbn::xoshiro256 rng(99);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.next_u64() % 64;
    std::vector<double> probs(n);
    double sum = 0.0;
    for (auto& p : probs) {
      p = rng.next_double() + 1e-6;
      sum += p;
    }
    for (auto& p : probs) p /= sum;
    const auto t = alias_table::build(probs);
    const auto d = t.implied_distribution();
    for (std::size_t i = 0; i < n; ++i) REQUIRE(std::abs(d[i] - probs[i]) <= 1e-12);
  }
}

TEST_CASE("alias sampling matches cell arithmetic") {
  const auto t = alias_table::build(std::vector<double>{0.1, 0.2, 0.7});
  // Exhaust each cell with coins on both sides of the cutoff.
  for (std::uint32_t i = 0; i < 3; ++i) {
    const double u1 = (i + 0.5) / 3.0;
    const double cut = t.cutoffs()[i];
    if (cut > 0.0) CHECK(t.next(u1, cut * 0.5) == i);
    if (cut < 1.0) CHECK(t.next(u1, cut + (1.0 - cut) * 0.5) == t.aliases()[i]);
  }
}
