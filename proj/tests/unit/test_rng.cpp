#include <doctest.h>

#include <cmath>

#include "pcrnn/rng.hpp"

using namespace pcrnn;

TEST_CASE("rng is deterministic per seed") {
  Rng a(123), b(123), c(124);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    const uint64_t x = a.next_u64();
    all_equal = all_equal && (x == b.next_u64());
    any_diff = any_diff || (x != c.next_u64());
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("state save and restore resumes the stream") {
  Rng rng(9);
  rng.next_u64();
  const uint64_t snap = rng.state();
  const double next = rng.next_unit();
  Rng resumed(0);
  resumed.set_state(snap);
  CHECK(resumed.next_unit() == next);
}

TEST_CASE("uniform stays inside bounds and fills them") {
  Rng rng(77);
  double lo = 1.0, hi = 0.0, sum = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform(-0.04, 0.04);
    REQUIRE(u >= -0.04);
    REQUIRE(u < 0.04);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    sum += u;
  }
  // mean of U(-r, r) has sd r/sqrt(3n); allow 4 sigma
  const double sigma = 0.04 / std::sqrt(3.0 * n);
  CHECK(std::abs(sum / n) < 4 * sigma);
  CHECK(lo < -0.039);
  CHECK(hi > 0.039);
}

TEST_CASE("seed zero is usable") {
  Rng rng(0);
  CHECK(rng.next_u64() != rng.next_u64());
}
