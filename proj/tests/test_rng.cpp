#include <doctest.h>

#include <cmath>
#include <vector>

#include "noisyhead/rng.hpp"

using namespace noisyhead;

TEST_CASE("identical stream addresses reproduce draws bit-exactly") {
  RngStream a(42, stream_id(7, 3));
  RngStream b(42, stream_id(7, 3));
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  RngStream c(42, stream_id(7, 3));
  RngStream d(42, stream_id(7, 3));
  for (int i = 0; i < 1000; ++i) {
    CHECK(c.normal() == d.normal());
  }
}

TEST_CASE("distinct stream ids decorrelate") {
  const int n = 100000;
  RngStream a(99, stream_id(1));
  RngStream b(99, stream_id(2));
  double sum_ab = 0, sum_a = 0, sum_b = 0, sum_a2 = 0, sum_b2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.normal();
    const double y = b.normal();
    sum_ab += x * y;
    sum_a += x;
    sum_b += y;
    sum_a2 += x * x;
    sum_b2 += y * y;
  }
  const double cov = sum_ab / n - (sum_a / n) * (sum_b / n);
  const double corr = cov / std::sqrt((sum_a2 / n) * (sum_b2 / n));
  // correlation estimate has SE ~ 1/sqrt(n) under independence
  CHECK(std::abs(corr) <= 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("normal sampler moments") {
  const int n = 100000;
  RngStream rng(7, stream_id(5));
  double sum = 0, sum_sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    sum += x;
    sum_sq += x * x;
  }
  const double mean = sum / n;
  const double var = (sum_sq - n * mean * mean) / (n - 1);
  CHECK(std::abs(mean) <= 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(std::abs(var - 1.0) <= 3.0 * std::sqrt(2.0 / (n - 1)));
}

TEST_CASE("uniform_below stays in range and is roughly uniform") {
  RngStream rng(3, stream_id(11));
  std::vector<int> counts(10, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto v = rng.uniform_below(10);
    REQUIRE(v < 10);
    ++counts[static_cast<std::size_t>(v)];
  }
  const double se = std::sqrt(0.1 * 0.9 / n);
  for (int c : counts) {
    CHECK(std::abs(static_cast<double>(c) / n - 0.1) <= 4 * se);
  }
}

TEST_CASE("uniform01 lies in [0,1)") {
  RngStream rng(8, stream_id(12));
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
