#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "doctest.h"

#include "brw/rng.hpp"

using brw::RngStream;

TEST_CASE("streams are deterministic functions of (seed, stream_id)") {
  RngStream a(42, 7), b(42, 7);
  for (int i = 0; i < 1000; ++i) CHECK(a.bits() == b.bits());

  RngStream c(42, 8);
  int differs = 0;
  RngStream a2(42, 7);
  for (int i = 0; i < 64; ++i) differs += (a2.bits() != c.bits());
  CHECK(differs > 60);  // distinct streams decorrelate immediately
}

TEST_CASE("draw order does not leak across derived streams") {
  // Deriving the same tag twice gives identical child streams regardless of
  // how much the parent has been consumed.
  RngStream parent(9, 1);
  RngStream child_before = parent.derive(11);
  for (int i = 0; i < 37; ++i) parent.bits();
  RngStream child_after = parent.derive(11);
  for (int i = 0; i < 100; ++i) CHECK(child_before.bits() == child_after.bits());
}

TEST_CASE("uniform lands strictly inside the unit interval") {
  RngStream s(123, 0);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 200000; ++i) {
    const double u = s.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  CHECK(lo < 0.001);  // both tails actually visited
  CHECK(hi > 0.999);
}

TEST_CASE("uniform moments match the flat density") {
  RngStream s(2024, 3);
  const int n = 1 << 20;
  double sum = 0.0, sumsq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    sum += u;
    sumsq += u * u;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  // sd of the sample mean is (1/sqrt(12))/sqrt(n) ~ 2.8e-4
  CHECK(std::abs(mean - 0.5) < 4 * 0.2887 / std::sqrt(double(n)));
  CHECK(std::abs(var - 1.0 / 12.0) < 1e-3);
}

TEST_CASE("gaussian moments") {
  RngStream s(5, 5);
  const int n = 1 << 20;
  double sum = 0.0, sumsq = 0.0, sum4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = s.gaussian();
    sum += g;
    sumsq += g * g;
    sum4 += g * g * g * g;
  }
  const double mean = sum / n;
  const double var = sumsq / n - mean * mean;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
  CHECK(std::abs(var - 1.0) < 0.01);
  CHECK(std::abs(sum4 / n - 3.0) < 0.1);  // 4th moment pins the tail shape
}

TEST_CASE("poisson mean and variance at small and large intensity") {
  RngStream s(77, 1);
  for (double lambda : {0.3, 4.0, 80.0}) {
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      const double k = double(s.poisson(lambda));
      sum += k;
      sumsq += k * k;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    const double se_mean = std::sqrt(lambda / n);
    CHECK(std::abs(mean - lambda) < 5 * se_mean);
    CHECK(std::abs(var - lambda) < 0.05 * std::max(1.0, lambda));
  }
}

TEST_CASE("mix64 separates neighbouring keys") {
  std::set<uint64_t> seen;
  for (uint64_t a = 0; a < 64; ++a)
    for (uint64_t b = 0; b < 64; ++b) seen.insert(brw::mix64(a, b));
  CHECK(seen.size() == 64 * 64);
  CHECK(brw::mix64(1, 2) != brw::mix64(2, 1));  // order matters
}
