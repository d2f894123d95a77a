#include <cmath>
#include <numbers>

#include "doctest.h"

#include "brw/constants.hpp"
#include "brw/errors.hpp"

using namespace brw;

namespace {

const double kPiSq = std::numbers::pi * std::numbers::pi;

// Golden-section minimizer used as an independent oracle for the identity
// a_c = min_b (b + 3 pi^2 sigma^2 / (2 b^2)).
double golden_min(double lo, double hi, double sigma_sq) {
  const double k = 1.5 * kPiSq * sigma_sq;
  const auto f = [k](double b) { return b + k / (b * b); };
  const double phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  for (int i = 0; i < 200; ++i) {
    if (f(c) < f(d)) b = d; else a = c;
    c = b - phi * (b - a);
    d = a + phi * (b - a);
  }
  return f(0.5 * (a + b));
}

}  // namespace

TEST_CASE("critical drift closed form and homogeneity") {
  CHECK(a_critical(1.0) == doctest::Approx(4.640501589420204).epsilon(1e-14));
  CHECK(a_critical(8.0) == doctest::Approx(2 * a_critical(1.0)).epsilon(1e-14));
  CHECK(a_critical(2.0 / (3.0 * kPiSq)) ==
        doctest::Approx(1.5 * std::cbrt(2.0)).epsilon(1e-14));
  for (double s : {0.25, 1.0, 3.7})
    CHECK(a_critical(s) == doctest::Approx(golden_min(0.1, 10.0, s)).epsilon(1e-10));
  CHECK_THROWS_AS(a_critical(0.0), DomainError);
  CHECK_THROWS_AS(a_critical(-1.0), DomainError);
}

TEST_CASE("root pair of the drift cubic") {
  const auto r = b_roots(1.0, 6.0);
  REQUIRE(r.kind == BRoots::Kind::Pair);
  CHECK(r.b_small == doctest::Approx(1.9002845929289165).epsilon(1e-12));
  CHECK(r.b_a == doctest::Approx(5.512882772488188).epsilon(1e-12));

  const double two_thirds_ac = 2.0 * a_critical(1.0) / 3.0;
  CHECK(r.b_small < two_thirds_ac);
  CHECK(r.b_a > two_thirds_ac);

  // Residual bound applies to both roots.
  const double k = 1.5 * kPiSq;
  for (double b : {r.b_small, r.b_a})
    CHECK(std::abs(b * b * b - 6.0 * b * b + k) <= 1e-10 * 6.0);
}

TEST_CASE("root record collapses correctly below and at the threshold") {
  CHECK(b_roots(1.0, 4.0).kind == BRoots::Kind::None);
  const double ac = a_critical(1.0);
  const auto dbl = b_roots(1.0, ac);
  REQUIRE(dbl.kind == BRoots::Kind::DoubleRoot);
  CHECK(dbl.b_a == doctest::Approx(2.0 * ac / 3.0).epsilon(1e-14));
  CHECK(dbl.b_small == dbl.b_a);
  CHECK(b_roots(1.0, ac + 5e-10).kind == BRoots::Kind::DoubleRoot);
  CHECK_THROWS_AS(b_roots(1.0, -2.0), DomainError);
}

TEST_CASE("roots respect the variance scaling") {
  // b(sigma^2) scales like sigma^{2/3} jointly with a.
  const auto base = b_roots(1.0, 6.0);
  const auto scaled = b_roots(8.0, 2.0 * 6.0);
  REQUIRE(scaled.kind == BRoots::Kind::Pair);
  CHECK(scaled.b_a == doctest::Approx(2.0 * base.b_a).epsilon(1e-11));
  CHECK(scaled.b_small == doctest::Approx(2.0 * base.b_small).epsilon(1e-11));
}

TEST_CASE("fixed-point iteration converges to the upper root") {
  const auto seq = b_iteration(1.0, 6.0, 5.6, 60);
  REQUIRE_FALSE(seq.stopped_early);
  REQUIRE(seq.iterates.size() == 60);
  CHECK(seq.iterates.back() == doctest::Approx(5.512882772488188).epsilon(1e-8));

  const double ac = a_critical(1.0);
  const double fix = 2.0 * ac / 3.0;
  const auto crit_seq = b_iteration(1.0, ac, fix + 0.1, 50);
  REQUIRE_FALSE(crit_seq.stopped_early);
  CHECK(std::abs(crit_seq.iterates.back() - fix) < 0.1);
  // Approach is monotone from above.
  for (size_t i = 1; i < crit_seq.iterates.size(); ++i) {
    CHECK(crit_seq.iterates[i] <= crit_seq.iterates[i - 1] + 1e-14);
    CHECK(crit_seq.iterates[i] >= fix - 1e-12);
  }
}

TEST_CASE("fixed-point iteration flags the subcritical collapse") {
  const auto seq = b_iteration(1.0, 4.0, 3.0937, 50);
  CHECK(seq.stopped_early);
  REQUIRE_FALSE(seq.iterates.empty());
  CHECK(seq.iterates.back() <= 0.0);
  CHECK(seq.iterates.size() < 50);
  CHECK_THROWS_AS(b_iteration(1.0, 6.0, -1.0, 10), DomainError);
}

TEST_CASE("survival certificate threshold in the growth factor") {
  const double b = 2.0 * a_critical(1.0) / 3.0;
  // Frozen threshold: the certificate first turns negative at E = 36 for
  // a = 6, b = 2 a_c / 3 (cube of the closed-form ratio is 35.146).
  CHECK_FALSE(survival_certificate(1.0, 6.0, b, 35).negative);
  CHECK(survival_certificate(1.0, 6.0, b, 36).negative);
  // Once negative, larger growth factors stay negative.
  bool was_negative = false;
  for (int e = 2; e <= 200; ++e) {
    const bool neg = survival_certificate(1.0, 6.0, b, e).negative;
    if (was_negative) CHECK(neg);
    was_negative = neg;
  }
}

TEST_CASE("certificate can never be negative below the critical drift") {
  for (double a : {1.0, 3.0, 4.0, 4.6})
    for (double b : {0.5, 1.0, 2.0, 3.0937, 5.0})
      for (int e : {2, 4, 16, 64, 1024})
        CHECK_FALSE(survival_certificate(1.0, a, b, e).negative);
}

TEST_CASE("certificate argument guards") {
  CHECK_THROWS_AS(survival_certificate(1.0, 6.0, 0.0, 4), DomainError);
  CHECK_THROWS_AS(survival_certificate(1.0, 6.0, 3.0, 1), DomainError);
}
