#include <cmath>
#include <numbers>

#include "doctest.h"

#include "brw/constants.hpp"
#include "brw/errors.hpp"
#include "brw/profile_ode.hpp"
#include "brw/rng.hpp"

using namespace brw;

namespace {

const double kPiSq = std::numbers::pi * std::numbers::pi;
const double kTMax0 = 2.0 / (3.0 * kPiSq);  // blow-down time at a = 0, s = 1

// a = 0 closed form: f(t) = (s^3 - (3 pi^2 sigma^2 / 2) t)^{1/3}.
double exact_a0(double u, double s) {
  return std::cbrt(s * s * s - 1.5 * kPiSq * u * u * u);
}

}  // namespace

TEST_CASE("zero-drift solution matches its closed form") {
  const auto sol = solve_profile(1.0, 0.0, 1.0, 1.0, 1e-10);
  REQUIRE(sol.blows_down());
  CHECK(sol.t_max() == doctest::Approx(kTMax0).epsilon(1e-9));
  CHECK(sol.residual_max <= 1e-10);

  for (double u : {0.05, 0.15, 0.25, 0.35, 0.40})
    CHECK(profile_value(sol, u) == doctest::Approx(exact_a0(u, 1.0)).epsilon(1e-8));

  // Grid invariants: strictly increasing u, positive h, upper envelope.
  for (size_t i = 1; i < sol.grid.size(); ++i) {
    CHECK(sol.grid[i] > sol.grid[i - 1]);
    CHECK(sol.values[i] > 0.0);
    CHECK(sol.values[i] <= sol.s + sol.a * sol.grid[i] + 1e-9);
  }
}

TEST_CASE("blow-down time closed form and cubic scaling in s") {
  const auto t1 = blow_down_time(1.0, 0.0, 1.0, 1e-8);
  REQUIRE(t1.has_value());
  CHECK(*t1 == doctest::Approx(kTMax0).epsilon(1e-8));

  const auto t2 = blow_down_time(1.0, 0.0, 2.0, 1e-8);
  REQUIRE(t2.has_value());
  CHECK(*t2 == doctest::Approx(8.0 * kTMax0).epsilon(1e-8));

  CHECK_FALSE(blow_down_time(1.0, 6.0, 1.0, 1e-8).has_value());
}

TEST_CASE("growth case converges to the upper cubic root") {
  const auto sol = solve_until_classified(1.0, 6.0, 1.0, 1e-9);
  REQUIRE(sol.grows());
  const double b = asymptotic_slope(sol);
  CHECK(b == doctest::Approx(5.512882772488188).epsilon(0.01));
  CHECK(sol.b_limit() == doctest::Approx(b).epsilon(1e-12));
  CHECK(sol.residual_max <= 1e-9 * (1.0 + sol.values.back()));
}

TEST_CASE("finite horizon below stabilization reports no verdict") {
  const auto sol = solve_profile(1.0, 4.64, 1.0, 10.0, 1e-8);
  CHECK(std::holds_alternative<Undetermined>(sol.classification));
  CHECK_THROWS_AS(asymptotic_slope(sol), DomainError);
}

TEST_CASE("rescaling is exact on the stored data") {
  const auto sol = solve_profile(1.0, 0.0, 1.0, 1.0, 1e-9);
  const auto same = rescale(sol, 1.0);
  CHECK(same.t_max() == sol.t_max());
  CHECK(same.values == sol.values);

  const auto eighth = rescale(sol, 8.0);
  CHECK(eighth.s == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(eighth.t_max() == doctest::Approx(sol.t_max() / 8.0).epsilon(1e-15));

  const auto grown = solve_until_classified(1.0, 6.0, 1.0, 1e-8);
  const auto grown_scaled = rescale(grown, 37.5);
  REQUIRE(grown_scaled.grows());
  CHECK(grown_scaled.b_limit() == grown.b_limit());
}

TEST_CASE("solve-then-rescale agrees with rescale-then-solve") {
  RngStream stream(2718, 0);
  for (int trial = 0; trial < 8; ++trial) {
    const double sigma_sq = 0.5 + 1.5 * stream.uniform();
    const double a = 6.0 * stream.uniform();
    const double s = 0.5 + stream.uniform();
    const double lambda = 0.25 + 4.0 * stream.uniform();
    const double tol = 1e-9;

    const double t_h = 0.2 * s * s * s / (1.5 * kPiSq * sigma_sq);  // safely pre-blow-down
    const auto direct = solve_profile(sigma_sq, a, s, t_h, tol);
    const auto scaled = rescale(direct, lambda);
    const auto resolved =
        solve_profile(sigma_sq, a, std::cbrt(1.0 / lambda) * s, t_h / lambda, tol);

    const double u_top = std::min(scaled.grid.back(), resolved.grid.back());
    for (int j = 1; j <= 7; ++j) {
      const double u = u_top * j / 7.0;
      CHECK(profile_value(scaled, u) ==
            doctest::Approx(profile_value(resolved, u)).epsilon(5 * tol));
    }
  }
}

TEST_CASE("solutions are pointwise monotone in the drift") {
  const double t_h = 0.04;  // inside every blow-down window used here
  const auto f2 = solve_profile(1.0, 2.0, 1.0, t_h, 1e-9);
  const auto f4 = solve_profile(1.0, 4.5, 1.0, t_h, 1e-9);
  const auto f6 = solve_profile(1.0, 6.0, 1.0, t_h, 1e-9);
  const double u_top = std::min({f2.grid.back(), f4.grid.back(), f6.grid.back()});
  for (int j = 0; j <= 10; ++j) {
    const double u = u_top * j / 10.0;
    const double v2 = profile_value(f2, u);
    const double v4 = profile_value(f4, u);
    const double v6 = profile_value(f6, u);
    CHECK(v2 <= v4 + 1e-9);
    CHECK(v4 <= v6 + 1e-9);
  }
}

TEST_CASE("dichotomy matches the sign of a - a_c near the threshold") {
  CHECK(solve_until_classified(1.0, 4.0, 1.0, 1e-9).blows_down());
  CHECK(solve_until_classified(1.0, 5.5, 1.0, 1e-9).grows());
}

TEST_CASE("pure cube-root solutions are tracked from a near-zero start") {
  // f_0(t) = b t^{1/3} solves the equation when a = b + 3 pi^2 sigma^2/(2 b^2);
  // starting at s = 1e-6 must track it to 1e-4 absolute through t in [0.1, 10].
  for (double b : {5.0, 6.666926849994755}) {
    const double a = b + 1.5 * kPiSq / (b * b);
    const auto sol = solve_profile(1.0, a, 1e-6, 10.0, 1e-10);
    for (double u : {0.4642, 1.0, 1.4422, 2.1544})
      CHECK(std::abs(profile_value(sol, u) - b * u) < 1e-4);
  }
}

TEST_CASE("argument guards") {
  CHECK_THROWS_AS(solve_profile(1.0, 0.0, 1.0, 1.0, 1e-3), DomainError);
  CHECK_THROWS_AS(solve_profile(1.0, 0.0, 1.0, 1.0, 1e-13), DomainError);
  CHECK_THROWS_AS(solve_profile(1.0, 0.0, -1.0, 1.0, 1e-9), DomainError);
  CHECK_THROWS_AS(solve_profile(1.0, -2.0, 1.0, 1.0, 1e-9), DomainError);
  CHECK_THROWS_AS(solve_profile(0.0, 0.0, 1.0, 1.0, 1e-9), DomainError);
  CHECK_THROWS_AS(extinction_rate(1.0, 4.8), DomainError);
  CHECK_THROWS_AS(rescale(solve_profile(1.0, 0.0, 1.0, 0.01, 1e-9), 0.0), DomainError);
}

TEST_CASE("fixed-point sweeps agree with the adaptive stepper on a short span") {
  const double t_small = 0.005;
  const auto pic = picard_profile(1.0, 3.0, 1.0, t_small, 2001, 60);
  const auto sol = solve_profile(1.0, 3.0, 1.0, t_small, 1e-10);
  REQUIRE(pic.size() == 2001);
  CHECK(pic.front().second == doctest::Approx(1.0).epsilon(1e-15));
  for (size_t i = 200; i < pic.size(); i += 400) {
    const auto [u, h] = pic[i];
    // Trapezoid prefix integrals are second order in the node spacing.
    CHECK(h == doctest::Approx(profile_value(sol, u)).epsilon(1e-7));
  }
  CHECK_THROWS_AS(picard_profile(1.0, 3.0, 1.0, 50.0, 200, 60), DomainError);
  CHECK_THROWS_AS(picard_profile(1.0, 3.0, 1.0, 0.005, 1, 60), DomainError);
}

TEST_CASE("extinction rate closed form, monotonicity, and homogeneity") {
  const double c0 = extinction_rate(1.0, 0.0, 1e-9);
  CHECK(c0 == doctest::Approx(std::cbrt(1.5 * kPiSq)).epsilon(1e-9));

  const double c4 = extinction_rate(1.0, 4.0, 1e-7);
  CHECK(c4 < c0);
  CHECK(c4 > 0.0);

  // c(sigma^2, 0) = sigma^{2/3} c(1, 0) by the closed form.
  const double c0_8 = extinction_rate(8.0, 0.0, 1e-9);
  CHECK(c0_8 == doctest::Approx(2.0 * c0).epsilon(1e-8));
}
