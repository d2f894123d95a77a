#include <cmath>
#include <vector>

#include "doctest.h"

#include "brw/errors.hpp"
#include "brw/laws.hpp"
#include "brw/rng.hpp"
#include "test_support.hpp"

using namespace brw;
using namespace testlaw;

TEST_CASE("transform values at hand-checked points") {
  const LaplaceProfile one_child{OffspringLaw(one_child_pm_log2())};
  CHECK(one_child.phi(1.0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(one_child.phi(0.0, 0) == doctest::Approx(1.0).epsilon(1e-14));

  const LaplaceProfile pg{OffspringLaw(critical_pg())};
  CHECK(pg.phi(1.0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(pg.psi(1.0) == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(pg.phi(0.0, 0) == doctest::Approx(std::exp(0.5)).epsilon(1e-14));

  // Twins at log 2: two atoms, each weight e^{-t log 2}.
  const LaplaceProfile twins{OffspringLaw(twins_log2())};
  CHECK(twins.phi(1.0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(twins.phi(0.0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(twins.phi(1.0, 1) == doctest::Approx(-kLog2).epsilon(1e-13));
}

TEST_CASE("first derivative matches a central finite difference") {
  const double h = 1e-6;
  for (const OffspringLaw& law :
       {OffspringLaw(one_child_pm_log2()), OffspringLaw(mixed_three()),
        OffspringLaw(super_pg())}) {
    const LaplaceProfile p(law);
    for (double t : {0.3, 0.7, 1.2, 2.0}) {
      const double fd = (p.phi(t + h, 0) - p.phi(t - h, 0)) / (2 * h);
      CHECK(p.phi(t, 1) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("log-transform is convex along any grid") {
  const double h = 0.05;
  for (const OffspringLaw& law :
       {OffspringLaw(one_child_pm_log2()), OffspringLaw(mixed_three()),
        OffspringLaw(critical_pg()), OffspringLaw(super_pg())}) {
    const LaplaceProfile p(law);
    for (double t = 0.2; t < 3.0; t += 0.3) {
      const double dd = (p.psi(t - h) - 2 * p.psi(t) + p.psi(t + h)) / (h * h);
      CHECK(dd > -1e-9);
    }
  }
}

TEST_CASE("sampled outcomes reproduce the transform empirically") {
  // Mean of sum_children e^{-t x} over draws estimates Phi(t); the check is
  // at 4 standard errors, so a failure indicates bias rather than noise.
  RngStream stream(101, 0);
  const int n = 1000000;
  for (const OffspringLaw& law :
       {OffspringLaw(mixed_three()), OffspringLaw(critical_pg())}) {
    const LaplaceProfile p(law);
    for (double t : {0.0, 0.5, 1.0}) {
      double sum = 0.0, sumsq = 0.0;
      for (int i = 0; i < n; ++i) {
        double v = 0.0;
        for (double x : sample_offspring(law, stream)) v += std::exp(-t * x);
        sum += v;
        sumsq += v * v;
      }
      const double mean = sum / n;
      const double se = std::sqrt((sumsq / n - mean * mean) / n);
      CHECK(std::abs(mean - p.phi(t, 0)) < 4 * se + 1e-12);
    }
  }
}

TEST_CASE("sampling frequencies follow outcome probabilities") {
  RngStream stream(55, 1);
  const int n = 100000;
  int neg = 0;
  const OffspringLaw law{one_child_pm_log2()};
  for (int i = 0; i < n; ++i)
    if (sample_offspring(law, stream)[0] < 0) ++neg;
  const double se = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / n);
  CHECK(std::abs(double(neg) / n - 1.0 / 3.0) < 3 * se);

  const OffspringLaw twins{twins_log2()};
  for (int i = 0; i < 100; ++i) {
    const auto kids = sample_offspring(twins, stream);
    REQUIRE(kids.size() == 2);
    CHECK(kids[0] == doctest::Approx(kLog2));
  }

  const OffspringLaw pg{critical_pg()};
  double children = 0.0;
  for (int i = 0; i < n; ++i) children += double(sample_offspring(pg, stream).size());
  const double m = std::exp(0.5);
  CHECK(std::abs(children / n - m) < 3 * std::sqrt(m / n));
}

TEST_CASE("criticality report") {
  const auto crit = criticality_check(LaplaceProfile{OffspringLaw(critical_pg())});
  CHECK(crit.is_critical);
  CHECK(crit.sigma_sq == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_FALSE(crit.subcritical_population);

  const auto super_rep = criticality_check(LaplaceProfile{OffspringLaw(super_pg())});
  CHECK_FALSE(super_rep.is_critical);
  CHECK(super_rep.psi1 == doctest::Approx(std::log(2.0) + 0.5).epsilon(1e-13));

  // Twins: Psi(1) = 0 but Psi'(1) != 0, so not critical.
  const auto twins_rep = criticality_check(LaplaceProfile{OffspringLaw(twins_log2())});
  CHECK_FALSE(twins_rep.is_critical);
  CHECK(std::abs(twins_rep.dpsi1) == doctest::Approx(kLog2).epsilon(1e-12));

  const FiniteSupportLaw halving{{{0.5, {0.1}}, {0.5, {}}}};
  const auto sub = criticality_check(LaplaceProfile{OffspringLaw(halving)});
  CHECK(sub.subcritical_population);
}

TEST_CASE("support data of the intensity measure") {
  const LaplaceProfile dbl{OffspringLaw(
      FiniteSupportLaw{{{0.5, {-1.0}}, {0.5, {-1.0, -1.0}}}})};
  CHECK(dbl.x_min() == -1.0);
  CHECK(dbl.mass_at_x_min() == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(dbl.has_negative_steps());
  CHECK(std::isinf(dbl.zeta()));

  const LaplaceProfile pg{OffspringLaw(super_pg())};
  CHECK(std::isinf(pg.x_min()));
  CHECK(pg.x_min() < 0);
  CHECK(pg.mass_at_x_min() == 0.0);
  CHECK(pg.has_negative_steps());

  const LaplaceProfile pos{OffspringLaw(FiniteSupportLaw{{{1.0, {0.5, 1.5}}}})};
  CHECK_FALSE(pos.has_negative_steps());
  CHECK(pos.x_min() == 0.5);
}

TEST_CASE("enumeration is verbatim and rejects the sampled-only variant") {
  const OffspringLaw law{mixed_three()};
  const auto& outs = enumerate_outcomes(law);
  REQUIRE(outs.size() == 3);
  CHECK(outs[1].displacements.size() == 2);
  CHECK(outs[2].displacements.empty());
  CHECK_THROWS_AS(enumerate_outcomes(OffspringLaw{critical_pg()}),
                  UnsupportedLaw);
}

TEST_CASE("law validation rejects malformed input") {
  CHECK_THROWS_AS(validate_law(OffspringLaw{FiniteSupportLaw{
                      {{0.5, {1.0}}, {0.48, {2.0}}}}}),
                  DomainError);
  CHECK_THROWS_AS(validate_law(OffspringLaw{FiniteSupportLaw{{{0.0, {1.0}}}}}),
                  DomainError);
  CHECK_THROWS_AS(validate_law(OffspringLaw{FiniteSupportLaw{}}), DomainError);
  CHECK_THROWS_AS(validate_law(OffspringLaw{PoissonGaussianLaw{0.0, 0.0, 1.0}}),
                  DomainError);
  CHECK_THROWS_AS(validate_law(OffspringLaw{PoissonGaussianLaw{1.0, 0.0, -1.0}}),
                  DomainError);
}

TEST_CASE("transform domain is guarded") {
  const LaplaceProfile p{OffspringLaw(one_child_pm_log2())};
  CHECK_THROWS_AS(p.phi(-0.1, 0), DomainError);
  CHECK_THROWS_AS(p.phi(1.0, 3), DomainError);
}

TEST_CASE("closed-form profile registry") {
  const auto names = closed_form_profile_names();
  CHECK(names.size() == 5);
  CHECK_THROWS_AS(closed_form_profile("nonsense"), ConfigError);

  const auto p = LaplaceProfile::from_closed_form(closed_form_profile("pole"));
  CHECK(p.zeta() == 1.0);
  CHECK(p.phi(0.5, 0) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK(p.phi(0.5, 1) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(std::isinf(p.phi_at_zeta()));
  CHECK_THROWS_AS(p.phi(1.0, 0), DomainError);        // at the edge
  CHECK_THROWS_AS(criticality_check(p), DomainError);  // domain must pass 1

  // Law-backed profiles have no declared edge data.
  const LaplaceProfile lawp{OffspringLaw(critical_pg())};
  CHECK_THROWS_AS(lawp.phi_at_zeta(), DomainError);
}
