#include <cmath>
#include <string>
#include <variant>

#include "doctest.h"
#include "json.hpp"

#include "brw/artifacts.hpp"
#include "brw/config.hpp"
#include "brw/errors.hpp"
#include "test_support.hpp"

TEST_CASE("displacement expressions evaluate at parse time") {
  CHECK(brw::parse_displacement("0.25") == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(brw::parse_displacement("-1.5e-3") == doctest::Approx(-0.0015).epsilon(1e-15));
  CHECK(brw::parse_displacement("log(2)") ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(brw::parse_displacement("-log(2)") ==
        doctest::Approx(-std::log(2.0)).epsilon(1e-15));
  CHECK(brw::parse_displacement("sqrt(2)") ==
        doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(brw::parse_displacement("cbrt(8)") == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(brw::parse_displacement("+exp(1)") ==
        doctest::Approx(std::exp(1.0)).epsilon(1e-15));

  CHECK_THROWS_AS(brw::parse_displacement(""), brw::ConfigError);
  CHECK_THROWS_AS(brw::parse_displacement("log("), brw::ConfigError);
  CHECK_THROWS_AS(brw::parse_displacement("log(0)"), brw::ConfigError);
  CHECK_THROWS_AS(brw::parse_displacement("sqrt(-1)"), brw::ConfigError);
  CHECK_THROWS_AS(brw::parse_displacement("tan(1)"), brw::ConfigError);
  CHECK_THROWS_AS(brw::parse_displacement("log(two)"), brw::ConfigError);
  CHECK_THROWS_AS(brw::parse_displacement("1.2.3"), brw::ConfigError);
}

TEST_CASE("law objects parse strictly and resolve expressions") {
  const auto spec = nlohmann::json::parse(R"json({
    "variant": "finite_support",
    "outcomes": [
      {"prob": 0.5, "displacements": ["log(2)"]},
      {"prob": 0.5, "displacements": ["-log(2)"]}
    ]
  })json");
  const brw::OffspringLaw law = brw::law_from_json(spec);
  const auto& finite = std::get<brw::FiniteSupportLaw>(law);
  REQUIRE(finite.outcomes.size() == 2);
  CHECK(finite.outcomes[0].displacements[0] ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(finite.outcomes[1].displacements[0] ==
        doctest::Approx(-std::log(2.0)).epsilon(1e-15));

  const auto pg_spec = nlohmann::json::parse(
      R"json({"variant": "poisson_gaussian", "m": 1.6487212707001282, "mu": 1.0, "s0sq": 1.0})json");
  const auto pg_law = brw::law_from_json(pg_spec);
  CHECK(std::get<brw::PoissonGaussianLaw>(pg_law).mu == 1.0);

  SUBCASE("unknown keys are named in the error") {
    auto bad = spec;
    bad["extra"] = 1;
    try {
      brw::law_from_json(bad);
      FAIL("expected ConfigError");
    } catch (const brw::ConfigError& e) {
      CHECK(std::string(e.what()).find("extra") != std::string::npos);
    }
  }
  SUBCASE("unknown outcome keys are rejected") {
    auto bad = spec;
    bad["outcomes"][0]["weight"] = 1;
    CHECK_THROWS_AS(brw::law_from_json(bad), brw::ConfigError);
  }
  SUBCASE("a bad probability sum is a configuration error here") {
    auto bad = spec;
    bad["outcomes"][0]["prob"] = 0.7;
    CHECK_THROWS_AS(brw::law_from_json(bad), brw::ConfigError);
  }
  SUBCASE("missing fields are configuration errors") {
    CHECK_THROWS_AS(brw::law_from_json(nlohmann::json::parse(R"json({"variant": "finite_support"})json")),
                    brw::ConfigError);
    CHECK_THROWS_AS(
        brw::law_from_json(nlohmann::json::parse(R"json({"variant": "poisson_gaussian", "m": 2.0})json")),
        brw::ConfigError);
    CHECK_THROWS_AS(brw::law_from_json(nlohmann::json::parse(R"json({"variant": "unheard_of"})json")),
                    brw::ConfigError);
    CHECK_THROWS_AS(brw::law_from_json(nlohmann::json::parse("[1, 2]")), brw::ConfigError);
  }
}

TEST_CASE("law round trip through the manifest echo") {
  const auto echo = brw::law_to_json(testlaw::mixed_three());
  const auto back = brw::law_from_json(echo);
  const brw::FiniteSupportLaw original = testlaw::mixed_three();
  const auto& parsed = std::get<brw::FiniteSupportLaw>(back);
  REQUIRE(parsed.outcomes.size() == original.outcomes.size());
  for (std::size_t i = 0; i < parsed.outcomes.size(); ++i) {
    CHECK(parsed.outcomes[i].prob == original.outcomes[i].prob);
    CHECK(parsed.outcomes[i].displacements == original.outcomes[i].displacements);
  }

  const auto pg_echo = brw::law_to_json(testlaw::critical_pg());
  CHECK(pg_echo.at("variant") == "poisson_gaussian");
  CHECK(pg_echo.at("m").get<double>() ==
        doctest::Approx(std::exp(0.5)).epsilon(1e-15));
}

TEST_CASE("barrier strings cover every shape") {
  const auto pow = brw::parse_barrier("pow:6");
  CHECK(std::get<brw::PowerLawBarrier>(pow).a == 6.0);

  const auto lin = brw::parse_barrier("lin:-0.1");
  CHECK(std::get<brw::LinearBarrier>(lin).eps == -0.1);

  const auto osc = brw::parse_barrier("osc:5:4");
  CHECK(std::get<brw::OscillatingParityBarrier>(osc).a_plus == 5.0);
  CHECK(std::get<brw::OscillatingParityBarrier>(osc).a_minus == 4.0);

  const auto dip = brw::parse_barrier("dip:5:1:16");
  CHECK(std::get<brw::SparseDipBarrier>(dip).a_plus == 5.0);
  CHECK(std::get<brw::SparseDipBarrier>(dip).a_minus == 1.0);
  CHECK(std::get<brw::SparseDipBarrier>(dip).stride == 16);

  const auto table = brw::parse_barrier("table:1,2.5,3");
  CHECK(std::get<brw::TableBarrier>(table).values ==
        std::vector<double>{1.0, 2.5, 3.0});
}

TEST_CASE("malformed barrier strings name the offending field") {
  const auto message_of = [](const std::string& text) {
    try {
      brw::parse_barrier(text);
    } catch (const brw::ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message_of("pow:").find("pow") != std::string::npos);
  CHECK(message_of("pow:abc").find("not a number") != std::string::npos);
  CHECK(message_of("osc:5").find("osc:<a_even>:<a_odd>") != std::string::npos);
  CHECK(message_of("dip:5:1").find("dip") != std::string::npos);
  CHECK(message_of("dip:5:1:2.5").find("integer") != std::string::npos);
  CHECK(message_of("lin:").find("lin") != std::string::npos);
  CHECK(message_of("wedge:3").find("wedge") != std::string::npos);
  CHECK_FALSE(message_of("").empty());
  // Structurally valid but semantically out of range: still a config error.
  CHECK(message_of("dip:5:1:1").find("invalid") != std::string::npos);
  CHECK_FALSE(message_of("table:").empty());
}

TEST_CASE("barrier strings round trip through the canonical echo") {
  for (const char* text :
       {"pow:6", "lin:-0.10000000000000001", "osc:5:4", "dip:5:1:16", "table:1,2.5,3"}) {
    const auto barrier = brw::parse_barrier(text);
    CHECK(brw::barrier_to_string(barrier) == text);
  }
}

TEST_CASE("profile strings parse and echo") {
  const auto flat = brw::parse_profile("const:-1");
  CHECK(std::get<brw::ConstantProfile>(flat).v == -1.0);
  CHECK(brw::profile_to_string(flat) == "const:-1");

  const auto curved = brw::parse_profile("cbrt:3:0.1");
  CHECK(std::get<brw::CubeRootOffsetProfile>(curved).coeff == 3.0);
  CHECK(std::get<brw::CubeRootOffsetProfile>(curved).offset == 0.1);

  CHECK_THROWS_AS(brw::parse_profile("cbrt:3"), brw::ConfigError);
  CHECK_THROWS_AS(brw::parse_profile("cbrt:3:-0.1"), brw::ConfigError);
  CHECK_THROWS_AS(brw::parse_profile("const:"), brw::ConfigError);
  CHECK_THROWS_AS(brw::parse_profile("line:1"), brw::ConfigError);
}

TEST_CASE("real formatting round trips doubles exactly") {
  for (const double x : {0.1, 1.0 / 3.0, 2.4554457015685776, 4.640501589420204,
                         1e-300, -6.02e23}) {
    CHECK(std::stod(brw::format_real(x)) == x);
  }
  CHECK(brw::format_real(2.0) == "2");
}

TEST_CASE("the manifest hash is stable and key-order independent") {
  nlohmann::json a;
  a["seed"] = 7;
  a["law"] = "pg";
  nlohmann::json b;
  b["law"] = "pg";
  b["seed"] = 7;
  CHECK(brw::hash_hex(a.dump()) == brw::hash_hex(b.dump()));
  CHECK(brw::hash_hex(a.dump()).size() == 16);

  nlohmann::json c = a;
  c["seed"] = 8;
  CHECK(brw::hash_hex(a.dump()) != brw::hash_hex(c.dump()));

  // Frozen FNV-1a reference value; a drifting hash would silently break
  // cross-references between artifacts written by different builds.
  CHECK(brw::fnv1a64("") == 0xcbf29ce484222325ull);
  CHECK(brw::fnv1a64("a") == 0xaf63dc4c8601ec8cull);
}
