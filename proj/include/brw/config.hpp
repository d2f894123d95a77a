#pragma once

#include <string>

#include "json.hpp"

#include "brw/laws.hpp"
#include "brw/sim.hpp"
#include "brw/tube.hpp"

namespace brw {

// Displacement entries in law configs are decimal literals or one-call
// expressions: an optional sign followed by a number or by
// log(x) | sqrt(x) | exp(x) | cbrt(x) with a decimal argument.  Anything
// else is a ConfigError naming the offending text.
double parse_displacement(const std::string& text);

// Law objects are strict: {"variant": "finite_support", "outcomes":
// [{"prob": p, "displacements": [...]}, ...]} or {"variant":
// "poisson_gaussian", "m": ..., "mu": ..., "s0sq": ...}.  Unknown keys and
// malformed values are ConfigErrors; a law failing validate_law is also
// reported as a ConfigError, since it arrived through configuration.
OffspringLaw law_from_json(const nlohmann::json& spec);
OffspringLaw load_law_config(const std::string& path);

// Resolved echo of a law for manifests; displacement expressions appear as
// their evaluated numbers.
nlohmann::json law_to_json(const OffspringLaw& law);

// Barrier strings: "pow:6", "lin:-0.1", "osc:5:4", "dip:5:1:16",
// "table:1,2,3".  Profile strings: "const:-1", "cbrt:3:0.1".
Barrier parse_barrier(const std::string& text);
std::string barrier_to_string(const Barrier& barrier);
TubeProfile parse_profile(const std::string& text);
std::string profile_to_string(const TubeProfile& profile);

}  // namespace brw
