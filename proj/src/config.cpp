#include "brw/config.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string>
#include <vector>

#include "brw/errors.hpp"

namespace brw {

namespace {

// Keeps empty tokens so "pow:" surfaces as a missing field, not a short list.
std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string::size_type from = 0;
  while (true) {
    const auto at = text.find(sep, from);
    if (at == std::string::npos) {
      parts.push_back(text.substr(from));
      return parts;
    }
    parts.push_back(text.substr(from, at - from));
    from = at + 1;
  }
}

double parse_real(const std::string& token, const std::string& context) {
  if (token.empty()) {
    throw ConfigError(context + " is empty");
  }
  char* end = nullptr;
  const double value = std::strtod(token.c_str(), &end);
  if (end != token.c_str() + token.size()) {
    throw ConfigError(context + " is not a number: '" + token + "'");
  }
  return value;
}

long parse_integer(const std::string& token, const std::string& context) {
  const double value = parse_real(token, context);
  const double rounded = std::nearbyint(value);
  if (value != rounded || std::fabs(value) > 1e15) {
    throw ConfigError(context + " must be an integer, got '" + token + "'");
  }
  return static_cast<long>(rounded);
}

std::string format_number(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void require_keys(const nlohmann::json& object,
                  std::initializer_list<const char*> allowed,
                  const std::string& where) {
  for (const auto& item : object.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw ConfigError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

double number_field(const nlohmann::json& object, const char* key,
                    const std::string& where) {
  if (!object.contains(key)) {
    throw ConfigError(where + " is missing '" + key + "'");
  }
  const auto& value = object.at(key);
  if (!value.is_number()) {
    throw ConfigError("'" + std::string(key) + "' in " + where +
                      " must be a number");
  }
  return value.get<double>();
}

}  // namespace

double parse_displacement(const std::string& text) {
  std::string body = text;
  double sign = 1.0;
  if (!body.empty() && (body.front() == '+' || body.front() == '-')) {
    sign = body.front() == '-' ? -1.0 : 1.0;
    body.erase(body.begin());
  }
  const auto open = body.find('(');
  if (open == std::string::npos) {
    return sign * parse_real(body, "displacement '" + text + "'");
  }
  if (body.empty() || body.back() != ')') {
    throw ConfigError("displacement '" + text + "' has an unclosed call");
  }
  const std::string fn = body.substr(0, open);
  const std::string arg_text = body.substr(open + 1, body.size() - open - 2);
  const double arg =
      parse_real(arg_text, "argument of '" + fn + "' in displacement '" + text + "'");
  double value = 0.0;
  if (fn == "log") {
    if (arg <= 0.0) {
      throw ConfigError("displacement '" + text + "' takes log of a nonpositive value");
    }
    value = std::log(arg);
  } else if (fn == "sqrt") {
    if (arg < 0.0) {
      throw ConfigError("displacement '" + text + "' takes sqrt of a negative value");
    }
    value = std::sqrt(arg);
  } else if (fn == "exp") {
    value = std::exp(arg);
  } else if (fn == "cbrt") {
    value = std::cbrt(arg);
  } else {
    throw ConfigError("unknown function '" + fn + "' in displacement '" + text +
                      "' (expected log, sqrt, exp, or cbrt)");
  }
  return sign * value;
}

OffspringLaw law_from_json(const nlohmann::json& spec) {
  if (!spec.is_object()) {
    throw ConfigError("law config must be a JSON object");
  }
  if (!spec.contains("variant") || !spec.at("variant").is_string()) {
    throw ConfigError("law config needs a string 'variant'");
  }
  const std::string variant = spec.at("variant").get<std::string>();
  OffspringLaw law;
  if (variant == "finite_support") {
    require_keys(spec, {"variant", "outcomes"}, "law config");
    if (!spec.contains("outcomes") || !spec.at("outcomes").is_array() ||
        spec.at("outcomes").empty()) {
      throw ConfigError("law config needs a nonempty 'outcomes' array");
    }
    FiniteSupportLaw finite;
    std::size_t index = 0;
    for (const auto& entry : spec.at("outcomes")) {
      const std::string where = "outcomes[" + std::to_string(index) + "]";
      if (!entry.is_object()) {
        throw ConfigError(where + " must be an object");
      }
      require_keys(entry, {"prob", "displacements"}, where);
      SiblingOutcome outcome;
      outcome.prob = number_field(entry, "prob", where);
      if (!entry.contains("displacements") || !entry.at("displacements").is_array()) {
        throw ConfigError(where + " needs a 'displacements' array");
      }
      for (const auto& disp : entry.at("displacements")) {
        if (disp.is_number()) {
          outcome.displacements.push_back(disp.get<double>());
        } else if (disp.is_string()) {
          outcome.displacements.push_back(parse_displacement(disp.get<std::string>()));
        } else {
          throw ConfigError(where + " displacements must be numbers or expression strings");
        }
      }
      finite.outcomes.push_back(std::move(outcome));
      ++index;
    }
    law = std::move(finite);
  } else if (variant == "poisson_gaussian") {
    require_keys(spec, {"variant", "m", "mu", "s0sq"}, "law config");
    PoissonGaussianLaw pg;
    pg.m = number_field(spec, "m", "law config");
    pg.mu = number_field(spec, "mu", "law config");
    pg.s0sq = number_field(spec, "s0sq", "law config");
    law = pg;
  } else {
    throw ConfigError("unknown law variant '" + variant +
                      "' (expected finite_support or poisson_gaussian)");
  }
  try {
    validate_law(law);
  } catch (const Error& e) {
    throw ConfigError(std::string("law config is invalid: ") + e.what());
  }
  return law;
}

OffspringLaw load_law_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open law config '" + path + "'");
  }
  nlohmann::json spec;
  try {
    in >> spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("law config '" + path + "' is not valid JSON: " + e.what());
  }
  try {
    return law_from_json(spec);
  } catch (const ConfigError& e) {
    throw ConfigError("law config '" + path + "': " + e.what());
  }
}

nlohmann::json law_to_json(const OffspringLaw& law) {
  nlohmann::json out;
  if (const auto* finite = std::get_if<FiniteSupportLaw>(&law)) {
    out["variant"] = "finite_support";
    out["outcomes"] = nlohmann::json::array();
    for (const auto& outcome : finite->outcomes) {
      nlohmann::json entry;
      entry["prob"] = outcome.prob;
      entry["displacements"] = outcome.displacements;
      out["outcomes"].push_back(std::move(entry));
    }
  } else {
    const auto& pg = std::get<PoissonGaussianLaw>(law);
    out["variant"] = "poisson_gaussian";
    out["m"] = pg.m;
    out["mu"] = pg.mu;
    out["s0sq"] = pg.s0sq;
  }
  return out;
}

Barrier parse_barrier(const std::string& text) {
  const auto parts = split(text, ':');
  const std::string& kind = parts.front();
  const auto arity = [&](std::size_t fields, const char* shape) {
    if (parts.size() - 1 != fields) {
      throw ConfigError("barrier string '" + text + "' must look like '" +
                        shape + "'");
    }
  };
  const auto field = [&](std::size_t slot, const char* name) {
    return parse_real(parts[slot], "barrier string '" + text + "', " +
                                       std::string(name));
  };
  Barrier barrier;
  if (kind == "pow") {
    arity(1, "pow:<a>");
    barrier = PowerLawBarrier{field(1, "slope a")};
  } else if (kind == "lin") {
    arity(1, "lin:<eps>");
    barrier = LinearBarrier{field(1, "slope eps")};
  } else if (kind == "osc") {
    arity(2, "osc:<a_even>:<a_odd>");
    barrier = OscillatingParityBarrier{field(1, "even slope"), field(2, "odd slope")};
  } else if (kind == "dip") {
    arity(3, "dip:<a>:<a_dip>:<stride>");
    SparseDipBarrier dip;
    dip.a_plus = field(1, "base slope");
    dip.a_minus = field(2, "dip slope");
    dip.stride = parse_integer(parts[3], "barrier string '" + text + "', stride");
    barrier = dip;
  } else if (kind == "table") {
    arity(1, "table:<v1>,<v2>,...");
    TableBarrier table;
    for (const auto& token : split(parts[1], ',')) {
      table.values.push_back(
          parse_real(token, "barrier string '" + text + "', table entry"));
    }
    barrier = std::move(table);
  } else {
    throw ConfigError("unknown barrier kind '" + kind +
                      "' in '" + text + "' (expected pow, lin, osc, dip, or table)");
  }
  try {
    validate_barrier(barrier);
  } catch (const Error& e) {
    throw ConfigError("barrier string '" + text + "' is invalid: " + e.what());
  }
  return barrier;
}

std::string barrier_to_string(const Barrier& barrier) {
  std::ostringstream out;
  if (const auto* pow = std::get_if<PowerLawBarrier>(&barrier)) {
    out << "pow:" << format_number(pow->a);
  } else if (const auto* lin = std::get_if<LinearBarrier>(&barrier)) {
    out << "lin:" << format_number(lin->eps);
  } else if (const auto* osc = std::get_if<OscillatingParityBarrier>(&barrier)) {
    out << "osc:" << format_number(osc->a_plus) << ":" << format_number(osc->a_minus);
  } else if (const auto* dip = std::get_if<SparseDipBarrier>(&barrier)) {
    out << "dip:" << format_number(dip->a_plus) << ":" << format_number(dip->a_minus)
        << ":" << dip->stride;
  } else {
    const auto& table = std::get<TableBarrier>(barrier);
    out << "table:";
    for (std::size_t i = 0; i < table.values.size(); ++i) {
      out << (i ? "," : "") << format_number(table.values[i]);
    }
  }
  return out.str();
}

TubeProfile parse_profile(const std::string& text) {
  const auto parts = split(text, ':');
  const std::string& kind = parts.front();
  if (kind == "const") {
    if (parts.size() != 2) {
      throw ConfigError("profile string '" + text + "' must look like 'const:<v>'");
    }
    return ConstantProfile{
        parse_real(parts[1], "profile string '" + text + "', level")};
  }
  if (kind == "cbrt") {
    if (parts.size() != 3) {
      throw ConfigError("profile string '" + text +
                        "' must look like 'cbrt:<coeff>:<offset>'");
    }
    CubeRootOffsetProfile profile;
    profile.coeff = parse_real(parts[1], "profile string '" + text + "', coefficient");
    profile.offset = parse_real(parts[2], "profile string '" + text + "', offset");
    if (profile.offset < 0.0) {
      throw ConfigError("profile string '" + text + "' has a negative offset");
    }
    return profile;
  }
  throw ConfigError("unknown profile kind '" + kind + "' in '" + text +
                    "' (expected const or cbrt)");
}

std::string profile_to_string(const TubeProfile& profile) {
  std::ostringstream out;
  if (const auto* constant = std::get_if<ConstantProfile>(&profile)) {
    out << "const:" << format_number(constant->v);
  } else {
    const auto& cbrt = std::get<CubeRootOffsetProfile>(profile);
    out << "cbrt:" << format_number(cbrt.coeff) << ":" << format_number(cbrt.offset);
  }
  return out.str();
}

}  // namespace brw
