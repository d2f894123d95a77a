// Command-line front end.  Every subcommand resolves its parameters with the
// same precedence (built-in default, then config file, then explicit flag),
// echoes the fully resolved configuration into manifest.json, and stamps
// every artifact with the manifest hash so outputs stay traceable.  The
// wall-clock timestamp lives in the manifest only; all other artifacts are
// byte-identical across equal-seed reruns.
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "brw/artifacts.hpp"
#include "brw/config.hpp"
#include "brw/constants.hpp"
#include "brw/errors.hpp"
#include "brw/laws.hpp"
#include "brw/profile_ode.hpp"
#include "brw/reduction.hpp"
#include "brw/rng.hpp"
#include "brw/sim.hpp"
#include "brw/tube.hpp"

namespace {

using brw::ConfigError;
using nlohmann::json;

void check_keys(const json& object, std::initializer_list<const char*> allowed,
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

json block_of(const json& root, const char* name) {
  const auto it = root.find(name);
  if (it == root.end()) {
    return json::object();
  }
  return *it;
}

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file '" + path + "'");
  }
  json root;
  try {
    in >> root;
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!root.is_object()) {
    throw ConfigError("config file '" + path + "' must hold a JSON object");
  }
  check_keys(root,
             {"seed", "workers", "output_dir", "law", "barrier", "constants",
              "reduce", "ode", "tube", "sim"},
             "config file top level");
  const auto require_object = [&](const char* name) {
    if (root.contains(name) && !root.at(name).is_object()) {
      throw ConfigError("config block '" + std::string(name) + "' must be an object");
    }
  };
  for (const char* name : {"law", "constants", "reduce", "ode", "tube", "sim"}) {
    require_object(name);
  }
  check_keys(block_of(root, "constants"), {"sigma_sq", "a", "e_max"},
             "config block 'constants'");
  check_keys(block_of(root, "reduce"), {"profile"}, "config block 'reduce'");
  check_keys(block_of(root, "ode"), {"sigma_sq", "a", "s", "tol", "horizon"},
             "config block 'ode'");
  check_keys(block_of(root, "tube"),
             {"j", "runs", "lower", "upper", "endpoint", "exact", "band", "start",
              "gaussian", "atoms", "allow_touching"},
             "config block 'tube'");
  check_keys(block_of(root, "sim"),
             {"n", "runs", "cap", "method", "a", "b", "growth", "k_max", "eps",
              "stride_min", "allow_noncritical"},
             "config block 'sim'");
  if (root.contains("law")) {
    brw::law_from_json(root.at("law"));
  }
  if (root.contains("barrier")) {
    if (!root.at("barrier").is_string()) {
      throw ConfigError("config key 'barrier' must be a barrier string");
    }
    brw::parse_barrier(root.at("barrier").get<std::string>());
  }
  return root;
}

template <typename T>
T config_value(const json& block, const char* key, const std::string& where) {
  try {
    return block.at(key).template get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key '" + std::string(key) + "' in " + where +
                      " has the wrong type");
  }
}

// Precedence: explicit flag, else config entry, else the built-in fallback.
template <typename T>
T pick(const CLI::Option* opt, const T& flag_value, const json& block,
       const char* key, const T& fallback, const std::string& where) {
  if (opt != nullptr && opt->count() > 0) {
    return flag_value;
  }
  if (block.contains(key)) {
    return config_value<T>(block, key, where);
  }
  return fallback;
}

template <typename T>
std::optional<T> pick_optional(const CLI::Option* opt, const T& flag_value,
                               const json& block, const char* key,
                               const std::string& where) {
  if (opt != nullptr && opt->count() > 0) {
    return flag_value;
  }
  if (block.contains(key)) {
    return config_value<T>(block, key, where);
  }
  return std::nullopt;
}

// Options shared by every subcommand, plus the loaded config file.
struct Shared {
  std::string config_path;
  std::uint64_t seed_flag = 0;
  std::string out_flag;
  int workers_flag = 1;
  std::string law_path;

  CLI::Option* config_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* out_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
  CLI::Option* law_opt = nullptr;

  json cfg = json::object();

  void load_config() {
    if (config_opt->count() > 0) {
      cfg = load_config_file(config_path);
    }
  }

  std::uint64_t seed() const {
    if (seed_opt->count() > 0) {
      return seed_flag;
    }
    if (cfg.contains("seed")) {
      const auto& value = cfg.at("seed");
      if (!value.is_number_integer() || value.get<long long>() < 0) {
        throw ConfigError("config key 'seed' must be a nonnegative integer");
      }
      return value.get<std::uint64_t>();
    }
    if (const char* env = std::getenv("BRW_SEED")) {
      char* end = nullptr;
      const unsigned long long parsed = std::strtoull(env, &end, 10);
      if (end == env || *end != '\0') {
        throw ConfigError(std::string("environment variable BRW_SEED is not an "
                                      "unsigned integer: '") +
                          env + "'");
      }
      return parsed;
    }
    return 1;
  }

  int workers() const {
    const int w = pick(workers_opt, workers_flag, cfg, "workers", 1, "config file");
    if (w < 1) {
      throw ConfigError("workers must be at least 1");
    }
    return w;
  }

  std::string out_dir() const {
    return pick(out_opt, out_flag, cfg, "output_dir", std::string("."), "config file");
  }

  std::optional<brw::OffspringLaw> law_if_any() const {
    if (law_opt->count() > 0) {
      return brw::load_law_config(law_path);
    }
    if (cfg.contains("law")) {
      return brw::law_from_json(cfg.at("law"));
    }
    return std::nullopt;
  }

  brw::OffspringLaw require_law() const {
    auto law = law_if_any();
    if (!law) {
      throw ConfigError("no offspring law given; pass --law-config FILE or put a "
                        "'law' object in the config file");
    }
    return std::move(*law);
  }

  json base_manifest(const char* subcommand) const {
    json out;
    out["subcommand"] = subcommand;
    out["seed"] = seed();
    out["workers"] = workers();
    out["output_dir"] = out_dir();
    return out;
  }
};

std::string cell(double x) { return brw::format_real(x); }

json json_real(double x) {
  // JSON has no literal for non-finite numbers; encode them as strings so
  // the artifact stays machine-readable instead of silently becoming null.
  if (std::isfinite(x)) {
    return x;
  }
  return x > 0 ? "inf" : (x < 0 ? "-inf" : "nan");
}

std::pair<double, double> parse_pair(const std::string& text, const char* what) {
  const auto at = text.find(':');
  if (at == std::string::npos) {
    throw ConfigError(std::string(what) + " '" + text + "' must look like '<lo>:<hi>'");
  }
  char* end = nullptr;
  const std::string lo_text = text.substr(0, at);
  const std::string hi_text = text.substr(at + 1);
  const double lo = std::strtod(lo_text.c_str(), &end);
  if (lo_text.empty() || end != lo_text.c_str() + lo_text.size()) {
    throw ConfigError(std::string(what) + " '" + text + "' has a malformed low field");
  }
  const double hi = std::strtod(hi_text.c_str(), &end);
  if (hi_text.empty() || end != hi_text.c_str() + hi_text.size()) {
    throw ConfigError(std::string(what) + " '" + text + "' has a malformed high field");
  }
  return {lo, hi};
}

// ---------------------------------------------------------------------------
// constants

struct ConstantsArgs {
  double sigma_sq = 1.0;
  std::vector<double> a_values;
  int e_max = 64;
  CLI::Option* sigma_opt = nullptr;
  CLI::Option* a_opt = nullptr;
  CLI::Option* e_max_opt = nullptr;
};

int run_constants(const Shared& shared, const ConstantsArgs& args) {
  const json block = block_of(shared.cfg, "constants");
  const double sigma_sq = pick(args.sigma_opt, args.sigma_sq, block, "sigma_sq", 1.0,
                               "config block 'constants'");
  const auto a_values = pick(args.a_opt, args.a_values, block, "a",
                             std::vector<double>{}, "config block 'constants'");
  const int e_max =
      pick(args.e_max_opt, args.e_max, block, "e_max", 64, "config block 'constants'");
  if (e_max < 2) {
    throw ConfigError("e_max must be at least 2");
  }

  json manifest = shared.base_manifest("constants");
  manifest["parameters"] = {{"sigma_sq", sigma_sq}, {"a", a_values}, {"e_max", e_max}};
  brw::ArtifactWriter writer(shared.out_dir(), manifest);

  const double a_c = brw::a_critical(sigma_sq);
  // Width minimizing b + 3 pi^2 sigma^2 / (2 b^2); the minimum equals a_c,
  // so for a > a_c this width yields the smallest certified growth factor.
  const double b_opt = 2.0 * a_c / 3.0;
  std::vector<std::vector<std::string>> rows;
  const auto row_for = [&](std::optional<double> a) {
    std::vector<std::string> row{cell(sigma_sq), "", cell(a_c), "", "", ""};
    if (!a) {
      return row;
    }
    row[1] = cell(*a);
    const auto roots = brw::b_roots(sigma_sq, *a);
    if (roots.kind == brw::BRoots::Kind::None) {
      return row;
    }
    row[3] = cell(roots.b_small);
    row[4] = cell(roots.b_a);
    for (int growth = 2; growth <= e_max; ++growth) {
      if (brw::survival_certificate(sigma_sq, *a, b_opt, growth).negative) {
        row[5] = std::to_string(growth);
        break;
      }
    }
    return row;
  };
  if (a_values.empty()) {
    rows.push_back(row_for(std::nullopt));
  }
  for (const double a : a_values) {
    rows.push_back(row_for(a));
  }
  writer.write_csv("constants.csv", {"sigma_sq", "a", "a_c", "b_small", "b_a", "E_min"},
                   rows);
  writer.write_manifest();
  std::cout << "a_c(" << brw::format_real(sigma_sq)
            << ") = " << brw::format_real(a_c) << '\n'
            << "wrote " << writer.path_of("constants.csv") << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// reduce

struct ReduceArgs {
  std::string profile_name;
  CLI::Option* profile_opt = nullptr;
};

int run_reduce(const Shared& shared, const ReduceArgs& args) {
  const json block = block_of(shared.cfg, "reduce");
  const auto profile_name =
      pick_optional(args.profile_opt, args.profile_name, block, "profile",
                    "config block 'reduce'");

  std::optional<brw::OffspringLaw> law;
  std::optional<brw::LaplaceProfile> profile;
  if (profile_name) {
    profile = brw::LaplaceProfile::from_closed_form(brw::closed_form_profile(*profile_name));
  } else {
    law = shared.require_law();
    profile = brw::LaplaceProfile(*law);
  }

  json manifest = shared.base_manifest("reduce");
  manifest["parameters"] = json::object();
  if (profile_name) {
    manifest["parameters"]["profile"] = *profile_name;
  }
  manifest["law"] = law ? brw::law_to_json(*law) : json(nullptr);
  brw::ArtifactWriter writer(shared.out_dir(), manifest);

  const brw::ReductionReport report = brw::classify_reduction(*profile);
  json payload;
  payload["case_tag"] = brw::reduction_case_name(report.case_tag);
  payload["t_star"] = report.t_star ? json(*report.t_star) : json(nullptr);
  payload["sigma_tilde_sq"] =
      report.sigma_tilde_sq ? json(*report.sigma_tilde_sq) : json(nullptr);
  payload["F_values"] = json::array();
  for (const auto& [t, value] : report.F_values) {
    payload["F_values"].push_back({t, value});
  }
  if (report.t_star) {
    const auto comparison = brw::sigma_tilde_comparison(*profile, *report.t_star);
    payload["sigma_tilde_direct"] = json_real(comparison.direct);
    payload["sigma_tilde_printed"] = json_real(comparison.printed);
    if (law) {
      const auto tilt = brw::tilt_law(*law, *report.t_star);
      payload["tilted_law"] = brw::law_to_json(tilt.law);
      payload["tilted_law"]["sigma_tilde_sq"] = tilt.sigma_tilde_sq;
    } else {
      payload["tilted_law"] = nullptr;
    }
  } else {
    payload["tilted_law"] = nullptr;
  }
  writer.write_json("reduce.json", payload);
  writer.write_manifest();
  std::cout << "case " << brw::reduction_case_name(report.case_tag);
  if (report.t_star) {
    std::cout << ", t_star = " << brw::format_real(*report.t_star);
  }
  std::cout << '\n' << "wrote " << writer.path_of("reduce.json") << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// ode

struct OdeArgs {
  double sigma_sq = 1.0;
  double a = 0.0;
  double s = 1.0;
  double tol = 1e-10;
  double horizon = 0.0;
  CLI::Option* sigma_opt = nullptr;
  CLI::Option* a_opt = nullptr;
  CLI::Option* s_opt = nullptr;
  CLI::Option* tol_opt = nullptr;
  CLI::Option* horizon_opt = nullptr;
};

int run_ode(const Shared& shared, const OdeArgs& args) {
  const json block = block_of(shared.cfg, "ode");
  const std::string where = "config block 'ode'";
  const double sigma_sq = pick(args.sigma_opt, args.sigma_sq, block, "sigma_sq", 1.0, where);
  const double a = pick(args.a_opt, args.a, block, "a", 0.0, where);
  const double s = pick(args.s_opt, args.s, block, "s", 1.0, where);
  const double tol = pick(args.tol_opt, args.tol, block, "tol", 1e-10, where);
  const double horizon = pick(args.horizon_opt, args.horizon, block, "horizon", 0.0, where);

  json manifest = shared.base_manifest("ode");
  manifest["parameters"] = {{"sigma_sq", sigma_sq},
                            {"a", a},
                            {"s", s},
                            {"tol", tol},
                            {"horizon", horizon}};
  brw::ArtifactWriter writer(shared.out_dir(), manifest);

  const brw::ProfileSolution solution =
      horizon > 0.0 ? brw::solve_profile(sigma_sq, a, s, horizon, tol)
                    : brw::solve_until_classified(sigma_sq, a, s, tol);

  std::vector<std::vector<std::string>> rows;
  rows.reserve(solution.grid.size());
  for (std::size_t i = 0; i < solution.grid.size(); ++i) {
    const double u = solution.grid[i];
    rows.push_back({cell(u * u * u), cell(solution.values[i])});
  }
  writer.write_csv("ode_solution.csv", {"t", "f"}, rows);

  json payload;
  if (solution.blows_down()) {
    payload["classification"] = "BlowsDown";
    payload["t_max"] = solution.t_max();
    payload["b_limit"] = nullptr;
  } else if (solution.grows()) {
    payload["classification"] = "GrowsLikeCubeRoot";
    payload["t_max"] = nullptr;
    payload["b_limit"] = solution.b_limit();
  } else {
    payload["classification"] = "Undetermined";
    payload["t_max"] = nullptr;
    payload["b_limit"] = nullptr;
  }
  payload["residual_max"] = json_real(solution.residual_max);
  writer.write_json("ode_classification.json", payload);
  writer.write_manifest();
  std::cout << payload.at("classification").get<std::string>();
  if (solution.blows_down()) {
    std::cout << ", t_max = " << brw::format_real(solution.t_max());
  } else if (solution.grows()) {
    std::cout << ", b_limit = " << brw::format_real(solution.b_limit());
  }
  std::cout << '\n' << "wrote " << writer.path_of("ode_classification.json") << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// rate

struct RateArgs {
  double sigma_sq = 1.0;
  double a_min = 0.0;
  double a_max = 0.0;
  int steps = 21;
  double tol = 1e-9;
  CLI::Option* sigma_opt = nullptr;
  CLI::Option* a_min_opt = nullptr;
  CLI::Option* tol_opt = nullptr;
};

int run_rate(const Shared& shared, const RateArgs& args) {
  const double sigma_sq = args.sigma_opt->count() ? args.sigma_sq : 1.0;
  if (args.steps < 1) {
    throw ConfigError("steps must be at least 1");
  }
  if (args.a_max < args.a_min) {
    throw ConfigError("a-max must not be below a-min");
  }

  json manifest = shared.base_manifest("rate");
  manifest["parameters"] = {{"sigma_sq", sigma_sq},
                            {"a_min", args.a_min},
                            {"a_max", args.a_max},
                            {"steps", args.steps},
                            {"tol", args.tol}};
  brw::ArtifactWriter writer(shared.out_dir(), manifest);

  std::vector<std::vector<std::string>> rows;
  for (int i = 0; i < args.steps; ++i) {
    const double a =
        args.steps == 1
            ? args.a_min
            : args.a_min + (args.a_max - args.a_min) * i / (args.steps - 1);
    rows.push_back({cell(a), cell(brw::extinction_rate(sigma_sq, a, args.tol))});
  }
  writer.write_csv("rate.csv", {"a", "c"}, rows);
  writer.write_manifest();
  std::cout << "wrote " << writer.path_of("rate.csv") << " (" << rows.size()
            << " rows)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// tube

struct TubeArgs {
  int j = 1;
  long runs = 100000;
  std::string lower = "const:-1";
  std::string upper = "const:1";
  std::string endpoint;
  std::string gaussian;
  std::string atoms;
  bool exact = false;
  std::string band;
  long start = 0;
  bool allow_touching = false;
  CLI::Option* j_opt = nullptr;
  CLI::Option* runs_opt = nullptr;
  CLI::Option* lower_opt = nullptr;
  CLI::Option* upper_opt = nullptr;
  CLI::Option* endpoint_opt = nullptr;
  CLI::Option* gaussian_opt = nullptr;
  CLI::Option* atoms_opt = nullptr;
  CLI::Option* exact_opt = nullptr;
  CLI::Option* band_opt = nullptr;
  CLI::Option* start_opt = nullptr;
  CLI::Option* touching_opt = nullptr;
};

brw::DiscreteAtoms parse_atoms(const std::string& text) {
  brw::DiscreteAtoms step;
  std::string::size_type from = 0;
  while (from <= text.size()) {
    const auto at = text.find(',', from);
    const std::string token =
        text.substr(from, at == std::string::npos ? std::string::npos : at - from);
    const auto [x, p] = parse_pair(token, "atom");
    step.atoms.push_back({x, p});
    if (at == std::string::npos) {
      break;
    }
    from = at + 1;
  }
  return step;
}

int run_tube(const Shared& shared, const TubeArgs& args) {
  const json block = block_of(shared.cfg, "tube");
  const std::string where = "config block 'tube'";
  const int j = pick(args.j_opt, args.j, block, "j", 0, where);
  const long runs = pick(args.runs_opt, args.runs, block, "runs", 100000L, where);
  const auto lower_text =
      pick(args.lower_opt, args.lower, block, "lower", std::string("const:-1"), where);
  const auto upper_text =
      pick(args.upper_opt, args.upper, block, "upper", std::string("const:1"), where);
  const auto endpoint_text =
      pick_optional(args.endpoint_opt, args.endpoint, block, "endpoint", where);
  const auto gaussian_text =
      pick_optional(args.gaussian_opt, args.gaussian, block, "gaussian", where);
  const auto atoms_text = pick_optional(args.atoms_opt, args.atoms, block, "atoms", where);
  const bool exact = args.exact_opt->count() > 0 ||
                     (block.contains("exact") && config_value<bool>(block, "exact", where));
  const auto band_text = pick_optional(args.band_opt, args.band, block, "band", where);
  const long start = pick(args.start_opt, args.start, block, "start", 0L, where);
  const bool allow_touching =
      args.touching_opt->count() > 0 ||
      (block.contains("allow_touching") &&
       config_value<bool>(block, "allow_touching", where));
  if (j < 1) {
    throw ConfigError("tube needs --j of at least 1");
  }

  const auto law = shared.law_if_any();
  const int sources = (law ? 1 : 0) + (gaussian_text ? 1 : 0) + (atoms_text ? 1 : 0);
  if (sources != 1) {
    throw ConfigError("tube needs exactly one step source: a law config, "
                      "--gaussian <mean>:<variance>, or --atoms <x>:<p>,...");
  }

  brw::TiltedStepLaw step;
  if (law) {
    step = brw::tilted_step(*law);
  } else if (gaussian_text) {
    const auto [mean, variance] = parse_pair(*gaussian_text, "gaussian step");
    step = brw::GaussianStep{mean, variance};
  } else {
    step = parse_atoms(*atoms_text);
  }
  brw::validate_step_law(step);

  brw::TubeSpec spec;
  spec.j = j;
  spec.lower = brw::parse_profile(lower_text);
  spec.upper = brw::parse_profile(upper_text);
  spec.allow_touching = allow_touching;
  if (endpoint_text) {
    spec.endpoint_window = parse_pair(*endpoint_text, "endpoint window");
  }
  brw::validate_tube_spec(spec);

  json manifest = shared.base_manifest("tube");
  manifest["parameters"] = {{"j", j},
                            {"runs", runs},
                            {"lower", brw::profile_to_string(spec.lower)},
                            {"upper", brw::profile_to_string(spec.upper)},
                            {"exact", exact},
                            {"start", start},
                            {"allow_touching", allow_touching}};
  manifest["parameters"]["endpoint"] =
      endpoint_text ? json(*endpoint_text) : json(nullptr);
  manifest["parameters"]["gaussian"] =
      gaussian_text ? json(*gaussian_text) : json(nullptr);
  manifest["parameters"]["atoms"] = atoms_text ? json(*atoms_text) : json(nullptr);
  manifest["parameters"]["band"] = band_text ? json(*band_text) : json(nullptr);
  manifest["law"] = law ? brw::law_to_json(*law) : json(nullptr);
  brw::ArtifactWriter writer(shared.out_dir(), manifest);

  double estimate = 0.0;
  double std_error = 0.0;
  if (exact) {
    const auto* lattice = std::get_if<brw::DiscreteAtoms>(&step);
    if (lattice == nullptr) {
      throw ConfigError("--exact needs an integer-atom step (--atoms or a "
                        "finite-support law), not a Gaussian step");
    }
    if (!band_text) {
      throw ConfigError("--exact needs --band <lo>:<hi>");
    }
    const auto [lo, hi] = parse_pair(*band_text, "band");
    estimate = brw::tube_probability_exact(*lattice, j, static_cast<long>(lo),
                                           static_cast<long>(hi), start);
  } else {
    brw::RngStream stream(shared.seed(), 0);
    const brw::SurvivalEstimate mc = brw::tube_probability_mc(step, spec, runs, stream);
    estimate = mc.p_hat;
    std_error = mc.std_error;
  }

  const double rate = brw::mogulskii_rate(brw::step_variance(step), spec);
  json payload;
  payload["estimate"] = estimate;
  payload["stderr"] = std_error;
  payload["rate_prediction"] = json_real(rate);
  payload["j_cuberoot_log"] =
      estimate > 0.0 ? json(-std::log(estimate) / std::cbrt(static_cast<double>(j)))
                     : json(nullptr);
  payload["method"] = exact ? "exact" : "mc";
  payload["j"] = j;
  payload["runs"] = exact ? json(nullptr) : json(runs);
  writer.write_json("tube.json", payload);
  writer.write_manifest();
  std::cout << "estimate = " << brw::format_real(estimate);
  if (!exact) {
    std::cout << " +- " << brw::format_real(std_error);
  }
  std::cout << '\n' << "wrote " << writer.path_of("tube.json") << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateArgs {
  std::vector<std::string> barriers;
  std::vector<int> n_values;
  long runs = 10000;
  long cap = 1000000;
  std::string method = "naive";
  bool allow_noncritical = false;
  CLI::Option* barrier_opt = nullptr;
  CLI::Option* n_opt = nullptr;
  CLI::Option* runs_opt = nullptr;
  CLI::Option* cap_opt = nullptr;
  CLI::Option* method_opt = nullptr;
  CLI::Option* noncritical_opt = nullptr;
};

int run_simulate(const Shared& shared, const SimulateArgs& args) {
  const json block = block_of(shared.cfg, "sim");
  const std::string where = "config block 'sim'";
  std::vector<std::string> barrier_texts = args.barriers;
  if (barrier_texts.empty() && shared.cfg.contains("barrier")) {
    barrier_texts.push_back(shared.cfg.at("barrier").get<std::string>());
  }
  if (barrier_texts.empty()) {
    throw ConfigError("simulate needs at least one --barrier (or a 'barrier' "
                      "string in the config file)");
  }
  const auto n_values =
      pick(args.n_opt, args.n_values, block, "n", std::vector<int>{}, where);
  if (n_values.empty()) {
    throw ConfigError("simulate needs at least one --n");
  }
  const long runs = pick(args.runs_opt, args.runs, block, "runs", 10000L, where);
  const long cap = pick(args.cap_opt, args.cap, block, "cap", 1000000L, where);
  const auto method_name =
      pick(args.method_opt, args.method, block, "method", std::string("naive"), where);
  const bool allow_noncritical =
      args.noncritical_opt->count() > 0 ||
      (block.contains("allow_noncritical") &&
       config_value<bool>(block, "allow_noncritical", where));

  brw::SurvivalMethod method;
  if (method_name == "naive") {
    method = brw::NaiveMethod{};
  } else if (method_name == "split") {
    method = brw::SplittingMethod{};
  } else {
    throw ConfigError("unknown method '" + method_name + "' (expected naive or split)");
  }

  const brw::OffspringLaw law = shared.require_law();
  std::vector<brw::Barrier> barriers;
  for (const auto& text : barrier_texts) {
    barriers.push_back(brw::parse_barrier(text));
  }

  json manifest = shared.base_manifest("simulate");
  manifest["parameters"] = {{"barrier", barrier_texts},
                            {"n", n_values},
                            {"runs", runs},
                            {"cap", cap},
                            {"method", method_name},
                            {"allow_noncritical", allow_noncritical}};
  manifest["law"] = brw::law_to_json(law);
  brw::ArtifactWriter writer(shared.out_dir(), manifest);

  brw::SurvivalOptions options;
  options.cap = cap;
  options.workers = shared.workers();
  options.allow_noncritical = allow_noncritical;

  std::vector<std::vector<std::string>> rows;
  for (const auto& barrier : barriers) {
    for (std::size_t slot = 0; slot < n_values.size(); ++slot) {
      // One stream identity per horizon slot: estimates at equal n share
      // their randomness across barriers, so survival is coupled pathwise.
      brw::RngStream stream(shared.seed(), static_cast<std::uint64_t>(slot));
      const auto estimate = brw::survival_probability(law, barrier, n_values[slot],
                                                      runs, method, stream, options);
      const auto a_plus = brw::barrier_a_plus(barrier);
      rows.push_back({a_plus ? cell(*a_plus) : "", std::to_string(n_values[slot]),
                      cell(estimate.p_hat), cell(estimate.std_error)});
    }
  }
  writer.write_csv("survival.csv", {"a", "n", "p_hat", "stderr"}, rows);
  writer.write_manifest();
  std::cout << "wrote " << writer.path_of("survival.csv") << " (" << rows.size()
            << " rows)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// census

struct CensusArgs {
  double a = 0.0;
  double b = 0.0;
  int growth = 2;
  int k_max = 3;
  long runs = 100;
  double eps = 1.0;
  long cap = 0;
  CLI::Option* a_opt = nullptr;
  CLI::Option* b_opt = nullptr;
  CLI::Option* growth_opt = nullptr;
  CLI::Option* k_max_opt = nullptr;
  CLI::Option* runs_opt = nullptr;
  CLI::Option* eps_opt = nullptr;
  CLI::Option* cap_opt = nullptr;
};

int run_census(const Shared& shared, const CensusArgs& args) {
  const json block = block_of(shared.cfg, "sim");
  const std::string where = "config block 'sim'";
  if (args.a_opt->count() == 0 && !block.contains("a")) {
    throw ConfigError("census needs --a (the upper barrier slope)");
  }
  const double a = pick(args.a_opt, args.a, block, "a", 0.0, where);
  const auto b = pick_optional(args.b_opt, args.b, block, "b", where);
  const int growth = pick(args.growth_opt, args.growth, block, "growth", 2, where);
  const int k_max = pick(args.k_max_opt, args.k_max, block, "k_max", 3, where);
  const long runs = pick(args.runs_opt, args.runs, block, "runs", 100L, where);
  const double eps = pick(args.eps_opt, args.eps, block, "eps", 1.0, where);
  const long cap = pick(args.cap_opt, args.cap, block, "cap", 0L, where);

  const brw::OffspringLaw law = shared.require_law();

  json manifest = shared.base_manifest("census");
  manifest["parameters"] = {{"a", a},       {"growth", growth}, {"k_max", k_max},
                            {"runs", runs}, {"eps", eps},       {"cap", cap}};
  manifest["parameters"]["b"] = b ? json(*b) : json(nullptr);
  manifest["law"] = brw::law_to_json(law);
  brw::ArtifactWriter writer(shared.out_dir(), manifest);

  brw::CensusOptions options;
  options.eps = eps;
  options.cap = cap;
  options.workers = shared.workers();
  brw::RngStream stream(shared.seed(), 0);
  const auto records = brw::two_barrier_census(law, a, b, growth, k_max, runs, stream, options);

  std::vector<std::vector<std::string>> rows;
  for (const auto& record : records) {
    rows.push_back({std::to_string(record.k), std::to_string(record.checkpoint),
                    cell(record.mean_count), cell(record.target)});
  }
  writer.write_csv("census.csv", {"k", "n_k", "mean_count", "target"}, rows);
  writer.write_manifest();
  std::cout << "wrote " << writer.path_of("census.csv") << " (" << rows.size()
            << " rows)\n";
  return 0;
}

// ---------------------------------------------------------------------------
// classify

struct ClassifyArgs {
  double sigma_sq = 1.0;
  std::string barrier;
  long stride_min = 2;
  CLI::Option* sigma_opt = nullptr;
  CLI::Option* barrier_opt = nullptr;
  CLI::Option* stride_opt = nullptr;
};

int run_classify(const Shared& shared, const ClassifyArgs& args) {
  const json block = block_of(shared.cfg, "sim");
  std::string barrier_text = args.barrier;
  if (args.barrier_opt->count() == 0) {
    if (!shared.cfg.contains("barrier")) {
      throw ConfigError("classify needs --barrier (or a 'barrier' string in the "
                        "config file)");
    }
    barrier_text = shared.cfg.at("barrier").get<std::string>();
  }
  const long stride_min = pick(args.stride_opt, args.stride_min, block, "stride_min",
                               2L, "config block 'sim'");
  const brw::Barrier barrier = brw::parse_barrier(barrier_text);

  json manifest = shared.base_manifest("classify");
  manifest["parameters"] = {{"sigma_sq", args.sigma_sq},
                            {"barrier", barrier_text},
                            {"stride_min", stride_min}};
  brw::ArtifactWriter writer(shared.out_dir(), manifest);

  const auto result = brw::classify_general_barrier(args.sigma_sq, barrier, stride_min);
  const char* verdict = result.verdict == brw::BarrierVerdict::Extinct
                            ? "Extinct"
                            : result.verdict == brw::BarrierVerdict::Survives
                                  ? "Survives"
                                  : "Unknown";
  json payload;
  payload["verdict"] = verdict;
  payload["reason"] = result.reason;
  const auto a_plus = brw::barrier_a_plus(barrier);
  const auto a_minus = brw::barrier_a_minus(barrier);
  payload["a_plus"] = a_plus ? json_real(*a_plus) : json(nullptr);
  payload["a_minus"] = a_minus ? json_real(*a_minus) : json(nullptr);
  payload["a_c"] = brw::a_critical(args.sigma_sq);
  writer.write_json("classify.json", payload);
  writer.write_manifest();
  std::cout << verdict << ": " << result.reason << '\n'
            << "wrote " << writer.path_of("classify.json") << '\n';
  return 0;
}

// ---------------------------------------------------------------------------
// check-m2o

struct M2oArgs {
  std::vector<int> n_values{3};
  std::string functional = "one";
};

int run_m2o(const Shared& shared, const M2oArgs& args) {
  const brw::OffspringLaw law = shared.require_law();
  brw::PathFunctional functional;
  if (args.functional == "one") {
    functional = brw::One{};
  } else if (args.functional == "below-zero") {
    functional = brw::IndicatorBelowZeroAtN{};
  } else if (args.functional.rfind("tube:", 0) == 0) {
    const std::string width_text = args.functional.substr(5);
    char* end = nullptr;
    const double width = std::strtod(width_text.c_str(), &end);
    if (width_text.empty() || end != width_text.c_str() + width_text.size()) {
      throw ConfigError("functional '" + args.functional +
                        "' has a malformed tube width");
    }
    functional = brw::IndicatorTubeConstant{width};
  } else {
    throw ConfigError("unknown functional '" + args.functional +
                      "' (expected one, below-zero, or tube:<w>)");
  }

  json manifest = shared.base_manifest("check-m2o");
  manifest["parameters"] = {{"n", args.n_values}, {"functional", args.functional}};
  manifest["law"] = brw::law_to_json(law);
  brw::ArtifactWriter writer(shared.out_dir(), manifest);

  json payload;
  payload["functional"] = args.functional;
  payload["rows"] = json::array();
  double max_abs_diff = 0.0;
  for (const int n : args.n_values) {
    const auto report = brw::many_to_one_check(law, n, functional);
    payload["rows"].push_back({{"n", n},
                               {"lhs", report.lhs},
                               {"rhs", report.rhs},
                               {"abs_diff", report.abs_diff}});
    max_abs_diff = std::max(max_abs_diff, report.abs_diff);
  }
  payload["max_abs_diff"] = max_abs_diff;
  writer.write_json("m2o.json", payload);
  writer.write_manifest();
  std::cout << "max |lhs - rhs| = " << brw::format_real(max_abs_diff) << '\n'
            << "wrote " << writer.path_of("m2o.json") << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Branching random walk survival toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Shared shared;
  shared.config_opt =
      app.add_option("--config", shared.config_path, "JSON config file");
  shared.seed_opt = app.add_option(
      "--seed", shared.seed_flag,
      "RNG seed (default: config, then the BRW_SEED environment variable, then 1)");
  shared.out_opt = app.add_option("--out", shared.out_flag,
                                  "output directory for artifacts (default .)");
  shared.workers_opt =
      app.add_option("--workers", shared.workers_flag, "worker thread count");
  shared.law_opt =
      app.add_option("--law-config", shared.law_path, "offspring law JSON file");

  ConstantsArgs constants_args;
  auto* constants_cmd =
      app.add_subcommand("constants", "critical slope and corridor constants");
  constants_args.sigma_opt =
      constants_cmd->add_option("--sigma-sq", constants_args.sigma_sq, "step variance");
  constants_args.a_opt = constants_cmd->add_option(
      "--a", constants_args.a_values, "barrier slopes to tabulate (repeatable)");
  constants_args.e_max_opt = constants_cmd->add_option(
      "--e-max", constants_args.e_max, "largest growth factor tried for E_min");

  ReduceArgs reduce_args;
  auto* reduce_cmd =
      app.add_subcommand("reduce", "tilt a law to the critical boundary case");
  reduce_args.profile_opt = reduce_cmd->add_option(
      "--profile", reduce_args.profile_name, "closed-form transform profile name");

  OdeArgs ode_args;
  auto* ode_cmd = app.add_subcommand("ode", "solve the limit profile equation");
  ode_args.sigma_opt = ode_cmd->add_option("--sigma-sq", ode_args.sigma_sq, "step variance");
  ode_args.a_opt = ode_cmd->add_option("--a", ode_args.a, "barrier slope");
  ode_args.s_opt = ode_cmd->add_option("--s", ode_args.s, "initial value f(0)");
  ode_args.tol_opt = ode_cmd->add_option("--tol", ode_args.tol, "integration tolerance");
  ode_args.horizon_opt = ode_cmd->add_option(
      "--horizon", ode_args.horizon,
      "fixed time horizon; 0 extends until the solution is classified");

  RateArgs rate_args;
  auto* rate_cmd =
      app.add_subcommand("rate", "extinction rate c(a) over a slope grid");
  rate_args.sigma_opt = rate_cmd->add_option("--sigma-sq", rate_args.sigma_sq, "step variance");
  rate_args.a_min_opt = rate_cmd->add_option("--a-min", rate_args.a_min, "first slope");
  rate_cmd->add_option("--a-max", rate_args.a_max, "last slope")->required();
  rate_cmd->add_option("--steps", rate_args.steps, "grid size");
  rate_args.tol_opt = rate_cmd->add_option("--tol", rate_args.tol, "blow-down tolerance");

  TubeArgs tube_args;
  auto* tube_cmd =
      app.add_subcommand("tube", "corridor probability for the reweighted walk");
  tube_args.j_opt = tube_cmd->add_option("--j", tube_args.j, "number of steps");
  tube_args.runs_opt = tube_cmd->add_option("--runs", tube_args.runs, "Monte Carlo runs");
  tube_args.lower_opt =
      tube_cmd->add_option("--lower", tube_args.lower, "lower profile, e.g. const:-1");
  tube_args.upper_opt =
      tube_cmd->add_option("--upper", tube_args.upper, "upper profile, e.g. cbrt:3:0.1");
  tube_args.endpoint_opt = tube_cmd->add_option(
      "--endpoint", tube_args.endpoint, "endpoint window <lo>:<hi> in scaled units");
  tube_args.gaussian_opt = tube_cmd->add_option(
      "--gaussian", tube_args.gaussian, "Gaussian step <mean>:<variance>");
  tube_args.atoms_opt = tube_cmd->add_option(
      "--atoms", tube_args.atoms, "discrete step atoms <x>:<p>,<x>:<p>,...");
  tube_args.exact_opt = tube_cmd->add_flag(
      "--exact", tube_args.exact, "exact banded enumeration instead of Monte Carlo");
  tube_args.band_opt = tube_cmd->add_option(
      "--band", tube_args.band, "integer band <lo>:<hi> for the exact method");
  tube_args.start_opt =
      tube_cmd->add_option("--start", tube_args.start, "start site for the exact method");
  tube_args.touching_opt = tube_cmd->add_flag(
      "--allow-touching", tube_args.allow_touching,
      "let the profiles touch on the step grid");

  SimulateArgs simulate_args;
  auto* simulate_cmd =
      app.add_subcommand("simulate", "survival probability under a barrier");
  simulate_args.barrier_opt = simulate_cmd->add_option(
      "--barrier", simulate_args.barriers,
      "barrier string pow:a | lin:eps | osc:a+:a- | dip:a:a-:stride | table:v,... "
      "(repeatable)");
  simulate_args.n_opt = simulate_cmd->add_option(
      "--n", simulate_args.n_values, "generation horizons (repeatable)");
  simulate_args.runs_opt =
      simulate_cmd->add_option("--runs", simulate_args.runs, "replicates per estimate");
  simulate_args.cap_opt =
      simulate_cmd->add_option("--cap", simulate_args.cap, "population cap");
  simulate_args.method_opt = simulate_cmd->add_option(
      "--method", simulate_args.method, "estimator: naive or split");
  simulate_args.noncritical_opt = simulate_cmd->add_flag(
      "--allow-noncritical", simulate_args.allow_noncritical,
      "skip the criticality gate on the offspring law");

  CensusArgs census_args;
  auto* census_cmd =
      app.add_subcommand("census", "population counts inside a two-sided corridor");
  census_args.a_opt = census_cmd->add_option("--a", census_args.a, "upper barrier slope");
  census_args.b_opt = census_cmd->add_option(
      "--b", census_args.b, "corridor width (default: the persistence root b_a)");
  census_args.growth_opt =
      census_cmd->add_option("--growth", census_args.growth, "checkpoint growth factor");
  census_args.k_max_opt =
      census_cmd->add_option("--k-max", census_args.k_max, "last checkpoint index");
  census_args.runs_opt = census_cmd->add_option("--runs", census_args.runs, "replicates");
  census_args.eps_opt = census_cmd->add_option(
      "--eps", census_args.eps, "slack in the growth target exp(n^(1/3) (b - eps))");
  census_args.cap_opt = census_cmd->add_option(
      "--cap", census_args.cap, "population cap; 0 disables subsampling");

  ClassifyArgs classify_args;
  auto* classify_cmd =
      app.add_subcommand("classify", "survival verdict for a general barrier");
  classify_args.sigma_opt =
      classify_cmd->add_option("--sigma-sq", classify_args.sigma_sq, "step variance");
  classify_args.barrier_opt =
      classify_cmd->add_option("--barrier", classify_args.barrier, "barrier string");
  classify_args.stride_opt = classify_cmd->add_option(
      "--stride-min", classify_args.stride_min,
      "smallest stride the sparse-dip rule accepts as asymptotic");

  M2oArgs m2o_args;
  auto* m2o_cmd =
      app.add_subcommand("check-m2o", "exact population/walk identity check");
  m2o_cmd->add_option("--n", m2o_args.n_values, "depths to check (repeatable)");
  m2o_cmd->add_option("--functional", m2o_args.functional,
                      "path functional: one | below-zero | tube:<w>");

  int rc = 0;
  constants_cmd->callback([&] {
    shared.load_config();
    rc = run_constants(shared, constants_args);
  });
  reduce_cmd->callback([&] {
    shared.load_config();
    rc = run_reduce(shared, reduce_args);
  });
  ode_cmd->callback([&] {
    shared.load_config();
    rc = run_ode(shared, ode_args);
  });
  rate_cmd->callback([&] {
    shared.load_config();
    rc = run_rate(shared, rate_args);
  });
  tube_cmd->callback([&] {
    shared.load_config();
    rc = run_tube(shared, tube_args);
  });
  simulate_cmd->callback([&] {
    shared.load_config();
    rc = run_simulate(shared, simulate_args);
  });
  census_cmd->callback([&] {
    shared.load_config();
    rc = run_census(shared, census_args);
  });
  classify_cmd->callback([&] {
    shared.load_config();
    rc = run_classify(shared, classify_args);
  });
  m2o_cmd->callback([&] {
    shared.load_config();
    rc = run_m2o(shared, m2o_args);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const brw::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 3;
  }
  return rc;
}
