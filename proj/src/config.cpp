#include "dstop/config.hpp"

#include <cmath>
#include <set>
#include <vector>

namespace dstop {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

void expect_object(const json& j, const std::string& where) {
  if (!j.is_object()) fail(where, "expected an object");
}

void expect_keys(const json& j, const std::set<std::string>& allowed,
                 const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!allowed.count(it.key())) fail(where, "unknown key \"" + it.key() + "\"");
  }
}

double number_at(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) fail(where, "missing \"" + key + "\"");
  if (!j.at(key).is_number()) fail(where, "\"" + key + "\" must be a number");
  return j.at(key).get<double>();
}

double number_or(const json& j, const std::string& key, double dflt,
                 const std::string& where) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_number()) fail(where, "\"" + key + "\" must be a number");
  return j.at(key).get<double>();
}

int int_or(const json& j, const std::string& key, int dflt, const std::string& where) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_number_integer()) fail(where, "\"" + key + "\" must be an integer");
  return j.at(key).get<int>();
}

bool bool_or(const json& j, const std::string& key, bool dflt, const std::string& where) {
  if (!j.contains(key)) return dflt;
  if (!j.at(key).is_boolean()) fail(where, "\"" + key + "\" must be a boolean");
  return j.at(key).get<bool>();
}

std::vector<double> array_at(const json& j, const std::string& key,
                             const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_array())
    fail(where, "missing array \"" + key + "\"");
  std::vector<double> out;
  for (const auto& v : j.at(key)) {
    if (!v.is_number()) fail(where, "\"" + key + "\" must hold numbers");
    out.push_back(v.get<double>());
  }
  return out;
}

AssumptionMode mode_or(const json& j, const std::string& where) {
  if (!j.contains("mode")) return AssumptionMode::strict;
  const auto s = j.at("mode").get<std::string>();
  if (s == "strict") return AssumptionMode::strict;
  if (s == "relaxed") return AssumptionMode::relaxed;
  fail(where, "\"mode\" must be \"strict\" or \"relaxed\"");
}

const char* mode_name(AssumptionMode m) {
  return m == AssumptionMode::strict ? "strict" : "relaxed";
}

}  // namespace

nlohmann::json discount_to_json(const DiscountModel& m) {
  json j;
  j["scale"] = m.scale();
  switch (m.kind()) {
    case DiscountKind::exponential:
      j["kind"] = "exponential";
      j["rate"] = m.rate();
      break;
    case DiscountKind::linear:
      j["kind"] = "linear";
      j["intercept"] = m.intercept();
      j["slope"] = m.slope();
      break;
    case DiscountKind::smoothed_step_mix: {
      j["kind"] = "smoothed_step_mix";
      j["intercept"] = m.intercept();
      j["slope"] = m.slope();
      j["sharpness"] = m.sharpness();
      json steps = json::array();
      for (const StepComponent& s : m.steps())
        steps.push_back({{"weight", s.weight}, {"center", s.center}});
      j["steps"] = steps;
      break;
    }
    case DiscountKind::tabulated:
      j["kind"] = "tabulated";
      j["t"] = m.knot_t();
      j["c"] = m.knot_c();
      j["dc"] = m.knot_dc();
      break;
  }
  if (m.kind() == DiscountKind::tabulated) {
    if (auto lim = m.limit_at_infinity()) j["limit_at_infinity"] = *lim;
  }
  return j;
}

DiscountModel discount_from_json(const nlohmann::json& j) {
  const std::string where = "discount";
  expect_object(j, where);
  if (!j.contains("kind") || !j.at("kind").is_string()) fail(where, "missing \"kind\"");
  const auto kind = j.at("kind").get<std::string>();
  const double scale = number_or(j, "scale", 1.0, where);

  if (kind == "exponential") {
    expect_keys(j, {"kind", "scale", "rate"}, where);
    return DiscountModel::exponential(number_at(j, "rate", where), scale);
  }
  if (kind == "linear") {
    expect_keys(j, {"kind", "scale", "intercept", "slope"}, where);
    return DiscountModel::linear(number_at(j, "intercept", where),
                                 number_at(j, "slope", where), scale);
  }
  if (kind == "smoothed_step_mix") {
    expect_keys(j, {"kind", "scale", "intercept", "slope", "sharpness", "steps"}, where);
    std::vector<StepComponent> steps;
    if (!j.contains("steps") || !j.at("steps").is_array())
      fail(where, "missing array \"steps\"");
    for (const auto& s : j.at("steps")) {
      expect_object(s, where + ".steps");
      expect_keys(s, {"weight", "center"}, where + ".steps");
      steps.push_back({number_at(s, "weight", where + ".steps"),
                       number_at(s, "center", where + ".steps")});
    }
    return DiscountModel::smoothed_step_mix(number_at(j, "intercept", where),
                                            number_at(j, "slope", where), std::move(steps),
                                            number_at(j, "sharpness", where), scale);
  }
  if (kind == "tabulated") {
    expect_keys(j, {"kind", "scale", "t", "c", "dc", "limit_at_infinity"}, where);
    DiscountModel m = DiscountModel::tabulated(array_at(j, "t", where),
                                               array_at(j, "c", where),
                                               array_at(j, "dc", where), scale);
    if (j.contains("limit_at_infinity"))
      m.declare_limit_at_infinity(number_at(j, "limit_at_infinity", where));
    return m;
  }
  fail(where, "unknown kind \"" + kind + "\"");
}

nlohmann::json problem_to_json(const ProblemSpec& spec) {
  json j;
  j["a"] = spec.signal_gap;
  j["b"] = spec.low_drift;
  j["prior"] = spec.prior;
  if (spec.horizon)
    j["horizon"] = *spec.horizon;
  else
    j["horizon"] = "inf";
  const DiscountPair& pair = spec.discounts;
  if (pair.survival0 && pair.survival1) {
    j["original"] = {{"survival0", discount_to_json(*pair.survival0)},
                     {"survival1", discount_to_json(*pair.survival1)},
                     {"mode", mode_name(pair.mode)}};
  } else {
    j["discounts"] = {{"c0", discount_to_json(pair.c0)},
                      {"c1", discount_to_json(pair.c1)},
                      {"mode", mode_name(pair.mode)}};
  }
  return j;
}

ProblemSpec problem_from_json(const nlohmann::json& j) {
  const std::string where = "problem";
  expect_object(j, where);
  expect_keys(j, {"a", "b", "prior", "horizon", "original", "discounts"}, where);

  ProblemSpec spec;
  spec.signal_gap = number_at(j, "a", where);
  spec.low_drift = number_at(j, "b", where);
  spec.prior = number_or(j, "prior", 0.5, where);

  if (!j.contains("horizon")) fail(where, "missing \"horizon\"");
  const json& h = j.at("horizon");
  if (h.is_string()) {
    const auto s = h.get<std::string>();
    if (s != "inf" && s != "infinity")
      fail(where, "\"horizon\" string must be \"inf\"");
    spec.horizon = std::nullopt;
  } else if (h.is_number()) {
    spec.horizon = h.get<double>();
  } else {
    fail(where, "\"horizon\" must be a number or \"inf\"");
  }

  const bool has_orig = j.contains("original"), has_pair = j.contains("discounts");
  if (has_orig == has_pair)
    fail(where, "need exactly one of \"original\" or \"discounts\"");

  try {
    if (has_orig) {
      const json& o = j.at("original");
      expect_object(o, where + ".original");
      expect_keys(o, {"survival0", "survival1", "mode"}, where + ".original");
      if (!o.contains("survival0") || !o.contains("survival1"))
        fail(where + ".original", "missing \"survival0\" or \"survival1\"");
      spec.discounts = embed_original(spec.signal_gap, spec.low_drift,
                                      discount_from_json(o.at("survival0")),
                                      discount_from_json(o.at("survival1")),
                                      mode_or(o, where + ".original"));
    } else {
      const json& d = j.at("discounts");
      expect_object(d, where + ".discounts");
      expect_keys(d, {"c0", "c1", "mode"}, where + ".discounts");
      if (!d.contains("c0") || !d.contains("c1"))
        fail(where + ".discounts", "missing \"c0\" or \"c1\"");
      spec.discounts.c0 = discount_from_json(d.at("c0"));
      spec.discounts.c1 = discount_from_json(d.at("c1"));
      spec.discounts.mode = mode_or(d, where + ".discounts");
      spec.discounts.deadline_interpretable = false;
    }
  } catch (const std::invalid_argument& e) {
    // model construction errors (bad embedding signs, malformed tables)
    fail(where, e.what());
  }

  try {
    check_problem(spec);
  } catch (const std::invalid_argument& e) {
    fail(where, e.what());
  }
  return spec;
}

nlohmann::json config_to_json(const RunConfig& cfg) {
  json j;
  j["schema_version"] = cfg.schema_version;
  if (cfg.example) j["example"] = *cfg.example;
  if (cfg.problem) j["problem"] = problem_to_json(*cfg.problem);
  j["grid"] = {{"nt", cfg.grid.nt},
               {"npi", cfg.grid.npi},
               {"theta_weight", cfg.grid.theta_weight},
               {"psor_tol", cfg.grid.psor_tol},
               {"psor_max_iter", cfg.grid.psor_max_iter},
               {"psor_omega", cfg.grid.psor_omega},
               {"rannacher_steps", cfg.grid.rannacher_steps},
               {"horizon_tail_tol", cfg.grid.horizon_tail_tol},
               {"max_doublings", cfg.grid.max_doublings},
               {"initial_horizon", cfg.grid.initial_horizon}};
  j["mc"] = {{"n", cfg.mc.n}, {"dt", cfg.mc.dt}, {"seed", cfg.mc.seed}};
  j["verify"] = {{"quad_n", cfg.verify.quad_n},
                 {"hermite_n", cfg.verify.hermite_n},
                 {"ie_tol_rel", cfg.verify.ie_tol_rel},
                 {"envelope_slack_dpi", cfg.verify.envelope_slack_dpi},
                 {"smooth_fit_slack_dpi", cfg.verify.smooth_fit_slack_dpi}};
  j["outputs"] = {{"dir", cfg.outputs.dir},
                  {"csv", cfg.outputs.csv},
                  {"binary", cfg.outputs.binary},
                  {"svg", cfg.outputs.svg}};
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  const std::string where = "config";
  expect_object(j, where);
  expect_keys(j, {"schema_version", "example", "problem", "grid", "mc", "verify", "outputs"},
              where);

  RunConfig cfg;
  if (!j.contains("schema_version") || !j.at("schema_version").is_number_integer())
    fail(where, "missing integer \"schema_version\"");
  cfg.schema_version = j.at("schema_version").get<int>();
  if (cfg.schema_version != 1) fail(where, "unsupported schema_version");

  const bool has_example = j.contains("example"), has_problem = j.contains("problem");
  if (has_example == has_problem)
    fail(where, "need exactly one of \"example\" or \"problem\"");
  if (has_example) {
    if (!j.at("example").is_string()) fail(where, "\"example\" must be a string");
    cfg.example = j.at("example").get<std::string>();
  } else {
    cfg.problem = problem_from_json(j.at("problem"));
  }

  if (j.contains("grid")) {
    const json& g = j.at("grid");
    expect_object(g, "grid");
    expect_keys(g,
                {"nt", "npi", "theta_weight", "psor_tol", "psor_max_iter", "psor_omega",
                 "rannacher_steps", "horizon_tail_tol", "max_doublings", "initial_horizon"},
                "grid");
    cfg.grid.nt = int_or(g, "nt", cfg.grid.nt, "grid");
    cfg.grid.npi = int_or(g, "npi", cfg.grid.npi, "grid");
    cfg.grid.theta_weight = number_or(g, "theta_weight", cfg.grid.theta_weight, "grid");
    cfg.grid.psor_tol = number_or(g, "psor_tol", cfg.grid.psor_tol, "grid");
    cfg.grid.psor_max_iter = int_or(g, "psor_max_iter", cfg.grid.psor_max_iter, "grid");
    cfg.grid.psor_omega = number_or(g, "psor_omega", cfg.grid.psor_omega, "grid");
    cfg.grid.rannacher_steps =
        int_or(g, "rannacher_steps", cfg.grid.rannacher_steps, "grid");
    cfg.grid.horizon_tail_tol =
        number_or(g, "horizon_tail_tol", cfg.grid.horizon_tail_tol, "grid");
    cfg.grid.max_doublings = int_or(g, "max_doublings", cfg.grid.max_doublings, "grid");
    cfg.grid.initial_horizon =
        number_or(g, "initial_horizon", cfg.grid.initial_horizon, "grid");
  }
  if (j.contains("mc")) {
    const json& m = j.at("mc");
    expect_object(m, "mc");
    expect_keys(m, {"n", "dt", "seed"}, "mc");
    if (m.contains("n")) {
      if (!m.at("n").is_number_integer()) fail("mc", "\"n\" must be an integer");
      cfg.mc.n = m.at("n").get<std::int64_t>();
    }
    cfg.mc.dt = number_or(m, "dt", cfg.mc.dt, "mc");
    if (m.contains("seed")) {
      if (!m.at("seed").is_number_integer()) fail("mc", "\"seed\" must be an integer");
      cfg.mc.seed = m.at("seed").get<std::uint64_t>();
    }
  }
  if (j.contains("verify")) {
    const json& v = j.at("verify");
    expect_object(v, "verify");
    expect_keys(v,
                {"quad_n", "hermite_n", "ie_tol_rel", "envelope_slack_dpi",
                 "smooth_fit_slack_dpi"},
                "verify");
    cfg.verify.quad_n = int_or(v, "quad_n", cfg.verify.quad_n, "verify");
    cfg.verify.hermite_n = int_or(v, "hermite_n", cfg.verify.hermite_n, "verify");
    cfg.verify.ie_tol_rel = number_or(v, "ie_tol_rel", cfg.verify.ie_tol_rel, "verify");
    cfg.verify.envelope_slack_dpi =
        number_or(v, "envelope_slack_dpi", cfg.verify.envelope_slack_dpi, "verify");
    cfg.verify.smooth_fit_slack_dpi =
        number_or(v, "smooth_fit_slack_dpi", cfg.verify.smooth_fit_slack_dpi, "verify");
  }
  if (j.contains("outputs")) {
    const json& o = j.at("outputs");
    expect_object(o, "outputs");
    expect_keys(o, {"dir", "csv", "binary", "svg"}, "outputs");
    if (o.contains("dir")) {
      if (!o.at("dir").is_string()) fail("outputs", "\"dir\" must be a string");
      cfg.outputs.dir = o.at("dir").get<std::string>();
    }
    cfg.outputs.csv = bool_or(o, "csv", cfg.outputs.csv, "outputs");
    cfg.outputs.binary = bool_or(o, "binary", cfg.outputs.binary, "outputs");
    cfg.outputs.svg = bool_or(o, "svg", cfg.outputs.svg, "outputs");
  }

  try {
    check_grid(cfg.grid);
  } catch (const std::invalid_argument& e) {
    fail("grid", e.what());
  }
  if (cfg.mc.n < 1) fail("mc", "\"n\" must be >= 1");
  if (!(cfg.mc.dt > 0.0)) fail("mc", "\"dt\" must be > 0");
  return cfg;
}

RunConfig parse_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return config_from_json(j);
}

}  // namespace dstop
