#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "dstop/discounts.hpp"
#include "dstop/solver.hpp"

namespace dstop {

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct McConfig {
  std::int64_t n = 200000;
  double dt = 5e-4;
  std::uint64_t seed = 12345;
};

struct VerifyConfig {
  int quad_n = 64;
  int hermite_n = 64;
  double ie_tol_rel = 5e-3;        // residual cap, relative to c0(0)+c1(0)
  double envelope_slack_dpi = 1.0; // b >= gain root - slack * dpi
  double smooth_fit_slack_dpi = 8.0;
};

struct OutputConfig {
  std::string dir = "out";
  bool csv = true;
  bool binary = true;
  bool svg = true;
};

/// One batch run: exactly one of `example` (catalog row name) or
/// `problem` must be present.
struct RunConfig {
  int schema_version = 1;
  std::optional<std::string> example;
  std::optional<ProblemSpec> problem;
  GridSpec grid;
  McConfig mc;
  VerifyConfig verify;
  OutputConfig outputs;
};

nlohmann::json discount_to_json(const DiscountModel& m);
DiscountModel discount_from_json(const nlohmann::json& j);

nlohmann::json problem_to_json(const ProblemSpec& spec);
ProblemSpec problem_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);

/// Parse a config document; wraps JSON syntax errors in ConfigError.
RunConfig parse_config(const std::string& text);

}  // namespace dstop
