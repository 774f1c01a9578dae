#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "nls/presets.hpp"

namespace nls {

struct RunConfig {
  std::string command;
  nlohmann::json scenario;  // preset name or inline spec object
  int n = 200;
  int steps = 400;
  std::string stepper = "auto";
  int workers = 1;
  nlohmann::json options;     // command-specific options, defaults filled
  nlohmann::json tolerances;  // power_tol, bias_rel_tol, power_cap

  nlohmann::json resolved() const;
};

std::vector<std::string> command_names();

// Strict parse: unknown keys, type mismatches and missing required fields are
// rejected with a path-qualified message.
RunConfig parse_config(const std::string& text);

// Deterministic serialization: sorted keys, floats at 17 significant digits.
std::string dump_json(const nlohmann::json& j);

OperatorSpec spec_from_scenario(const nlohmann::json& scenario, const Resolution& res);
SteppingOptions stepping_options(const RunConfig& cfg);

// Dispatch; writes resolved-config.json, results.json, results.csv (and
// timings.json, which is excluded from the determinism contract) to out_dir.
// Returns 0 on success, 2 on certification/acceptance failure.
int run(const RunConfig& cfg, const std::string& out_dir);

}  // namespace nls
