#pragma once

#include <string>
#include <vector>

#include "sepic/sim.hpp"

namespace sepic {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parse and validate a scenario config from JSON text. Unknown keys are
// rejected with the list of valid keys at that level.
ScenarioConfig parse_config_text(const std::string& text, const std::string& origin = "<config>");
ScenarioConfig parse_config_file(const std::string& path);

// Bundled scenario names ("scenario1", "scenario2").
std::vector<std::string> bundled_scenarios();
const std::string& bundled_scenario_text(const std::string& name);  // throws ConfigError

// Resolve a --config argument: an existing file path, or a bundled name.
ScenarioConfig load_config(const std::string& path_or_name);

// Apply "dot.path=value" overrides onto the underlying JSON and re-validate.
ScenarioConfig apply_overrides(const std::string& base_text,
                               const std::vector<std::string>& overrides,
                               const std::string& origin = "<config>");

// JSON text for a config source (file contents or bundled text).
std::string config_text(const std::string& path_or_name);

}  // namespace sepic
