#pragma once

#include <string>
#include <vector>

#include "aodfill/pipeline.hpp"
#include "aodfill/synth.hpp"
#include "json.hpp"

namespace aodfill::cli {

struct SynthConfig {
    SceneSpec scene;
    int days = 1;
};

/// Loads the JSON config file (optional) and applies dotted-path overrides
/// like `filter.window=11` or `synth.n_stations=80`; override values parse
/// as JSON when possible and fall back to strings.
nlohmann::json load_config(const std::string& config_path,
                           const std::vector<std::string>& overrides);

RunConfig parse_run_config(const nlohmann::json& j);
SynthConfig parse_synth_config(const nlohmann::json& j);
FilterConfig parse_filter_config(const nlohmann::json& j, bool default_include_center);
int parse_threads(const nlohmann::json& j);

} // namespace aodfill::cli
