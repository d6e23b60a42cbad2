#include "config.hpp"

#include <fstream>

#include "aodfill/errors.hpp"

namespace aodfill::cli {

namespace {

using nlohmann::json;

json parse_override_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text); // bare strings (paths, dates) need no quoting
    }
}

template <typename T>
T require(const json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("missing config key '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for config key '" + key + "'");
    }
}

template <typename T>
T optional(const json& j, const std::string& key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError("bad value for config key '" + key + "'");
    }
}

DateStamp require_date(const json& j, const std::string& key) {
    try {
        return DateStamp::parse(require<std::string>(j, key));
    } catch (const InputError& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

} // namespace

json load_config(const std::string& config_path,
                 const std::vector<std::string>& overrides) {
    json cfg = json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path, std::ios::binary);
        if (!in) throw ConfigError("cannot open config file " + config_path);
        try {
            cfg = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("bad JSON in " + config_path + ": " + e.what());
        }
        if (!cfg.is_object())
            throw ConfigError("config root must be a JSON object in " + config_path);
    }
    for (const std::string& item : overrides) {
        const auto eq = item.find('=');
        if (eq == std::string::npos || eq == 0)
            throw ConfigError("override '" + item + "' is not key=value");
        std::string pointer = "/" + item.substr(0, eq);
        for (char& c : pointer)
            if (c == '.') c = '/';
        try {
            cfg[json::json_pointer(pointer)] = parse_override_value(item.substr(eq + 1));
        } catch (const json::exception& e) {
            throw ConfigError("cannot apply override '" + item + "': " + e.what());
        }
    }
    return cfg;
}

FilterConfig parse_filter_config(const json& j, bool default_include_center) {
    FilterConfig fc;
    fc.include_center = default_include_center;
    if (j.contains("filter")) {
        const json& f = j.at("filter");
        fc.window = optional<int>(f, "window", fc.window);
        fc.include_center = optional<bool>(f, "include_center", fc.include_center);
        fc.min_valid = optional<int>(f, "min_valid", fc.min_valid);
    }
    try {
        fc.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return fc;
}

int parse_threads(const json& j) { return optional<int>(j, "threads", 0); }

RunConfig parse_run_config(const json& j) {
    RunConfig cfg;
    cfg.input_root = require<std::string>(j, "input_root");
    cfg.output_root = require<std::string>(j, "output_root");
    cfg.date_start = require_date(j, "date_start");
    cfg.date_end = require_date(j, "date_end");
    cfg.filter = parse_filter_config(j, false);
    cfg.covariate_tags = require<std::vector<std::string>>(j, "covariate_tags");
    cfg.station_file = require<std::string>(j, "station_file");
    cfg.seed = optional<std::uint64_t>(j, "seed", 0);
    cfg.search_iters = optional<int>(j, "search_iters", 10);
    cfg.cv_k = optional<int>(j, "cv_k", 5);
    cfg.threads = parse_threads(j);
    cfg.apply_aod_scale = optional<bool>(j, "apply_aod_scale", false);
    cfg.validate();
    return cfg;
}

SynthConfig parse_synth_config(const json& j) {
    if (!j.contains("synth")) throw ConfigError("missing config section 'synth'");
    const json& s = j.at("synth");
    SynthConfig out;
    out.scene.n_cols = optional<int>(s, "n_cols", out.scene.n_cols);
    out.scene.n_rows = optional<int>(s, "n_rows", out.scene.n_rows);
    out.scene.cell_size = optional<double>(s, "cell_size", out.scene.cell_size);
    out.scene.correlation_length =
        optional<double>(s, "correlation_length", out.scene.correlation_length);
    out.scene.missing_fraction =
        optional<double>(s, "missing_fraction", out.scene.missing_fraction);
    out.scene.n_covariates = optional<int>(s, "n_covariates", out.scene.n_covariates);
    out.scene.noise_sd = optional<double>(s, "noise_sd", out.scene.noise_sd);
    out.scene.n_stations = optional<int>(s, "n_stations", out.scene.n_stations);
    if (s.contains("start_date")) out.scene.date = require_date(s, "start_date");
    out.scene.seed = optional<std::uint64_t>(s, "seed", 0);
    out.days = optional<int>(s, "days", 1);
    if (out.days < 1) throw ConfigError("synth.days must be >= 1");
    try {
        out.scene.validate();
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    return out;
}

} // namespace aodfill::cli
