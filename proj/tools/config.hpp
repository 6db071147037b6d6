#pragma once

// JSON <-> ExperimentConfig. Lives with the CLI so the library itself does
// not depend on a JSON package.

#include <svolterra/harness.hpp>

#include <json.hpp>

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

namespace svolterra::cli {

using nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& [key, value] : j.items()) {
        if (!allowed.contains(key)) throw std::invalid_argument("unknown key '" + key + "' in " + where);
    }
}

}  // namespace detail

inline void apply_scheme_json(const json& j, SchemeConfig& s) {
    if (!j.is_object()) throw std::invalid_argument("config 'scheme' must be an object");
    detail::reject_unknown_keys(
        j, {"kind", "theta", "substeps", "fp_tol", "fp_max_iter", "diffusion_rule", "iterated_rule"}, "'scheme'");
    if (j.contains("kind")) s.scheme = parse_scheme(j.at("kind").get<std::string>());
    if (j.contains("theta")) s.theta = j.at("theta").get<double>();
    if (j.contains("substeps")) s.substeps = j.at("substeps").get<std::size_t>();
    if (j.contains("fp_tol")) s.fp_tol = j.at("fp_tol").get<double>();
    if (j.contains("fp_max_iter")) s.fp_max_iter = j.at("fp_max_iter").get<std::size_t>();
    if (j.contains("diffusion_rule")) s.diffusion_rule = parse_diffusion_rule(j.at("diffusion_rule").get<std::string>());
    if (j.contains("iterated_rule")) s.iterated_rule = parse_iterated_rule(j.at("iterated_rule").get<std::string>());
}

/// Overlays the fields present in `j` onto `cfg`; absent fields keep their
/// current values. Type mismatches surface as std::invalid_argument.
inline void apply_json(const json& j, ExperimentConfig& cfg) {
    if (!j.is_object()) throw std::invalid_argument("config document must be a JSON object");
    detail::reject_unknown_keys(j,
                                {"preset", "params", "scheme", "steps", "n_fine", "n_paths", "p_norm", "seed",
                                 "oracle", "reference_rule", "workers", "tolerance", "output"},
                                "config");
    try {
        if (j.contains("preset")) cfg.preset = j.at("preset").get<std::string>();
        if (j.contains("params")) {
            for (const auto& [key, value] : j.at("params").items()) cfg.params[key] = value.get<double>();
        }
        if (j.contains("scheme")) apply_scheme_json(j.at("scheme"), cfg.scheme);
        if (j.contains("steps")) cfg.steps = j.at("steps").get<std::vector<std::size_t>>();
        if (j.contains("n_fine")) cfg.n_fine = j.at("n_fine").get<std::size_t>();
        if (j.contains("n_paths")) cfg.n_paths = j.at("n_paths").get<std::size_t>();
        if (j.contains("p_norm")) cfg.p_norm = j.at("p_norm").get<double>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("oracle")) cfg.oracle = parse_oracle(j.at("oracle").get<std::string>());
        if (j.contains("reference_rule")) {
            cfg.reference_rule = parse_diffusion_rule(j.at("reference_rule").get<std::string>());
        }
        if (j.contains("workers")) cfg.workers = j.at("workers").get<std::size_t>();
        if (j.contains("tolerance") && !j.at("tolerance").is_null()) cfg.tolerance = j.at("tolerance").get<double>();
        if (j.contains("output")) cfg.output = j.at("output").get<std::string>();
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("bad config value: ") + e.what());
    }
}

inline json to_json(const ExperimentConfig& cfg) {
    json j;
    j["preset"] = cfg.preset;
    j["params"] = json::object();
    for (const auto& [k, v] : cfg.params) j["params"][k] = v;
    j["scheme"] = {{"kind", to_string(cfg.scheme.scheme)},
                   {"theta", cfg.scheme.theta},
                   {"substeps", cfg.scheme.substeps},
                   {"fp_tol", cfg.scheme.fp_tol},
                   {"fp_max_iter", cfg.scheme.fp_max_iter},
                   {"diffusion_rule", to_string(cfg.scheme.diffusion_rule)},
                   {"iterated_rule", to_string(cfg.scheme.iterated_rule)}};
    j["steps"] = cfg.steps;
    j["n_fine"] = cfg.n_fine;
    j["n_paths"] = cfg.n_paths;
    j["p_norm"] = cfg.p_norm;
    j["seed"] = cfg.seed;
    j["oracle"] = to_string(cfg.oracle);
    j["reference_rule"] = to_string(cfg.reference_rule);
    j["workers"] = cfg.workers;
    j["tolerance"] = cfg.tolerance ? json(*cfg.tolerance) : json(nullptr);
    j["output"] = cfg.output;
    return j;
}

inline ExperimentConfig load_config(const std::string& file, ExperimentConfig cfg = {}) {
    std::ifstream in(file);
    if (!in) throw std::invalid_argument("cannot open config file '" + file + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw std::invalid_argument("config file '" + file + "' is not valid JSON: " + e.what());
    }
    apply_json(j, cfg);
    return cfg;
}

}  // namespace svolterra::cli
