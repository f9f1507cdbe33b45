#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "orthogeo/errors.hpp"

namespace orthogeo {

// Every knob of a benchmark run. A finalized config fully determines the run:
// dataset, init, optimization, and evaluation have no other inputs, so a
// stored config replays a run exactly.
struct RunConfig {
    std::string method = "orthogeo";  // orthogeo | lora | none

    // Model.
    std::size_t d_feat = 64;
    std::size_t d_emb = 64;
    std::size_t rank = 8;
    double alpha = 16.0;
    std::string sigma_mode = "softplus";  // softplus | direct
    double epsilon = 1e-6;
    std::string theta_init = "normal";  // normal | kaiming
    double s_init = std::nan("");       // auto: -6 for softplus, 0 for direct

    // Optimization.
    double lr = 1e-4;
    std::size_t batch_size = 128;
    double tau = 0.05;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    std::size_t max_steps = 3000;
    std::size_t eval_interval = 50;
    std::size_t patience = 5;
    double min_improve = 1e-4;
    bool early_stop = true;

    // Dataset.
    std::size_t depth = 3;
    std::size_t branching = 5;
    std::size_t per_concept = 24;
    double noise = 0.6;
    double mix = 0.3;
    double gamma = 0.5;

    std::uint64_t seed = 1;

    // Resolves the auto defaults and checks ranges. Call before using the
    // config for anything.
    void finalize() {
        if (std::isnan(s_init)) s_init = sigma_mode == "direct" ? 0.0 : -6.0;
        if (method != "orthogeo" && method != "lora" && method != "none") {
            throw ConfigError("config: method must be orthogeo, lora, or none");
        }
        if (sigma_mode != "softplus" && sigma_mode != "direct") {
            throw ConfigError("config: sigma_mode must be softplus or direct");
        }
        if (theta_init != "normal" && theta_init != "kaiming") {
            throw ConfigError("config: theta_init must be normal or kaiming");
        }
        if (d_feat == 0 || d_emb == 0) throw ConfigError("config: d_feat and d_emb must be positive");
        if (method != "none") {
            if (rank == 0) throw ConfigError("config: rank must be a positive integer");
            if (rank > std::min(d_feat, d_emb)) throw ConfigError("config: rank exceeds min(d_feat, d_emb)");
            if (!(alpha > 0.0)) throw ConfigError("config: alpha must be positive");
            if (!(epsilon > 0.0)) throw ConfigError("config: epsilon must be positive");
        }
        if (!(lr >= 0.0)) throw ConfigError("config: lr must be non-negative");
        if (batch_size == 0) throw ConfigError("config: batch_size must be positive");
        if (!(tau > 0.0)) throw ConfigError("config: tau must be positive");
        if (!(weight_decay >= 0.0)) throw ConfigError("config: weight_decay must be non-negative");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
            throw ConfigError("config: betas must lie in [0, 1)");
        }
        if (!(eps_adam > 0.0)) throw ConfigError("config: eps_adam must be positive");
        if (eval_interval == 0) throw ConfigError("config: eval_interval must be positive");
        if (patience == 0) throw ConfigError("config: patience must be positive");
        if (depth < 1) throw ConfigError("config: depth must be >= 1");
        if (branching < 2) throw ConfigError("config: branching must be >= 2");
        if (per_concept == 0) throw ConfigError("config: per_concept must be positive");
        if (noise < 0.0) throw ConfigError("config: noise must be non-negative");
        if (mix < 0.0 || mix > 1.0) throw ConfigError("config: mix must lie in [0, 1]");
        if (!(gamma >= 0.0)) throw ConfigError("config: gamma must be non-negative");
    }
};

namespace config_io {

inline nlohmann::json to_json(const RunConfig& c) {
    if (std::isnan(c.s_init)) throw ContractError("config: finalize() before serializing");
    return nlohmann::json{
        {"method", c.method},
        {"d_feat", c.d_feat},
        {"d_emb", c.d_emb},
        {"rank", c.rank},
        {"alpha", c.alpha},
        {"sigma_mode", c.sigma_mode},
        {"epsilon", c.epsilon},
        {"theta_init", c.theta_init},
        {"s_init", c.s_init},
        {"lr", c.lr},
        {"batch_size", c.batch_size},
        {"tau", c.tau},
        {"weight_decay", c.weight_decay},
        {"beta1", c.beta1},
        {"beta2", c.beta2},
        {"eps_adam", c.eps_adam},
        {"max_steps", c.max_steps},
        {"eval_interval", c.eval_interval},
        {"patience", c.patience},
        {"min_improve", c.min_improve},
        {"early_stop", c.early_stop},
        {"depth", c.depth},
        {"branching", c.branching},
        {"per_concept", c.per_concept},
        {"noise", c.noise},
        {"mix", c.mix},
        {"gamma", c.gamma},
        {"seed", c.seed},
    };
}

// Applies one key=value pair; shared by the flat-file parser, the JSON
// loader, and CLI overrides so all three agree on key names.
inline void apply_key(RunConfig& c, const std::string& key, const nlohmann::json& value) {
    auto as_size = [&]() -> std::size_t { return value.get<std::size_t>(); };
    auto as_double = [&]() -> double { return value.get<double>(); };
    if (key == "method") c.method = value.get<std::string>();
    else if (key == "d_feat") c.d_feat = as_size();
    else if (key == "d_emb") c.d_emb = as_size();
    else if (key == "rank") c.rank = as_size();
    else if (key == "alpha") c.alpha = as_double();
    else if (key == "sigma_mode") c.sigma_mode = value.get<std::string>();
    else if (key == "epsilon") c.epsilon = as_double();
    else if (key == "theta_init") c.theta_init = value.get<std::string>();
    else if (key == "s_init") c.s_init = as_double();
    else if (key == "lr") c.lr = as_double();
    else if (key == "batch_size") c.batch_size = as_size();
    else if (key == "tau") c.tau = as_double();
    else if (key == "weight_decay") c.weight_decay = as_double();
    else if (key == "beta1") c.beta1 = as_double();
    else if (key == "beta2") c.beta2 = as_double();
    else if (key == "eps_adam") c.eps_adam = as_double();
    else if (key == "max_steps") c.max_steps = as_size();
    else if (key == "eval_interval") c.eval_interval = as_size();
    else if (key == "patience") c.patience = as_size();
    else if (key == "min_improve") c.min_improve = as_double();
    else if (key == "early_stop") c.early_stop = value.is_boolean() ? value.get<bool>() : value.get<int>() != 0;
    else if (key == "depth") c.depth = as_size();
    else if (key == "branching") c.branching = as_size();
    else if (key == "per_concept") c.per_concept = as_size();
    else if (key == "noise") c.noise = as_double();
    else if (key == "mix") c.mix = as_double();
    else if (key == "gamma") c.gamma = as_double();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else throw ConfigError("config: unknown key '" + key + "'");
}

inline RunConfig from_json(const nlohmann::json& j) {
    RunConfig c;
    for (auto it = j.begin(); it != j.end(); ++it) apply_key(c, it.key(), it.value());
    return c;
}

// Interprets one textual value from a key=value file. Booleans and strings
// are detected by key; everything else parses as a number.
inline void apply_text_pair(RunConfig& c, const std::string& key, const std::string& text) {
    if (key == "method" || key == "sigma_mode" || key == "theta_init") {
        apply_key(c, key, nlohmann::json(text));
        return;
    }
    if (key == "early_stop") {
        if (text == "true" || text == "1") c.early_stop = true;
        else if (text == "false" || text == "0") c.early_stop = false;
        else throw ConfigError("config: expected true/false for early_stop, got '" + text + "'");
        return;
    }
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        apply_key(c, key, nlohmann::json(v));
    } catch (const std::logic_error&) {
        throw ConfigError("config: could not parse value '" + text + "' for key '" + key + "'");
    }
}

// Accepts either a flat key=value file ('#' comments allowed) or JSON: a
// plain config object, or a run manifest whose "config" member is reused.
inline RunConfig parse_config_text(const std::string& text) {
    // Sniff for JSON.
    for (char ch : text) {
        if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') continue;
        if (ch == '{') {
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(text);
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(std::string("config: invalid JSON: ") + e.what());
            }
            if (j.contains("config")) j = j["config"];
            try {
                return from_json(j);
            } catch (const nlohmann::json::exception& e) {
                throw ConfigError(std::string("config: bad value type: ") + e.what());
            }
        }
        break;
    }

    RunConfig c;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::size_t begin = line.find_first_not_of(" \t\r");
        if (begin == std::string::npos) continue;
        std::size_t end = line.find_last_not_of(" \t\r");
        line = line.substr(begin, end - begin + 1);
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key=value");
        }
        auto trim = [](std::string s) {
            const std::size_t b = s.find_first_not_of(" \t");
            if (b == std::string::npos) return std::string();
            const std::size_t e = s.find_last_not_of(" \t");
            return s.substr(b, e - b + 1);
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key on line " + std::to_string(lineno));
        apply_text_pair(c, key, value);
    }
    return c;
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << content;
    if (!out) throw IoError("failed while writing '" + path + "'");
}

inline RunConfig load_config(const std::string& path) { return parse_config_text(read_file(path)); }

}  // namespace config_io

}  // namespace orthogeo
