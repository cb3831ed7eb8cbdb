#pragma once

#include <cstdlib>
#include <map>
#include <sstream>
#include <string>

#include "flownas/cost.hpp"
#include "flownas/errors.hpp"
#include "flownas/io.hpp"
#include "flownas/search_space.hpp"
#include "flownas/train.hpp"

namespace flownas {

// Minimal declarative config: "[section]" headers and "key = value" lines,
// '#' comments, bare or double-quoted values. Unknown keys are errors so
// typos never pass silently.
using ConfigMap = std::map<std::string, std::map<std::string, std::string>>;

inline std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline ConfigMap parse_config_text(const std::string& text) {
    ConfigMap map;
    std::istringstream is(text);
    std::string raw, section;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) + ": unterminated section");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        if (key.empty() || value.empty())
            throw ConfigError("config line " + std::to_string(line_no) + ": empty key or value");
        map[section][key] = value;
    }
    return map;
}

struct RunConfig {
    // [dataset]
    std::string dataset_path;
    std::string test_dataset_path;
    // [preprocess]
    std::string pcap_dir;
    int strategy = 2;
    int length = 784;
    std::string labels_path;
    std::string out_path;
    // [thresholds]
    HwThresholds thresholds;
    // [space]
    SearchSpaceConfig space;
    // [train]
    TrainConfig train;
    // [search]
    int generations = 100;
    int children = 10;
    std::string initial_arch_path;
    // top level
    std::string out_dir = "run_out";
    uint64_t seed = 1;
    int jobs = 1;
    BnParamMode bn_mode = BnParamMode::full;
};

namespace detail {

inline long long config_ll(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        long long x = std::stoll(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad integer for '" + key + "': " + v);
    }
}

inline double config_d(const std::string& v, const std::string& key) {
    try {
        size_t pos = 0;
        double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("bad number for '" + key + "': " + v);
    }
}

} // namespace detail

inline void apply_config(RunConfig& cfg, const ConfigMap& map) {
    using detail::config_d;
    using detail::config_ll;
    for (const auto& [section, entries] : map) {
        for (const auto& [key, value] : entries) {
            std::string id = section.empty() ? key : section + "." + key;
            if (id == "seed") cfg.seed = uint64_t(config_ll(value, id));
            else if (id == "jobs") cfg.jobs = int(config_ll(value, id));
            else if (id == "out_dir") cfg.out_dir = value;
            else if (id == "bn_mode") {
                if (value == "full") cfg.bn_mode = BnParamMode::full;
                else if (value == "trainable") cfg.bn_mode = BnParamMode::trainable_only;
                else if (value == "off") cfg.bn_mode = BnParamMode::off;
                else throw ConfigError("bn_mode must be full|trainable|off");
            } else if (id == "dataset.train") cfg.dataset_path = value;
            else if (id == "dataset.test") cfg.test_dataset_path = value;
            else if (id == "preprocess.pcap_dir") cfg.pcap_dir = value;
            else if (id == "preprocess.strategy") cfg.strategy = int(config_ll(value, id));
            else if (id == "preprocess.length") cfg.length = int(config_ll(value, id));
            else if (id == "preprocess.labels") cfg.labels_path = value;
            else if (id == "preprocess.out") cfg.out_path = value;
            else if (id == "thresholds.params") cfg.thresholds.max_params = config_ll(value, id);
            else if (id == "thresholds.tensor") cfg.thresholds.max_tensor_elems = config_ll(value, id);
            else if (id == "thresholds.flops") cfg.thresholds.max_flops = config_ll(value, id);
            else if (id == "space.filters_min") cfg.space.filters_min = int(config_ll(value, id));
            else if (id == "space.filters_max") cfg.space.filters_max = int(config_ll(value, id));
            else if (id == "space.kernel_min") cfg.space.kernel_min = int(config_ll(value, id));
            else if (id == "space.kernel_max") cfg.space.kernel_max = int(config_ll(value, id));
            else if (id == "space.stride_min") cfg.space.stride_min = int(config_ll(value, id));
            else if (id == "space.stride_max") cfg.space.stride_max = int(config_ll(value, id));
            else if (id == "space.dropout_min") cfg.space.dropout_min = config_d(value, id);
            else if (id == "space.dropout_max") cfg.space.dropout_max = config_d(value, id);
            else if (id == "space.max_depth") cfg.space.max_depth = int(config_ll(value, id));
            else if (id == "space.mutations_per_child")
                cfg.space.mutations_per_child = int(config_ll(value, id));
            else if (id == "train.max_epochs") cfg.train.max_epochs = int(config_ll(value, id));
            else if (id == "train.batch_size") cfg.train.batch_size = config_ll(value, id);
            else if (id == "train.initial_lr") cfg.train.initial_lr = config_d(value, id);
            else if (id == "train.plateau_patience")
                cfg.train.plateau_patience = int(config_ll(value, id));
            else if (id == "train.plateau_factor") cfg.train.plateau_factor = config_d(value, id);
            else if (id == "train.min_lr") cfg.train.min_lr = config_d(value, id);
            else if (id == "train.early_stop_patience")
                cfg.train.early_stop_patience = int(config_ll(value, id));
            else if (id == "train.multi_start") cfg.train.multi_start = int(config_ll(value, id));
            else if (id == "train.max_seconds") cfg.train.max_train_seconds = config_d(value, id);
            else if (id == "search.generations") cfg.generations = int(config_ll(value, id));
            else if (id == "search.children") cfg.children = int(config_ll(value, id));
            else if (id == "search.initial_arch") cfg.initial_arch_path = value;
            else throw ConfigError("unknown config key '" + id + "'");
        }
    }
    if (cfg.strategy < 1 || cfg.strategy > 24)
        throw ConfigError("strategy id must be in [1,24], got " + std::to_string(cfg.strategy));
    if (cfg.length < 1) throw ConfigError("length must be positive");
}

inline RunConfig load_run_config(const std::string& path) {
    RunConfig cfg;
    apply_config(cfg, parse_config_text(read_file_text(path)));
    return cfg;
}

// FLOWNAS_SEED beats both the config file and the command line.
inline void apply_seed_env(RunConfig& cfg) {
    if (const char* env = std::getenv("FLOWNAS_SEED"))
        cfg.seed = uint64_t(detail::config_ll(env, "FLOWNAS_SEED"));
}

} // namespace flownas
