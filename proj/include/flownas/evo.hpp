#pragma once

#include <atomic>
#include <chrono>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "flownas/cost.hpp"
#include "flownas/search_space.hpp"
#include "flownas/train.hpp"

namespace flownas {

struct SearchConfig {
    int n_generations = 100;
    int children_per_generation = 10;
    HwThresholds thresholds;
    SearchSpaceConfig space;
    TrainConfig train;
    uint64_t seed = 0;
    Architecture initial_parent; // empty block list selects the default genome
    long long spawn_budget_factor = 1000;
    int jobs = 1; // concurrent child evaluations
    BnParamMode bn_mode = BnParamMode::full;
    std::string checkpoint_path; // written after every generation when set
    std::string log_path;        // one JSON record per generation when set
};

struct ChildEval {
    double val_acc = 0.0;
    double val_loss = 0.0;
    double seconds = 0.0;
};

// Scores one admissible child; seeded so the whole search replays.
using Evaluator = std::function<ChildEval(const Architecture&, uint64_t seed)>;

struct ChildRecord {
    Architecture arch;
    HwCost cost;
    double val_accuracy = 0.0;
    double val_loss = 0.0;
    double train_seconds = 0.0;
};

struct GenerationRecord {
    int generation = 0;
    std::vector<ChildRecord> children;
    long long attempts = 0;
    std::string parent_id;
    int best_child_index = -1;
    bool new_global_best = false;
};

struct SearchState {
    uint64_t seed = 0;
    int next_generation = 0;
    Architecture parent;
    std::string parent_id = "init";
    Architecture best_arch;
    std::string best_id = "init";
    double best_val_acc = -1.0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<GenerationRecord> records;
    std::string rng_state; // mt19937_64 stream serialization
};

// --- json (de)serialization -------------------------------------------------

inline nlohmann::json arch_to_json(const Architecture& arch) {
    nlohmann::json j;
    j["input_len"] = arch.input_len;
    j["input_channels"] = arch.input_channels;
    j["n_classes"] = arch.n_classes;
    j["blocks"] = nlohmann::json::array();
    for (const auto& b : arch.blocks) {
        nlohmann::json jb;
        jb["filters"] = b.filters;
        jb["kernel"] = b.kernel;
        jb["stride"] = b.stride;
        jb["padding"] = to_string(b.padding);
        jb["pool_kind"] = to_string(b.pool.kind);
        if (b.pool.enabled()) {
            jb["pool_size"] = b.pool.size;
            jb["pool_stride"] = b.pool.stride;
            jb["pool_pad"] = to_string(b.pool.padding);
        }
        jb["dropout"] = b.dropout_rate;
        j["blocks"].push_back(jb);
    }
    return j;
}

inline Architecture arch_from_json(const nlohmann::json& j) {
    Architecture arch;
    arch.input_len = j.at("input_len").get<int>();
    arch.input_channels = j.value("input_channels", 1);
    arch.n_classes = j.at("n_classes").get<int>();
    arch.blocks.clear();
    for (const auto& jb : j.at("blocks")) {
        BlockSpec b;
        b.filters = jb.at("filters").get<int>();
        b.kernel = jb.at("kernel").get<int>();
        b.stride = jb.at("stride").get<int>();
        b.padding = jb.at("padding").get<std::string>() == "same" ? Padding::same : Padding::valid;
        std::string kind = jb.at("pool_kind").get<std::string>();
        if (kind != "none") {
            b.pool.kind = kind == "max" ? PoolKind::max : PoolKind::avg;
            b.pool.size = jb.at("pool_size").get<int>();
            b.pool.stride = jb.at("pool_stride").get<int>();
            b.pool.padding =
                jb.value("pool_pad", std::string("same")) == "same" ? Padding::same : Padding::valid;
        }
        b.dropout_rate = jb.at("dropout").get<double>();
        arch.blocks.push_back(b);
    }
    return arch;
}

constexpr int kCheckpointVersion = 1;

// json has no literal for non-finite doubles; encode them as strings.
inline nlohmann::json json_double(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

inline double double_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        return std::numeric_limits<double>::quiet_NaN();
    }
    return j.get<double>();
}

inline nlohmann::json state_to_json(const SearchState& state, bool include_timing = true) {
    nlohmann::json j;
    j["format"] = "flownas-search-checkpoint";
    j["version"] = kCheckpointVersion;
    j["seed"] = state.seed;
    j["next_generation"] = state.next_generation;
    j["parent"] = arch_to_json(state.parent);
    j["parent_id"] = state.parent_id;
    j["best"] = arch_to_json(state.best_arch);
    j["best_id"] = state.best_id;
    j["best_val_acc"] = json_double(state.best_val_acc);
    j["best_val_loss"] = json_double(state.best_val_loss);
    j["rng_state"] = state.rng_state;
    j["records"] = nlohmann::json::array();
    for (const auto& rec : state.records) {
        nlohmann::json jr;
        jr["generation"] = rec.generation;
        jr["attempts"] = rec.attempts;
        jr["parent_id"] = rec.parent_id;
        jr["best_child_index"] = rec.best_child_index;
        jr["new_global_best"] = rec.new_global_best;
        jr["children"] = nlohmann::json::array();
        for (const auto& child : rec.children) {
            nlohmann::json jc;
            jc["arch"] = arch_to_json(child.arch);
            jc["params"] = child.cost.params;
            jc["flops"] = child.cost.flops;
            jc["max_tensor"] = child.cost.max_tensor;
            jc["val_accuracy"] = child.val_accuracy;
            jc["val_loss"] = child.val_loss;
            if (include_timing) jc["train_seconds"] = child.train_seconds;
            jr["children"].push_back(jc);
        }
        j["records"].push_back(jr);
    }
    return j;
}

inline SearchState state_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != std::string("flownas-search-checkpoint"))
        throw CorruptCheckpoint("missing checkpoint format marker");
    int version = j.value("version", -1);
    if (version != kCheckpointVersion)
        throw CorruptCheckpoint("checkpoint version " + std::to_string(version) +
                                " unsupported (expected " + std::to_string(kCheckpointVersion) + ")");
    try {
        SearchState state;
        state.seed = j.at("seed").get<uint64_t>();
        state.next_generation = j.at("next_generation").get<int>();
        state.parent = arch_from_json(j.at("parent"));
        state.parent_id = j.at("parent_id").get<std::string>();
        state.best_arch = arch_from_json(j.at("best"));
        state.best_id = j.at("best_id").get<std::string>();
        state.best_val_acc = double_from_json(j.at("best_val_acc"));
        state.best_val_loss = double_from_json(j.at("best_val_loss"));
        state.rng_state = j.at("rng_state").get<std::string>();
        for (const auto& jr : j.at("records")) {
            GenerationRecord rec;
            rec.generation = jr.at("generation").get<int>();
            rec.attempts = jr.at("attempts").get<long long>();
            rec.parent_id = jr.at("parent_id").get<std::string>();
            rec.best_child_index = jr.at("best_child_index").get<int>();
            rec.new_global_best = jr.at("new_global_best").get<bool>();
            for (const auto& jc : jr.at("children")) {
                ChildRecord child;
                child.arch = arch_from_json(jc.at("arch"));
                child.cost.params = jc.at("params").get<long long>();
                child.cost.flops = jc.at("flops").get<long long>();
                child.cost.max_tensor = jc.at("max_tensor").get<long long>();
                child.val_accuracy = jc.at("val_accuracy").get<double>();
                child.val_loss = jc.at("val_loss").get<double>();
                child.train_seconds = jc.value("train_seconds", 0.0);
                rec.children.push_back(std::move(child));
            }
            state.records.push_back(std::move(rec));
        }
        return state;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptCheckpoint(std::string("malformed checkpoint: ") + e.what());
    }
}

inline void save_checkpoint(const SearchState& state, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write checkpoint: " + path);
    f << state_to_json(state).dump(2) << "\n";
    if (!f) throw IoError("short checkpoint write: " + path);
}

inline SearchState load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw CorruptCheckpoint(std::string("unparseable checkpoint: ") + e.what());
    }
    return state_from_json(j);
}

// Deterministic content (timing stripped); equal strings mean the two states
// describe the same search trajectory.
inline std::string state_canonical(const SearchState& state) {
    return state_to_json(state, /*include_timing=*/false).dump();
}

inline std::string child_id(int generation, int index) {
    return "g" + std::to_string(generation) + "c" + std::to_string(index);
}

// One generation: spawn admissible children, score them, pick the parent by
// validation accuracy (ties: lower loss, lower index), update the global
// best on strict improvement.
inline void run_generation(SearchState& state, const SearchConfig& cfg, const Evaluator& evaluate,
                           Rng& rng) {
    int gen = state.next_generation;
    auto spawn = spawn_admissible(state.parent, cfg.space, cfg.thresholds,
                                  cfg.children_per_generation, rng,
                                  cfg.spawn_budget_factor * cfg.children_per_generation,
                                  cfg.bn_mode);

    GenerationRecord rec;
    rec.generation = gen;
    rec.attempts = spawn.attempts;
    rec.parent_id = state.parent_id;
    rec.children.resize(spawn.children.size());

    std::atomic<size_t> next{0};
    auto worker = [&] {
        for (;;) {
            size_t c = next.fetch_add(1);
            if (c >= spawn.children.size()) return;
            const Architecture& arch = spawn.children[c];
            uint64_t seed = derive_seed(cfg.seed, 0x6576, uint64_t(gen), c);
            ChildEval eval = evaluate(arch, seed);
            auto& child = rec.children[c];
            child.arch = arch;
            child.cost = estimate_cost(arch, cfg.bn_mode);
            child.val_accuracy = eval.val_acc;
            child.val_loss = eval.val_loss;
            child.train_seconds = eval.seconds;
        }
    };
    if (cfg.jobs > 1) {
        std::vector<std::thread> pool;
        for (int i = 1; i < cfg.jobs; ++i) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
    } else {
        worker();
    }

    int best = 0;
    for (int c = 1; c < int(rec.children.size()); ++c) {
        const auto& cand = rec.children[size_t(c)];
        const auto& cur = rec.children[size_t(best)];
        if (cand.val_accuracy > cur.val_accuracy ||
            (cand.val_accuracy == cur.val_accuracy && cand.val_loss < cur.val_loss))
            best = c;
    }
    rec.best_child_index = best;

    state.parent = rec.children[size_t(best)].arch;
    state.parent_id = child_id(gen, best);
    if (rec.children[size_t(best)].val_accuracy > state.best_val_acc) {
        state.best_val_acc = rec.children[size_t(best)].val_accuracy;
        state.best_val_loss = rec.children[size_t(best)].val_loss;
        state.best_arch = state.parent;
        state.best_id = state.parent_id;
        rec.new_global_best = true;
    }
    state.records.push_back(std::move(rec));
    state.next_generation = gen + 1;

    std::ostringstream rs;
    rs << rng;
    state.rng_state = rs.str();
}

inline void append_log(const SearchState& state, const std::string& path) {
    if (path.empty()) return;
    const auto& rec = state.records.back();
    nlohmann::json j;
    j["generation"] = rec.generation;
    j["attempts"] = rec.attempts;
    j["parent_id"] = rec.parent_id;
    j["best_child"] = child_id(rec.generation, rec.best_child_index);
    j["best_child_val_acc"] = rec.children[size_t(rec.best_child_index)].val_accuracy;
    j["new_global_best"] = rec.new_global_best;
    double mean = 0.0, seconds = 0.0;
    for (const auto& c : rec.children) {
        mean += c.val_accuracy;
        seconds += c.train_seconds;
    }
    j["mean_child_val_acc"] = rec.children.empty() ? 0.0 : mean / double(rec.children.size());
    j["train_seconds"] = seconds;
    std::ofstream f(path, std::ios::app);
    if (!f) throw IoError("cannot append to run log: " + path);
    f << j.dump() << "\n";
}

// Full search loop. Pass a loaded state to resume; the trajectory continues
// bit-identically because the mutation RNG state rides along in the
// checkpoint and every training seed derives from (seed, generation, child).
inline SearchState run_search(const SearchConfig& cfg, const Evaluator& evaluate,
                              const SearchState* resume_from = nullptr) {
    if (cfg.n_generations < 1 || cfg.children_per_generation < 1)
        throw ConfigError("generations and children per generation must be positive");
    SearchState state;
    Rng rng(cfg.seed);
    if (resume_from) {
        state = *resume_from;
        std::istringstream rs(state.rng_state);
        rs >> rng;
        if (!rs) throw CorruptCheckpoint("unreadable rng state");
    } else {
        state.seed = cfg.seed;
        state.parent = cfg.initial_parent.blocks.empty()
                           ? default_initial_parent(cfg.initial_parent.input_len,
                                                    cfg.initial_parent.n_classes)
                           : cfg.initial_parent;
        state.parent_id = "init";
        state.best_arch = state.parent;
    }

    for (int gen = state.next_generation; gen < cfg.n_generations; ++gen) {
        try {
            run_generation(state, cfg, evaluate, rng);
        } catch (const BudgetExhausted&) {
            if (!cfg.checkpoint_path.empty()) save_checkpoint(state, cfg.checkpoint_path);
            throw;
        }
        append_log(state, cfg.log_path);
        if (!cfg.checkpoint_path.empty()) save_checkpoint(state, cfg.checkpoint_path);
    }
    return state;
}

inline Evaluator make_training_evaluator(const TrainingData& train_set, const TrainingData& val_set,
                                         const TrainConfig& base) {
    return [&train_set, &val_set, base](const Architecture& arch, uint64_t seed) {
        TrainConfig cfg = base;
        cfg.seed = seed;
        auto model = multi_start_train(arch, train_set, val_set, cfg);
        return ChildEval{model.result.best_val_acc, model.result.best_val_loss,
                         model.result.seconds};
    };
}

// Convergence-curve export: per-generation best and mean child accuracy.
inline std::string export_curve_csv(const SearchState& state) {
    std::string csv = "generation,best_val_acc,mean_val_acc,new_best\n";
    for (const auto& rec : state.records) {
        double mean = 0.0;
        for (const auto& c : rec.children) mean += c.val_accuracy;
        if (!rec.children.empty()) mean /= double(rec.children.size());
        double best = rec.best_child_index >= 0
                          ? rec.children[size_t(rec.best_child_index)].val_accuracy
                          : 0.0;
        csv += std::to_string(rec.generation) + "," + format_double(best) + "," +
               format_double(mean) + "," + (rec.new_global_best ? "1" : "0") + "\n";
    }
    return csv;
}

} // namespace flownas
