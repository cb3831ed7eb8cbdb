// flownas: session-level traffic preprocessing, hardware-cost estimation,
// and constrained evolutionary architecture search over 1D CNNs.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "flownas/config.hpp"
#include "flownas/dataset.hpp"
#include "flownas/estimate.hpp"
#include "flownas/evo.hpp"
#include "flownas/packet.hpp"
#include "flownas/pcap.hpp"
#include "flownas/quantize.hpp"
#include "flownas/session.hpp"
#include "flownas/threading.hpp"
#include "flownas/toy.hpp"
#include "flownas/train.hpp"
#include "flownas/weights_io.hpp"

namespace fs = std::filesystem;
using namespace flownas;

namespace {

constexpr const char* kToolVersion = "0.1.0";

// exit codes: 0 ok, 1 internal, 2 config, 3 io, 4 parse
enum ExitCode { kOk = 0, kInternal = 1, kConfig = 2, kIo = 3, kParse = 4 };

struct LabelMap {
    std::vector<std::pair<std::string, uint16_t>> patterns; // glob -> class index
    std::vector<std::string> class_names;                   // index -> name
};

bool glob_match(const std::string& pattern, const std::string& text) {
    size_t p = 0, t = 0, star = std::string::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') ++p;
    return p == pattern.size();
}

// Label map file: one "glob class_name" pair per line; classes are numbered
// by first appearance.
LabelMap load_label_map(const std::string& path) {
    LabelMap map;
    std::istringstream is(read_file_text(path));
    std::string raw;
    int line_no = 0;
    std::map<std::string, uint16_t> by_name;
    while (std::getline(is, raw)) {
        ++line_no;
        std::string line = trim(raw.substr(0, raw.find('#')));
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string pattern, name;
        if (!(ls >> pattern >> name))
            throw ParseError("label map line " + std::to_string(line_no) +
                             ": expected '<glob> <class>'");
        auto [it, inserted] = by_name.try_emplace(name, uint16_t(map.class_names.size()));
        if (inserted) map.class_names.push_back(name);
        map.patterns.emplace_back(pattern, it->second);
    }
    if (map.patterns.empty()) throw ParseError("label map is empty: " + path);
    return map;
}

void write_manifest(const std::string& out_dir, const std::string& command,
                    const nlohmann::json& config) {
    nlohmann::json j;
    j["tool"] = "flownas";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["config"] = config;
    fs::create_directories(out_dir);
    write_file_text((fs::path(out_dir) / "manifest.json").string(), j.dump(2) + "\n");
}

void print_histogram(const Dataset& ds, const std::vector<std::string>& names) {
    std::vector<long> counts(ds.n_classes, 0);
    for (const auto& s : ds.samples) counts[s.label]++;
    std::cout << "dataset: " << ds.samples.size() << " vectors, length " << ds.input_len << ", "
              << ds.n_classes << " classes\n";
    for (int c = 0; c < ds.n_classes; ++c) {
        std::string name = c < int(names.size()) ? names[size_t(c)] : "class" + std::to_string(c);
        std::cout << "  [" << c << "] " << name << ": " << counts[size_t(c)] << "\n";
    }
}

// --- preprocess -------------------------------------------------------------

int cmd_preprocess(const RunConfig& cfg, bool toy, int toy_classes, int toy_count, int toy_noise) {
    Dataset ds;
    std::vector<std::string> class_names;
    if (toy) {
        ToyConfig tc;
        tc.n_classes = toy_classes;
        tc.n_samples = toy_count;
        tc.length = cfg.length;
        tc.noise = toy_noise;
        tc.seed = cfg.seed;
        ds = make_toy_dataset(tc);
        for (int c = 0; c < toy_classes; ++c) class_names.push_back("toy" + std::to_string(c));
    } else {
        if (cfg.pcap_dir.empty()) throw ConfigError("--pcap-dir is required without --toy");
        if (cfg.labels_path.empty()) throw ConfigError("--labels is required without --toy");
        LabelMap labels = load_label_map(cfg.labels_path);
        class_names = labels.class_names;

        std::vector<fs::path> captures;
        if (!fs::is_directory(cfg.pcap_dir)) throw IoError("not a directory: " + cfg.pcap_dir);
        for (const auto& entry : fs::directory_iterator(cfg.pcap_dir))
            if (entry.is_regular_file() && entry.path().extension() == ".pcap")
                captures.push_back(entry.path());
        std::sort(captures.begin(), captures.end());
        if (captures.empty()) throw IoError("no captures found in " + cfg.pcap_dir);

        ds.n_classes = uint16_t(labels.class_names.size());
        ds.input_len = uint32_t(cfg.length);
        auto strategy = PreprocStrategy::table_row(cfg.strategy);
        AnonymizationMap anon(derive_seed(cfg.seed, 0x616e6f6e));
        long skipped_frames = 0, malformed = 0, empty_sessions = 0;

        for (const auto& path : captures) {
            int label = -1;
            for (const auto& [pattern, cls] : labels.patterns)
                if (glob_match(pattern, path.filename().string())) {
                    label = cls;
                    break;
                }
            if (label < 0) {
                std::cerr << "warning: no label pattern matches " << path.filename().string()
                          << ", skipping\n";
                continue;
            }
            auto frames = read_capture_file(path.string());
            std::vector<DecodedPacket> packets;
            for (const auto& frame : frames) {
                try {
                    if (auto pkt = decode_packet(frame)) packets.push_back(std::move(*pkt));
                    else ++skipped_frames;
                } catch (const MalformedHeader&) {
                    ++malformed;
                }
            }
            for (auto& session : assemble_sessions(packets)) {
                auto kept = filter_packets(std::move(session.packets));
                if (kept.empty()) {
                    ++empty_sessions;
                    continue;
                }
                auto rewritten = apply_strategy(kept, strategy, anon);
                SessionVector sv;
                sv.label = uint16_t(label);
                sv.bytes = normalize_session(rewritten, size_t(cfg.length));
                ds.samples.push_back(std::move(sv));
            }
        }
        std::cerr << "frames skipped (non-TCP/UDP/IPv4): " << skipped_frames
                  << ", malformed: " << malformed << ", sessions dropped empty: " << empty_sessions
                  << "\n";
        if (ds.samples.empty()) throw IoError("no sessions survived preprocessing");
    }
    if (cfg.out_path.empty()) throw ConfigError("--out is required");
    write_dataset_file(ds, cfg.out_path);
    print_histogram(ds, class_names);
    std::cout << "wrote " << cfg.out_path << "\n";
    return kOk;
}

// --- estimate ---------------------------------------------------------------

int cmd_estimate(const RunConfig& cfg, const std::string& arch_path, int input_len_override,
                 const std::string& csv_path, bool strict) {
    auto arch = parse_arch(read_file_text(arch_path), strict);
    if (input_len_override > 0) arch.input_len = input_len_override;
    auto report = build_estimate(arch, cfg.thresholds, cfg.bn_mode);
    std::cout << estimate_text(report);
    if (!csv_path.empty()) write_file_text(csv_path, estimate_csv(report));
    return kOk;
}

// --- train ------------------------------------------------------------------

nlohmann::json train_config_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["max_epochs"] = cfg.train.max_epochs;
    j["batch_size"] = cfg.train.batch_size;
    j["initial_lr"] = cfg.train.initial_lr;
    j["plateau_patience"] = cfg.train.plateau_patience;
    j["plateau_factor"] = cfg.train.plateau_factor;
    j["min_lr"] = cfg.train.min_lr;
    j["early_stop_patience"] = cfg.train.early_stop_patience;
    j["multi_start"] = cfg.train.multi_start;
    j["max_seconds"] = cfg.train.max_train_seconds;
    j["seed"] = cfg.seed;
    j["jobs"] = cfg.jobs;
    return j;
}

std::string history_csv(const TrainResult& result) {
    std::string csv = "epoch,train_loss,train_acc,val_loss,val_acc,lr\n";
    for (const auto& e : result.history)
        csv += std::to_string(e.epoch) + "," + format_double(e.train_loss) + "," +
               format_double(e.train_acc) + "," + format_double(e.val_loss) + "," +
               format_double(e.val_acc) + "," + format_double(e.lr) + "\n";
    return csv;
}

int cmd_train(RunConfig cfg, const std::string& arch_path) {
    if (cfg.dataset_path.empty()) throw ConfigError("--dataset is required");
    auto arch = parse_arch(read_file_text(arch_path));
    auto data = to_training_data(read_dataset_file(cfg.dataset_path));
    if (arch.input_len != data.input_len || arch.n_classes != data.n_classes)
        throw ConfigError("architecture expects length " + std::to_string(arch.input_len) + "/" +
                          std::to_string(arch.n_classes) + " classes, dataset has " +
                          std::to_string(data.input_len) + "/" + std::to_string(data.n_classes));
    auto [train_set, val_set] = split_holdout(data, 0.2, derive_seed(cfg.seed, 0x73706c));

    TrainConfig tc = cfg.train;
    tc.seed = cfg.seed;
    auto model = multi_start_train(arch, train_set, val_set, tc);

    fs::create_directories(cfg.out_dir);
    write_file_text((fs::path(cfg.out_dir) / "model.arch").string(), serialize_arch(arch));
    save_weights_file(*model.net, (fs::path(cfg.out_dir) / "model.wgts").string());
    write_file_text((fs::path(cfg.out_dir) / "history.csv").string(), history_csv(model.result));
    nlohmann::json manifest = train_config_json(cfg);
    manifest["dataset"] = cfg.dataset_path;
    manifest["arch"] = arch_path;
    write_manifest(cfg.out_dir, "train", manifest);

    std::cout << "best val accuracy " << model.result.best_val_acc << " (epoch "
              << model.result.best_epoch << ", val loss " << model.result.best_val_loss << ")\n";
    std::cout << "wrote " << (fs::path(cfg.out_dir) / "model.wgts").string() << "\n";
    return kOk;
}

// --- eval -------------------------------------------------------------------

struct LoadedModel {
    Architecture arch;
    std::shared_ptr<Network> net;
};

// --model accepts a training output directory (model.arch + model.wgts) or a
// .wgts file with a sibling .arch file.
LoadedModel load_model(const std::string& model_path) {
    fs::path arch_path, weights_path;
    if (fs::is_directory(model_path)) {
        arch_path = fs::path(model_path) / "model.arch";
        weights_path = fs::path(model_path) / "model.wgts";
    } else {
        weights_path = model_path;
        arch_path = fs::path(model_path).replace_extension(".arch");
    }
    LoadedModel m;
    m.arch = parse_arch(read_file_text(arch_path.string()));
    m.net = std::make_shared<Network>(m.arch, 0);
    load_weights_file(*m.net, weights_path.string());
    return m;
}

int cmd_eval(const RunConfig& cfg, const std::string& model_path, const std::string& report_path) {
    if (cfg.dataset_path.empty()) throw ConfigError("--dataset is required");
    auto model = load_model(model_path);
    auto data = to_training_data(read_dataset_file(cfg.dataset_path));
    if (model.arch.input_len != data.input_len || model.arch.n_classes != data.n_classes)
        throw ConfigError("model expects length " + std::to_string(model.arch.input_len) + "/" +
                          std::to_string(model.arch.n_classes) + " classes, dataset has " +
                          std::to_string(data.input_len) + "/" + std::to_string(data.n_classes));
    auto report = evaluate(*model.net, data, cfg.train.batch_size);
    std::cout << "accuracy " << report.accuracy << "\n";
    std::cout << "macro_f1 " << report.macro_f1 << "\n";
    for (int c = 0; c < data.n_classes; ++c) {
        const auto& m = report.per_class[size_t(c)];
        std::cout << "class " << c << ": precision " << m.precision << " recall " << m.recall
                  << " f1 " << m.f1 << " support " << m.support << (m.absent ? " (absent)" : "")
                  << "\n";
    }
    if (!report_path.empty()) {
        std::string csv = "class,precision,recall,f1,support\n";
        for (int c = 0; c < data.n_classes; ++c) {
            const auto& m = report.per_class[size_t(c)];
            csv += std::to_string(c) + "," + format_double(m.precision) + "," +
                   format_double(m.recall) + "," + format_double(m.f1) + "," +
                   std::to_string(m.support) + "\n";
        }
        csv += "overall," + format_double(report.accuracy) + ",," + format_double(report.macro_f1) +
               "," + std::to_string(long(data.size())) + "\n";
        write_file_text(report_path, csv);
    }
    return kOk;
}

// --- search -----------------------------------------------------------------

int cmd_search(RunConfig cfg, bool resume) {
    if (cfg.dataset_path.empty()) throw ConfigError("--dataset is required (a .sess file)");
    auto data = to_training_data(read_dataset_file(cfg.dataset_path));
    auto [train_set, val_set] = split_holdout(data, 0.2, derive_seed(cfg.seed, 0x73706c));

    SearchConfig sc;
    sc.n_generations = cfg.generations;
    sc.children_per_generation = cfg.children;
    sc.thresholds = cfg.thresholds;
    sc.space = cfg.space;
    sc.train = cfg.train;
    sc.seed = cfg.seed;
    sc.jobs = cfg.jobs;
    sc.bn_mode = cfg.bn_mode;
    fs::create_directories(cfg.out_dir);
    sc.checkpoint_path = (fs::path(cfg.out_dir) / "checkpoint.json").string();
    sc.log_path = (fs::path(cfg.out_dir) / "run.log").string();
    if (!cfg.initial_arch_path.empty()) {
        sc.initial_parent = parse_arch(read_file_text(cfg.initial_arch_path));
        if (sc.initial_parent.input_len != data.input_len ||
            sc.initial_parent.n_classes != data.n_classes)
            throw ConfigError("initial architecture does not match the dataset dimensions");
    } else {
        sc.initial_parent.input_len = data.input_len;
        sc.initial_parent.n_classes = data.n_classes;
        sc.initial_parent.blocks.clear();
    }

    nlohmann::json manifest = train_config_json(cfg);
    manifest["dataset"] = cfg.dataset_path;
    manifest["generations"] = cfg.generations;
    manifest["children"] = cfg.children;
    manifest["thresholds"] = {{"params", cfg.thresholds.max_params},
                              {"tensor", cfg.thresholds.max_tensor_elems},
                              {"flops", cfg.thresholds.max_flops}};
    write_manifest(cfg.out_dir, "search", manifest);

    SearchState resume_state;
    const SearchState* resume_ptr = nullptr;
    if (resume) {
        resume_state = load_checkpoint(sc.checkpoint_path);
        resume_ptr = &resume_state;
        std::cout << "resuming from generation " << resume_state.next_generation << "\n";
    } else {
        std::error_code ec;
        fs::remove(sc.log_path, ec); // a fresh run starts a fresh log
    }

    auto evaluator = make_training_evaluator(train_set, val_set, sc.train);
    auto state = run_search(sc, evaluator, resume_ptr);

    write_file_text((fs::path(cfg.out_dir) / "curve.csv").string(), export_curve_csv(state));
    write_file_text((fs::path(cfg.out_dir) / "best.arch").string(), serialize_arch(state.best_arch));
    auto best_cost = estimate_cost(state.best_arch, cfg.bn_mode);
    std::cout << "best architecture " << state.best_id << ": val accuracy " << state.best_val_acc
              << ", params " << best_cost.params << ", flops " << best_cost.flops
              << ", max tensor " << best_cost.max_tensor << "\n";
    std::cout << "wrote " << (fs::path(cfg.out_dir) / "best.arch").string() << "\n";
    return kOk;
}

// --- quantize ---------------------------------------------------------------

int cmd_quantize(const RunConfig& cfg, const std::string& model_path, const std::string& calib_path,
                 const std::string& report_path, int bits, bool per_channel) {
    auto model = load_model(model_path);
    auto data = to_training_data(read_dataset_file(calib_path));
    if (model.arch.input_len != data.input_len || model.arch.n_classes != data.n_classes)
        throw ConfigError("model and calibration dataset dimensions do not match");

    QuantizedModel qm(*model.net, QuantConfig{bits, per_channel});
    std::vector<BatchTensor> batches;
    for (size_t start = 0; start < data.size(); start += size_t(cfg.train.batch_size)) {
        size_t n = std::min(size_t(cfg.train.batch_size), data.size() - start);
        std::vector<size_t> idx(n);
        std::iota(idx.begin(), idx.end(), start);
        batches.push_back(make_batch(data, idx));
    }
    qm.calibrate(batches);
    auto report = compare_models(*model.net, qm, data, cfg.train.batch_size);

    std::cout << "real accuracy  " << report.acc_real << "\n";
    std::cout << "int" << bits << " accuracy  " << report.acc_quant << "\n";
    std::cout << "delta          " << report.delta << "\n";
    if (!report_path.empty()) {
        std::string csv = "class,acc_real,acc_quant,delta\n";
        for (const auto& row : report.rows)
            csv += (row.cls < 0 ? std::string("overall") : std::to_string(row.cls)) + "," +
                   format_double(row.acc_real) + "," + format_double(row.acc_quant) + "," +
                   format_double(row.delta) + "\n";
        write_file_text(report_path, csv);
        std::cout << "wrote " << report_path << "\n";
    }
    return kOk;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"hardware-constrained architecture search for session-level traffic classifiers", "flownas"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    app.fallthrough(); // lets subcommands use top-level options like --config

    RunConfig cfg;
    std::string config_path;
    app.add_option("--config", config_path, "run configuration file");

    uint64_t seed_flag = 0;
    bool seed_set = false;
    int jobs_flag = 0;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed_flag, "seed override")
            ->each([&seed_set](const std::string&) { seed_set = true; });
        sub->add_option("--jobs", jobs_flag, "worker threads (0 = config value)");
    };

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "build a session dataset from pcap captures");
    std::string pcap_dir, labels_path, out_path;
    int strategy = 0, length = 0;
    bool toy = false;
    int toy_classes = 4, toy_count = 2000, toy_noise = 36;
    pre->add_option("--pcap-dir", pcap_dir, "directory of .pcap files");
    pre->add_option("--strategy", strategy, "header strategy id (1-24)");
    pre->add_option("--length", length, "session vector length in bytes");
    pre->add_option("--labels", labels_path, "label map file: '<glob> <class>' per line");
    pre->add_option("--out", out_path, "output .sess path");
    pre->add_flag("--toy", toy, "generate the bundled synthetic dataset instead of reading pcaps");
    pre->add_option("--toy-classes", toy_classes, "toy generator: number of classes");
    pre->add_option("--toy-count", toy_count, "toy generator: number of vectors");
    pre->add_option("--toy-noise", toy_noise, "toy generator: per-byte noise amplitude");
    add_common(pre);

    // estimate
    auto* est = app.add_subcommand("estimate", "per-layer shapes, cost estimators, constraint check");
    std::string arch_path, csv_path;
    int input_len_override = 0;
    bool no_strict = false;
    long long th_params = 0, th_tensor = 0, th_flops = 0;
    est->add_option("--arch", arch_path, "architecture text file")->required();
    est->add_option("--input-len", input_len_override, "override the architecture's input length");
    est->add_option("--csv", csv_path, "write the table as CSV");
    est->add_option("--params-limit", th_params, "parameter-count threshold");
    est->add_option("--tensor-limit", th_tensor, "peak-tensor threshold (elements)");
    est->add_option("--flops-limit", th_flops, "FLOPs threshold");
    est->add_flag("--no-strict", no_strict, "skip search-space range validation");
    std::string bn_mode_flag;
    est->add_option("--bn-mode", bn_mode_flag, "batch-norm accounting: full|trainable|off");

    // search
    auto* sea = app.add_subcommand("search", "evolutionary constrained architecture search");
    int generations = 0, children = 0;
    bool resume = false;
    std::string dataset_path, out_dir, initial_arch;
    sea->add_option("--dataset", dataset_path, "training dataset (.sess)");
    sea->add_option("--generations", generations, "number of generations");
    sea->add_option("--children", children, "admissible children per generation");
    sea->add_option("--out", out_dir, "output directory");
    sea->add_option("--initial-arch", initial_arch, "starting parent architecture file");
    sea->add_flag("--resume", resume, "resume from the checkpoint in the output directory");
    add_common(sea);

    // train
    auto* tra = app.add_subcommand("train", "train one architecture on a dataset");
    std::string train_arch;
    int epochs = 0, multi_start = 0;
    tra->add_option("--arch", train_arch, "architecture text file")->required();
    tra->add_option("--dataset", dataset_path, "training dataset (.sess)");
    tra->add_option("--out", out_dir, "output directory");
    tra->add_option("--epochs", epochs, "epoch cap");
    tra->add_option("--multi-start", multi_start, "independent training starts");
    add_common(tra);

    // eval
    auto* eva = app.add_subcommand("eval", "evaluate a trained model on a dataset");
    std::string model_path, report_path;
    eva->add_option("--model", model_path, "model directory or .wgts file")->required();
    eva->add_option("--dataset", dataset_path, "evaluation dataset (.sess)");
    eva->add_option("--report", report_path, "write per-class metrics CSV");
    add_common(eva);

    // quantize
    auto* qua = app.add_subcommand("quantize", "post-training int8 simulation and comparison");
    std::string calib_path;
    int bits = 8;
    bool per_channel = false;
    qua->add_option("--model", model_path, "model directory or .wgts file")->required();
    qua->add_option("--calib", calib_path, "calibration dataset (.sess)")->required();
    qua->add_option("--report", report_path, "write comparison CSV");
    qua->add_option("--bits", bits, "fake-quantization bit width");
    qua->add_flag("--per-channel", per_channel, "per-output-channel weight quantization");
    add_common(qua);

    CLI11_PARSE(app, argc, argv);

    if (!config_path.empty()) cfg = load_run_config(config_path);

    // command-line overrides beat the config file; the env var beats both
    if (seed_set) cfg.seed = seed_flag;
    if (jobs_flag > 0) cfg.jobs = jobs_flag;
    apply_seed_env(cfg);
    engine_jobs() = std::max(1, cfg.jobs);

    if (pre->parsed()) {
        if (!pcap_dir.empty()) cfg.pcap_dir = pcap_dir;
        if (strategy > 0) cfg.strategy = strategy;
        if (length > 0) cfg.length = length;
        if (!labels_path.empty()) cfg.labels_path = labels_path;
        if (!out_path.empty()) cfg.out_path = out_path;
        if (cfg.strategy < 1 || cfg.strategy > 24)
            throw ConfigError("strategy id must be in [1,24], got " + std::to_string(cfg.strategy));
        if (cfg.length < 1) throw ConfigError("length must be positive");
        return cmd_preprocess(cfg, toy, toy_classes, toy_count, toy_noise);
    }
    if (est->parsed()) {
        if (th_params > 0) cfg.thresholds.max_params = th_params;
        if (th_tensor > 0) cfg.thresholds.max_tensor_elems = th_tensor;
        if (th_flops > 0) cfg.thresholds.max_flops = th_flops;
        if (!bn_mode_flag.empty()) {
            if (bn_mode_flag == "full") cfg.bn_mode = BnParamMode::full;
            else if (bn_mode_flag == "trainable") cfg.bn_mode = BnParamMode::trainable_only;
            else if (bn_mode_flag == "off") cfg.bn_mode = BnParamMode::off;
            else throw ConfigError("--bn-mode must be full|trainable|off");
        }
        return cmd_estimate(cfg, arch_path, input_len_override, csv_path, !no_strict);
    }
    if (!dataset_path.empty()) cfg.dataset_path = dataset_path;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (sea->parsed()) {
        if (generations > 0) cfg.generations = generations;
        if (children > 0) cfg.children = children;
        if (!initial_arch.empty()) cfg.initial_arch_path = initial_arch;
        return cmd_search(cfg, resume);
    }
    if (tra->parsed()) {
        if (epochs > 0) cfg.train.max_epochs = epochs;
        if (multi_start > 0) cfg.train.multi_start = multi_start;
        return cmd_train(cfg, train_arch);
    }
    if (eva->parsed()) return cmd_eval(cfg, model_path, report_path);
    if (qua->parsed())
        return cmd_quantize(cfg, model_path, calib_path, report_path, bits, per_channel);
    return kInternal;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const ShapeMismatch& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const DegenerateShape& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kIo;
    } catch (const ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kParse;
    } catch (const BadMagic& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kParse;
    } catch (const TruncatedRecord& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kParse;
    } catch (const CorruptCheckpoint& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return kParse;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInternal;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return kInternal;
    }
}
