#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <sys/wait.h>

#include "flownas/dataset.hpp"
#include "flownas/evo.hpp"
#include "flownas/io.hpp"
#include "support/pcap_builder.hpp"
#include "support/temp_dir.hpp"

using namespace flownas;
namespace ts = testsupport;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int exit_code = -1;
    std::string out; // stdout + stderr
};

CmdResult run_cli(const std::string& args, const std::string& env = "") {
    std::string cmd = env + " " + std::string(FLOWNAS_BIN) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    CmdResult result;
    char buf[4096];
    size_t n;
    while ((n = fread(buf, 1, sizeof(buf), pipe)) > 0) result.out.append(buf, n);
    int status = pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return result;
}

std::string data_file(const std::string& name) {
    return std::string(FLOWNAS_TEST_DATA) + "/" + name;
}

std::string arch_fixture_path() {
    // the repository ships the reference architecture next to the configs
    return (fs::path(FLOWNAS_TEST_DATA).parent_path().parent_path() / "configs" / "cnn784.arch")
        .string();
}

void write_toy(const std::string& path, int classes, int count, int length, int seed) {
    auto r = run_cli("preprocess --toy --toy-classes " + std::to_string(classes) + " --toy-count " +
                     std::to_string(count) + " --length " + std::to_string(length) + " --seed " +
                     std::to_string(seed) + " --out " + path);
    REQUIRE(r.exit_code == 0);
}

} // namespace

TEST_CASE("help output is stable") {
    auto r = run_cli("--help");
    CHECK(r.exit_code == 0);
    CHECK(r.out == read_file_text(data_file("help.txt")));

    auto est = run_cli("estimate --help");
    CHECK(est.exit_code == 0);
    CHECK(est.out == read_file_text(data_file("help_estimate.txt")));
}

TEST_CASE("estimate reports PASS on the reference architecture") {
    auto r = run_cli("estimate --arch " + arch_fixture_path());
    CHECK(r.exit_code == 0);
    CHECK(r.out.find("max tensor        20124") != std::string::npos);
    CHECK(r.out.find("total params      88737") != std::string::npos);
    size_t passes = 0;
    for (size_t pos = 0; (pos = r.out.find(": PASS", pos)) != std::string::npos; ++pos) ++passes;
    CHECK(passes == 3);

    auto tighter = run_cli("estimate --arch " + arch_fixture_path() + " --params-limit 80000");
    CHECK(tighter.exit_code == 0);
    CHECK(tighter.out.find("constraint params 88737 < 80000 : FAIL") != std::string::npos);

    auto reduced = run_cli("estimate --arch " + arch_fixture_path() + " --input-len 196");
    CHECK(reduced.out.find("total flops       2253877") != std::string::npos);
    CHECK(reduced.out.find("max tensor        4902") != std::string::npos);
}

TEST_CASE("exit codes are stable across error classes") {
    ts::TempDir dir;
    // 2: config error
    auto bad_strategy = run_cli("preprocess --strategy 25 --pcap-dir " + dir.path.string() +
                                " --labels none --out x.sess");
    CHECK(bad_strategy.exit_code == 2);

    // 3: io error, with the documented message
    write_file_text(dir.file("labels.txt"), "* web\n");
    fs::create_directories(dir.file("empty"));
    auto empty = run_cli("preprocess --pcap-dir " + dir.file("empty") + " --labels " +
                         dir.file("labels.txt") + " --out " + dir.file("x.sess"));
    CHECK(empty.exit_code == 3);
    CHECK(empty.out.find("no captures found") != std::string::npos);

    // 4: parse error
    write_file_text(dir.file("bad.arch"), "input_len 784\nfilters what\n");
    auto bad_arch = run_cli("estimate --arch " + dir.file("bad.arch"));
    CHECK(bad_arch.exit_code == 4);

    // missing file -> io error
    auto missing = run_cli("estimate --arch " + dir.file("nonexistent.arch"));
    CHECK(missing.exit_code == 3);
}

TEST_CASE("eval rejects mismatched dataset dimensions with exit 2") {
    ts::TempDir dir;
    write_toy(dir.file("train64.sess"), 2, 60, 64, 3);
    write_toy(dir.file("train80.sess"), 2, 40, 80, 3);
    write_file_text(dir.file("tiny.arch"),
                    "input_len 64\nn_classes 2\nblock\nfilters 16\nkernel 3\nstride 2\n"
                    "padding valid\npool_kind none\ndropout 0\n");
    auto train = run_cli("train --arch " + dir.file("tiny.arch") + " --dataset " +
                         dir.file("train64.sess") + " --out " + dir.file("model") +
                         " --epochs 2 --multi-start 1 --seed 4");
    REQUIRE(train.exit_code == 0);

    auto eval_ok = run_cli("eval --model " + dir.file("model") + " --dataset " +
                           dir.file("train64.sess"));
    CHECK(eval_ok.exit_code == 0);
    CHECK(eval_ok.out.find("accuracy") != std::string::npos);

    auto eval_bad = run_cli("eval --model " + dir.file("model") + " --dataset " +
                            dir.file("train80.sess"));
    CHECK(eval_bad.exit_code == 2);
    CHECK(eval_bad.out.find("length") != std::string::npos);
}

TEST_CASE("preprocess builds a labeled dataset from pcap files") {
    ts::TempDir dir;
    fs::create_directories(dir.file("caps"));

    // two captures, one session each, labeled by filename glob
    for (int f = 0; f < 2; ++f) {
        std::vector<ts::RecordSpec> records;
        for (int i = 0; i < 3; ++i) {
            ts::FrameSpec spec;
            spec.src_ip = {10, 0, uint8_t(f), 1};
            spec.dst_ip = {10, 0, uint8_t(f), 2};
            spec.src_port = 40000;
            spec.dst_port = 443;
            spec.payload.assign(50 + 10 * size_t(i), uint8_t(0x30 + i));
            ts::RecordSpec rec;
            rec.ts_sec = 100 + uint32_t(i);
            rec.data = ts::build_frame(spec);
            records.push_back(rec);
        }
        auto pcap = ts::build_pcap(records);
        write_file_bytes(dir.file("caps/" + std::string(f == 0 ? "chat" : "video") + "_01.pcap"),
                         pcap);
    }
    write_file_text(dir.file("labels.txt"), "chat* chat\nvideo* video\n");

    auto r = run_cli("preprocess --pcap-dir " + dir.file("caps") + " --labels " +
                     dir.file("labels.txt") + " --strategy 2 --length 256 --out " +
                     dir.file("out.sess"));
    REQUIRE(r.exit_code == 0);

    auto ds = read_dataset_file(dir.file("out.sess"));
    CHECK(ds.n_classes == 2);
    CHECK(ds.input_len == 256);
    REQUIRE(ds.samples.size() == 2);
    CHECK(ds.samples[0].label != ds.samples[1].label);
    // strategy 2 strips the Ethernet header: vectors start at the IP version nibble
    for (const auto& s : ds.samples) CHECK((s.bytes[0] >> 4) == 4);
}

TEST_CASE("search smoke run emits one curve row per generation") {
    ts::TempDir dir;
    write_toy(dir.file("toy.sess"), 3, 120, 48, 5);
    write_file_text(dir.file("run.conf"), R"(seed = 11
jobs = 2
[thresholds]
params = 40000
tensor = 4000
flops = 1000000
[train]
max_epochs = 2
batch_size = 32
multi_start = 1
[search]
generations = 3
children = 2
)");
    auto r = run_cli("search --config " + dir.file("run.conf") + " --dataset " +
                     dir.file("toy.sess") + " --out " + dir.file("out"));
    REQUIRE(r.exit_code == 0);
    CHECK(fs::exists(dir.file("out/best.arch")));
    CHECK(fs::exists(dir.file("out/manifest.json")));
    CHECK(fs::exists(dir.file("out/checkpoint.json")));

    auto curve = read_file_text(dir.file("out/curve.csv"));
    CHECK(curve.rfind("generation,best_val_acc,mean_val_acc,new_best\n", 0) == 0);
    CHECK(std::count(curve.begin(), curve.end(), '\n') == 4); // header + 3 generations

    auto log = read_file_text(dir.file("out/run.log"));
    CHECK(std::count(log.begin(), log.end(), '\n') == 3);
}

TEST_CASE("identical manifests reproduce identical outputs") {
    ts::TempDir dir;
    write_toy(dir.file("toy.sess"), 2, 80, 32, 9);
    std::string common = " --dataset " + dir.file("toy.sess") +
                         " --generations 2 --children 2 --seed 21 --jobs 2";
    auto r1 = run_cli("search" + common + " --out " + dir.file("a"));
    auto r2 = run_cli("search" + common + " --out " + dir.file("b"));
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);
    CHECK(read_file_text(dir.file("a/curve.csv")) == read_file_text(dir.file("b/curve.csv")));
    CHECK(read_file_text(dir.file("a/best.arch")) == read_file_text(dir.file("b/best.arch")));
    auto ca = load_checkpoint(dir.file("a/checkpoint.json"));
    auto cb = load_checkpoint(dir.file("b/checkpoint.json"));
    CHECK(state_canonical(ca) == state_canonical(cb));

    // training twice with one manifest gives byte-identical weights
    write_file_text(dir.file("tiny.arch"),
                    "input_len 32\nn_classes 2\nblock\nfilters 16\nkernel 3\nstride 2\n"
                    "padding valid\npool_kind none\ndropout 0\n");
    std::string train_common = "train --arch " + dir.file("tiny.arch") + " --dataset " +
                               dir.file("toy.sess") + " --epochs 2 --multi-start 1 --seed 5";
    REQUIRE(run_cli(train_common + " --out " + dir.file("m1")).exit_code == 0);
    REQUIRE(run_cli(train_common + " --out " + dir.file("m2")).exit_code == 0);
    CHECK(read_file_bytes(dir.file("m1/model.wgts")) == read_file_bytes(dir.file("m2/model.wgts")));
}

TEST_CASE("search resume reproduces the uninterrupted run") {
    ts::TempDir dir;
    write_toy(dir.file("toy.sess"), 2, 80, 32, 13);
    std::string common = " --dataset " + dir.file("toy.sess") + " --children 2 --seed 33 --jobs 2";
    REQUIRE(run_cli("search" + common + " --generations 4 --out " + dir.file("full")).exit_code == 0);
    REQUIRE(run_cli("search" + common + " --generations 2 --out " + dir.file("half")).exit_code == 0);
    auto resumed = run_cli("search" + common + " --generations 4 --out " + dir.file("half") +
                           " --resume");
    REQUIRE(resumed.exit_code == 0);
    CHECK(resumed.out.find("resuming from generation 2") != std::string::npos);

    auto full_state = load_checkpoint(dir.file("full/checkpoint.json"));
    auto half_state = load_checkpoint(dir.file("half/checkpoint.json"));
    CHECK(state_canonical(full_state) == state_canonical(half_state));
    CHECK(read_file_text(dir.file("full/curve.csv")) == read_file_text(dir.file("half/curve.csv")));
}

TEST_CASE("FLOWNAS_SEED overrides the command-line seed") {
    ts::TempDir dir;
    auto plain = run_cli("preprocess --toy --toy-classes 2 --toy-count 20 --length 32 --seed 5 "
                         "--out " + dir.file("a.sess"));
    REQUIRE(plain.exit_code == 0);
    auto env = run_cli("preprocess --toy --toy-classes 2 --toy-count 20 --length 32 --seed 9 "
                       "--out " + dir.file("b.sess"),
                       "FLOWNAS_SEED=5");
    REQUIRE(env.exit_code == 0);
    CHECK(read_file_bytes(dir.file("a.sess")) == read_file_bytes(dir.file("b.sess")));
}

TEST_CASE("quantize writes the comparison report") {
    ts::TempDir dir;
    write_toy(dir.file("toy.sess"), 2, 80, 32, 17);
    write_file_text(dir.file("tiny.arch"),
                    "input_len 32\nn_classes 2\nblock\nfilters 16\nkernel 3\nstride 2\n"
                    "padding valid\npool_kind none\ndropout 0\n");
    REQUIRE(run_cli("train --arch " + dir.file("tiny.arch") + " --dataset " + dir.file("toy.sess") +
                    " --out " + dir.file("model") + " --epochs 3 --multi-start 1 --seed 7")
                .exit_code == 0);
    auto r = run_cli("quantize --model " + dir.file("model") + " --calib " + dir.file("toy.sess") +
                     " --report " + dir.file("q.csv"));
    REQUIRE(r.exit_code == 0);
    auto csv = read_file_text(dir.file("q.csv"));
    CHECK(csv.rfind("class,acc_real,acc_quant,delta\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4); // header + overall + 2 classes
}

TEST_CASE("search accepts a starting architecture and validates its dimensions") {
    ts::TempDir dir;
    write_toy(dir.file("toy.sess"), 2, 60, 48, 19);
    write_file_text(dir.file("seed48.arch"),
                    "input_len 48\nn_classes 2\nblock\nfilters 16\nkernel 3\nstride 2\n"
                    "padding valid\npool_kind none\ndropout 0\n");
    auto ok = run_cli("search --dataset " + dir.file("toy.sess") + " --initial-arch " +
                      dir.file("seed48.arch") +
                      " --generations 1 --children 1 --seed 2 --out " + dir.file("out"));
    CHECK(ok.exit_code == 0);

    write_file_text(dir.file("seed64.arch"),
                    "input_len 64\nn_classes 2\nblock\nfilters 16\nkernel 3\nstride 2\n"
                    "padding valid\npool_kind none\ndropout 0\n");
    auto bad = run_cli("search --dataset " + dir.file("toy.sess") + " --initial-arch " +
                       dir.file("seed64.arch") +
                       " --generations 1 --children 1 --seed 2 --out " + dir.file("out2"));
    CHECK(bad.exit_code == 2);
}
