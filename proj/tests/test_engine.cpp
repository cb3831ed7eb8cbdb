#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "flownas/network.hpp"
#include "flownas/weights_io.hpp"
#include "support/fixtures.hpp"
#include "support/naive_net.hpp"

using namespace flownas;
namespace ts = testsupport;

namespace {

SearchSpaceConfig small_space() {
    SearchSpaceConfig cfg;
    cfg.filters_min = 16;
    cfg.filters_max = 24;
    cfg.kernel_min = 3;
    cfg.kernel_max = 5;
    cfg.stride_min = 1;
    cfg.stride_max = 3;
    cfg.max_depth = 2;
    return cfg;
}

BatchTensor random_batch(Rng& rng, long batch, long length) {
    BatchTensor t(batch, length, 1);
    for (auto& v : t.data) v = uniform_real(rng, 0.0, 1.0);
    return t;
}

std::vector<uint16_t> random_labels(Rng& rng, long batch, int n_classes) {
    std::vector<uint16_t> y(static_cast<size_t>(batch));
    for (auto& v : y) v = uint16_t(uniform_int(rng, 0, n_classes - 1));
    return y;
}

void randomize_running_stats(Network& net, Rng& rng) {
    for (Tensor* t : net.tensors()) {
        if (t->name.find("moving_mean") != std::string::npos)
            for (auto& v : t->value) v = uniform_real(rng, -0.5, 0.5);
        if (t->name.find("moving_var") != std::string::npos)
            for (auto& v : t->value) v = uniform_real(rng, 0.25, 2.0);
    }
}

double rel_diff(double a, double b) {
    return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

struct GradCheckStats {
    size_t total = 0;
    size_t ok = 0;
    double worst = 0.0;
};

GradCheckStats grad_check(const Architecture& arch, uint64_t seed, long batch, double eps = 1e-4,
                          double tol = 1e-4) {
    Rng rng(seed);
    Network net(arch, seed);
    net.set_bn_update(false);
    auto input = random_batch(rng, batch, arch.input_len);
    auto labels = random_labels(rng, batch, arch.n_classes);
    const uint64_t mask_seed = derive_seed(seed, 0xfeed);

    net.zero_grads();
    net.reseed_dropout(mask_seed);
    net.loss_and_grad(input, labels);
    std::vector<std::vector<double>> grads;
    for (auto* t : net.trainable()) grads.push_back(t->grad);

    auto loss_at = [&]() {
        net.reseed_dropout(mask_seed);
        auto logits = net.forward(input, Mode::train);
        return softmax_cross_entropy(logits, labels).loss;
    };

    GradCheckStats stats;
    auto& trainable = net.trainable();
    for (size_t ti = 0; ti < trainable.size(); ++ti) {
        Tensor* t = trainable[ti];
        for (size_t j = 0; j < t->size(); ++j) {
            double v0 = t->value[j];
            t->value[j] = v0 + eps;
            double lp = loss_at();
            t->value[j] = v0 - eps;
            double lm = loss_at();
            t->value[j] = v0;
            double fd = (lp - lm) / (2 * eps);
            double g = grads[ti][j];
            double rel = std::abs(g - fd) / std::max(std::abs(g) + std::abs(fd), 1e-3);
            ++stats.total;
            if (rel <= tol) ++stats.ok;
            stats.worst = std::max(stats.worst, rel);
        }
    }
    return stats;
}

} // namespace

TEST_CASE("zero weights produce zero logits and a uniform softmax") {
    Architecture arch = ts::reference_architecture(196, 11);
    Network net(arch, 3);
    for (auto* t : net.tensors()) std::fill(t->value.begin(), t->value.end(), 0.0);
    Rng rng(5);
    auto input = random_batch(rng, 3, arch.input_len);
    auto logits = net.forward(input, Mode::eval);
    for (double v : logits.data) CHECK(v == 0.0);
    auto probs = softmax_rows(logits);
    for (double p : probs) CHECK_THAT(p, Catch::Matchers::WithinAbs(1.0 / 11.0, 1e-12));

    auto train_logits = net.forward(input, Mode::train);
    for (double v : train_logits.data) CHECK(v == 0.0);
}

TEST_CASE("k=1 identity kernel broadcasts the input across filters") {
    Conv1D conv("c", 1, 4, 1, 1, Padding::valid);
    std::vector<Tensor*> all, trainable;
    conv.collect(all, trainable);
    std::fill(all[0]->value.begin(), all[0]->value.end(), 1.0);
    Rng rng(7);
    auto input = random_batch(rng, 2, 9);
    auto out = conv.forward(input, Mode::eval);
    REQUIRE(out.length == 9);
    REQUIRE(out.channels == 4);
    for (long b = 0; b < 2; ++b)
        for (long t = 0; t < 9; ++t)
            for (long c = 0; c < 4; ++c) CHECK(out.at(b, t, c) == input.at(b, t, 0));
}

TEST_CASE("uniform logits cost ln(n_classes)") {
    BatchTensor logits(4, 1, 11); // all zeros
    std::vector<uint16_t> labels{0, 3, 7, 10};
    auto res = softmax_cross_entropy(logits, labels);
    CHECK_THAT(res.loss, Catch::Matchers::WithinAbs(std::log(11.0), 1e-12));
}

TEST_CASE("saturated correct logits cost nothing and push no gradient") {
    BatchTensor logits(2, 1, 4);
    std::vector<uint16_t> labels{1, 2};
    logits.at(0, 0, 1) = 50.0;
    logits.at(1, 0, 2) = 50.0;
    auto res = softmax_cross_entropy(logits, labels);
    CHECK(res.loss < 1e-12);
    for (double g : res.dlogits.data) CHECK(std::abs(g) < 1e-12);
}

TEST_CASE("softmax rows sum to one") {
    Rng rng(11);
    BatchTensor logits(16, 1, 7);
    for (auto& v : logits.data) v = uniform_real(rng, -30.0, 30.0);
    auto probs = softmax_rows(logits);
    for (long b = 0; b < 16; ++b) {
        double sum = 0.0;
        for (long c = 0; c < 7; ++c) sum += probs[size_t(b * 7 + c)];
        CHECK_THAT(sum, Catch::Matchers::WithinAbs(1.0, 1e-9));
    }
}

TEST_CASE("forward matches the naive reference on random instances") {
    Rng rng(13);
    auto cfg = small_space();
    for (int trial = 0; trial < 25; ++trial) {
        int input_len = uniform_int(rng, 32, 96);
        int n_classes = uniform_int(rng, 2, 6);
        auto arch = ts::random_valid_arch(rng, input_len, n_classes, cfg);
        for (auto& b : arch.blocks) b.dropout_rate = 0.0; // oracle covers deterministic layers
        Network net(arch, derive_seed(13, uint64_t(trial)));
        randomize_running_stats(net, rng);

        long batch = uniform_int(rng, 1, 4);
        auto input = random_batch(rng, batch, input_len);
        std::vector<std::vector<double>> rows(static_cast<size_t>(batch));
        for (long b = 0; b < batch; ++b)
            rows[size_t(b)].assign(input.row(b, 0), input.row(b, 0) + input_len);

        Mode mode = trial % 2 == 0 ? Mode::eval : Mode::train;
        net.set_bn_update(false);
        auto logits = net.forward(input, mode);
        auto expected = ts::naive_forward(arch, net, rows, mode);
        for (long b = 0; b < batch; ++b)
            for (long c = 0; c < logits.channels; ++c)
                CHECK(rel_diff(logits.at(b, 0, c), expected[size_t(b)][size_t(c)]) < 1e-6);
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(17);
    auto cfg = small_space();
    size_t total = 0, ok = 0;
    for (int trial = 0; trial < 5; ++trial) {
        int input_len = uniform_int(rng, 24, 48);
        int n_classes = uniform_int(rng, 2, 5);
        auto arch = ts::random_valid_arch(rng, input_len, n_classes, cfg);
        if (trial < 3) // keep dropout in a couple of nets; masks are re-seeded per evaluation
            for (auto& b : arch.blocks) b.dropout_rate = 0.0;
        auto stats = grad_check(arch, derive_seed(99, uint64_t(trial)), 2);
        total += stats.total;
        ok += stats.ok;
        INFO("trial " << trial << " worst rel err " << stats.worst);
        CHECK(double(stats.ok) >= 0.99 * double(stats.total));
    }
    CHECK(double(ok) >= 0.99 * double(total));
}

TEST_CASE("eval logits are batch-composition invariant") {
    Rng rng(19);
    auto arch = ts::random_valid_arch(rng, 64, 4, small_space());
    Network net(arch, 21);
    randomize_running_stats(net, rng);
    auto batch = random_batch(rng, 6, 64);
    auto all = net.forward(batch, Mode::eval);
    for (long b = 0; b < 6; ++b) {
        BatchTensor single(1, 64, 1);
        std::copy_n(batch.row(b, 0), 64, single.data.begin());
        auto one = net.forward(single, Mode::eval);
        for (long c = 0; c < all.channels; ++c)
            CHECK(rel_diff(one.at(0, 0, c), all.at(b, 0, c)) < 1e-6);
    }
}

TEST_CASE("train-mode batch norm cancels a positive input rescale") {
    BatchNorm bn("t", 3);
    Rng rng(23);
    BatchTensor x(4, 10, 3);
    for (auto& v : x.data) v = uniform_real(rng, -1.0, 1.0);
    BatchTensor x2 = x;
    for (auto& v : x2.data) v *= 3.5;
    auto y1 = bn.forward(x, Mode::train);
    auto y2 = bn.forward(x2, Mode::train);
    for (size_t i = 0; i < y1.data.size(); ++i) CHECK(std::abs(y1.data[i] - y2.data[i]) < 1e-6);
}

TEST_CASE("non-finite activations are detected") {
    Architecture arch = default_initial_parent(64, 3);
    Network net(arch, 31);
    Tensor* w = net.find_tensor("block0/conv/kernel");
    REQUIRE(w != nullptr);
    w->value[0] = std::numeric_limits<double>::quiet_NaN();
    Rng rng(37);
    auto input = random_batch(rng, 2, 64);
    CHECK_THROWS_AS(net.forward(input, Mode::eval), NonFiniteActivation);
}

TEST_CASE("input length mismatch is rejected") {
    Architecture arch = default_initial_parent(64, 3);
    Network net(arch, 31);
    Rng rng(41);
    auto wrong = random_batch(rng, 2, 63);
    CHECK_THROWS_AS(net.forward(wrong, Mode::eval), ShapeMismatch);
}

TEST_CASE("max pool ties route gradient to the earliest index") {
    MaxPool pool(2, 2, Padding::valid);
    BatchTensor in(1, 4, 1);
    in.at(0, 0, 0) = 5.0;
    in.at(0, 1, 0) = 5.0; // tie within the first window
    in.at(0, 2, 0) = 1.0;
    in.at(0, 3, 0) = 2.0;
    auto out = pool.forward(in, Mode::train);
    REQUIRE(out.length == 2);
    BatchTensor dout(1, 2, 1);
    dout.at(0, 0, 0) = 1.0;
    dout.at(0, 1, 0) = 1.0;
    auto din = pool.backward(in, out, dout);
    CHECK(din.at(0, 0, 0) == 1.0);
    CHECK(din.at(0, 1, 0) == 0.0);
    CHECK(din.at(0, 3, 0) == 1.0);
}

TEST_CASE("engine results are identical under different worker counts") {
    Rng rng(43);
    auto arch = ts::random_valid_arch(rng, 96, 4, small_space());
    for (auto& b : arch.blocks) b.dropout_rate = 0.0;
    auto input = random_batch(rng, 7, 96);
    auto labels = random_labels(rng, 7, 4);

    auto run = [&](int jobs) {
        engine_jobs() = jobs;
        Network net(arch, 77);
        net.zero_grads();
        net.loss_and_grad(input, labels);
        std::vector<double> flat;
        for (auto* t : net.trainable()) flat.insert(flat.end(), t->grad.begin(), t->grad.end());
        engine_jobs() = 1;
        return flat;
    };
    auto g1 = run(1);
    auto g3 = run(3);
    REQUIRE(g1.size() == g3.size());
    for (size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g3[i]);
}

TEST_CASE("weights checkpoint round trip") {
    Rng rng(47);
    auto arch = ts::random_valid_arch(rng, 48, 3, small_space());
    Network net(arch, 53);
    randomize_running_stats(net, rng);

    std::ostringstream os(std::ios::binary);
    save_weights(net, os);
    std::string bytes = os.str();

    Network loaded(arch, 0);
    std::istringstream is(bytes, std::ios::binary);
    load_weights(loaded, is);

    // float32 storage: save -> load -> save is bit-stable
    std::ostringstream os2(std::ios::binary);
    save_weights(loaded, os2);
    CHECK(os2.str() == bytes);

    auto input = random_batch(rng, 2, 48);
    auto a = net.forward(input, Mode::eval);
    auto b = loaded.forward(input, Mode::eval);
    for (size_t i = 0; i < a.data.size(); ++i)
        CHECK(std::abs(a.data[i] - b.data[i]) < 1e-4); // float32 rounding only

    std::istringstream bad("nope", std::ios::binary);
    CHECK_THROWS_AS(load_weights(loaded, bad), BadMagic);

    std::istringstream trunc(bytes.substr(0, bytes.size() / 2), std::ios::binary);
    CHECK_THROWS_AS(load_weights(loaded, trunc), Error);
}

TEST_CASE("non-finite loss reports divergence") {
    BatchTensor logits(1, 1, 3);
    logits.at(0, 0, 1) = std::numeric_limits<double>::quiet_NaN();
    std::vector<uint16_t> labels{0};
    CHECK_THROWS_AS(softmax_cross_entropy(logits, labels), DivergedLoss);
}
