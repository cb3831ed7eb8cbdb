#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <vector>

#include "flownas/dataset.hpp"
#include "flownas/metrics.hpp"
#include "flownas/network.hpp"

namespace flownas {

// Scaled samples ready for the engine: row-major [n][input_len], values in [0,1].
struct TrainingData {
    long input_len = 0;
    int n_classes = 0;
    std::vector<double> x;
    std::vector<uint16_t> y;

    size_t size() const { return y.size(); }
    const double* sample(size_t i) const { return x.data() + long(i) * input_len; }
};

inline TrainingData to_training_data(const Dataset& ds) {
    TrainingData td;
    td.input_len = long(ds.input_len);
    td.n_classes = ds.n_classes;
    td.x.reserve(ds.samples.size() * ds.input_len);
    td.y.reserve(ds.samples.size());
    for (const auto& s : ds.samples) {
        for (uint8_t b : s.bytes) td.x.push_back(double(b) / 255.0);
        td.y.push_back(s.label);
    }
    return td;
}

inline TrainingData subset(const TrainingData& td, std::span<const size_t> indices) {
    TrainingData out;
    out.input_len = td.input_len;
    out.n_classes = td.n_classes;
    out.x.reserve(indices.size() * size_t(td.input_len));
    out.y.reserve(indices.size());
    for (size_t i : indices) {
        const double* row = td.sample(i);
        out.x.insert(out.x.end(), row, row + td.input_len);
        out.y.push_back(td.y[i]);
    }
    return out;
}

// Seeded shuffle-then-split holdout; the second part holds val_fraction.
inline std::pair<TrainingData, TrainingData> split_holdout(const TrainingData& td,
                                                           double val_fraction, uint64_t seed) {
    std::vector<size_t> idx(td.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    size_t n_val = size_t(std::llround(double(td.size()) * val_fraction));
    n_val = std::min(n_val, td.size());
    std::span<const size_t> val_idx(idx.data(), n_val);
    std::span<const size_t> train_idx(idx.data() + n_val, td.size() - n_val);
    return {subset(td, train_idx), subset(td, val_idx)};
}

inline BatchTensor make_batch(const TrainingData& td, std::span<const size_t> indices) {
    BatchTensor batch(long(indices.size()), td.input_len, 1);
    for (size_t i = 0; i < indices.size(); ++i)
        std::copy_n(td.sample(indices[i]), td.input_len, batch.data.begin() + long(i) * td.input_len);
    return batch;
}

struct TrainConfig {
    int max_epochs = 100;
    long batch_size = 128;
    double initial_lr = 1e-3;
    int plateau_patience = 5;
    double plateau_factor = 0.5;
    double min_lr = 1e-5;
    int early_stop_patience = 10;
    int multi_start = 3;
    double max_train_seconds = 0.0; // wall-clock budget per run; 0 = unlimited
    uint64_t seed = 0;

    void validate() const {
        if (max_epochs < 1 || batch_size < 1 || plateau_patience < 1 ||
            early_stop_patience < 1 || multi_start < 1 || initial_lr <= 0.0 || min_lr <= 0.0 ||
            max_train_seconds < 0.0)
            throw ConfigError("training hyperparameters must be positive");
        if (plateau_factor <= 0.0 || plateau_factor >= 1.0)
            throw ConfigError("plateau_factor must lie in (0,1)");
    }
};

class Adam {
public:
    Adam(std::vector<Tensor*> params, double lr, double beta1 = 0.9, double beta2 = 0.999,
         double eps = 1e-7)
        : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (auto* p : params_) {
            m_.emplace_back(p->size(), 0.0);
            v_.emplace_back(p->size(), 0.0);
        }
    }

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }

    void step() {
        ++t_;
        double bc1 = 1.0 - std::pow(beta1_, t_);
        double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t i = 0; i < params_.size(); ++i) {
            Tensor* p = params_[i];
            auto& m = m_[i];
            auto& v = v_[i];
            for (size_t j = 0; j < p->size(); ++j) {
                double g = p->grad[j];
                m[j] = beta1_ * m[j] + (1 - beta1_) * g;
                v[j] = beta2_ * v[j] + (1 - beta2_) * g * g;
                p->value[j] -= lr_ * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + eps_);
            }
        }
    }

private:
    std::vector<Tensor*> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long t_ = 0;
};

// Plateau LR reduction + early stopping, both driven by validation loss.
// Improvement means strictly lower loss than the best seen so far.
class FitController {
public:
    FitController(const TrainConfig& cfg)
        : lr_(cfg.initial_lr), patience_(cfg.plateau_patience), factor_(cfg.plateau_factor),
          min_lr_(cfg.min_lr), stop_patience_(cfg.early_stop_patience) {}

    struct Decision {
        double lr;
        bool improved;
        bool stop;
    };

    Decision observe(double val_loss) {
        Decision d{lr_, false, false};
        if (val_loss < best_) {
            best_ = val_loss;
            plateau_count_ = 0;
            stall_count_ = 0;
            d.improved = true;
        } else {
            ++plateau_count_;
            ++stall_count_;
            if (plateau_count_ >= patience_) {
                lr_ = std::max(min_lr_, lr_ * factor_);
                plateau_count_ = 0;
            }
            if (stall_count_ >= stop_patience_) d.stop = true;
        }
        d.lr = lr_;
        return d;
    }

    double best() const { return best_; }

private:
    double lr_;
    int patience_;
    double factor_;
    double min_lr_;
    int stop_patience_;
    double best_ = std::numeric_limits<double>::infinity();
    int plateau_count_ = 0;
    int stall_count_ = 0;
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double val_loss = 0.0;
    double val_acc = 0.0;
    double lr = 0.0;
};

struct TrainResult {
    std::vector<EpochStats> history;
    double best_val_acc = 0.0;  // max over epochs (scores the architecture)
    double best_val_loss = std::numeric_limits<double>::infinity();
    int best_epoch = -1; // epoch whose weights are returned (min val loss)
    double seconds = 0.0;
};

struct TrainedModel {
    std::shared_ptr<Network> net;
    TrainResult result;
};

inline double eval_loss_and_acc(Network& net, const TrainingData& data, long batch_size,
                                double& acc_out) {
    if (data.size() == 0) throw EmptyDataset("evaluation set is empty");
    double total = 0.0;
    long correct = 0;
    for (size_t start = 0; start < data.size(); start += size_t(batch_size)) {
        size_t n = std::min(size_t(batch_size), data.size() - start);
        std::vector<size_t> idx(n);
        std::iota(idx.begin(), idx.end(), start);
        auto batch = make_batch(data, idx);
        auto logits = net.forward(batch, Mode::eval);
        auto probs = softmax_rows(logits);
        for (size_t i = 0; i < n; ++i) {
            const double* p = probs.data() + long(i) * logits.channels;
            long y = data.y[start + i];
            total += -std::log(std::max(p[y], 1e-300));
            int best = 0;
            for (long c = 1; c < logits.channels; ++c)
                if (p[c] > p[best]) best = int(c);
            if (best == int(y)) ++correct;
        }
    }
    acc_out = double(correct) / double(data.size());
    return total / double(data.size());
}

inline EvalReport evaluate(Network& net, const TrainingData& data, long batch_size = 256) {
    std::vector<int> predictions;
    predictions.reserve(data.size());
    for (size_t start = 0; start < data.size(); start += size_t(batch_size)) {
        size_t n = std::min(size_t(batch_size), data.size() - start);
        std::vector<size_t> idx(n);
        std::iota(idx.begin(), idx.end(), start);
        auto batch = make_batch(data, idx);
        auto preds = net.predict(batch);
        predictions.insert(predictions.end(), preds.begin(), preds.end());
    }
    return compute_metrics(predictions, data.y, data.n_classes);
}

// One training run: Adam with plateau reduction and early stopping on the
// validation loss; the returned network carries the weights of the best
// validation-loss epoch.
inline TrainedModel train_model(const Architecture& arch, const TrainingData& train_set,
                                const TrainingData& val_set, const TrainConfig& cfg,
                                uint64_t seed) {
    cfg.validate();
    if (train_set.size() == 0) throw EmptyDataset("training set is empty");
    if (val_set.size() == 0) throw EmptyDataset("validation set is empty");
    auto t0 = std::chrono::steady_clock::now();

    TrainedModel model;
    model.net = std::make_shared<Network>(arch, seed);
    Network& net = *model.net;
    net.reseed_dropout(derive_seed(seed, 0xd509));
    Adam opt(net.trainable(), cfg.initial_lr);
    FitController controller(cfg);
    Rng shuffle_rng(derive_seed(seed, 0x5075));

    std::vector<std::vector<double>> best_weights;
    auto snapshot = [&] {
        best_weights.clear();
        for (auto* t : net.tensors()) best_weights.push_back(t->value);
    };
    auto restore = [&] {
        if (best_weights.empty()) return;
        auto& tensors = net.tensors();
        for (size_t i = 0; i < tensors.size(); ++i) tensors[i]->value = best_weights[i];
    };

    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double loss_sum = 0.0;
        long correct = 0;
        for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
            size_t n = std::min(size_t(cfg.batch_size), order.size() - start);
            std::span<const size_t> idx(order.data() + start, n);
            auto batch = make_batch(train_set, idx);
            std::vector<uint16_t> labels(n);
            for (size_t i = 0; i < n; ++i) labels[i] = train_set.y[idx[i]];
            net.zero_grads();
            long batch_correct = 0;
            double loss = net.loss_and_grad(batch, labels, &batch_correct);
            opt.step();
            loss_sum += loss * double(n);
            correct += batch_correct;
        }

        double val_acc = 0.0;
        double val_loss = eval_loss_and_acc(net, val_set, cfg.batch_size, val_acc);

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / double(train_set.size());
        stats.train_acc = double(correct) / double(train_set.size());
        stats.val_loss = val_loss;
        stats.val_acc = val_acc;
        stats.lr = opt.lr();

        model.result.best_val_acc = std::max(model.result.best_val_acc, val_acc);
        auto decision = controller.observe(val_loss);
        if (decision.improved) {
            model.result.best_val_loss = val_loss;
            model.result.best_epoch = epoch;
            snapshot();
        }
        opt.set_lr(decision.lr);
        stats.lr = decision.lr;
        model.result.history.push_back(stats);
        if (decision.stop) break;
        if (cfg.max_train_seconds > 0.0 &&
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() >=
                cfg.max_train_seconds)
            break;
    }
    restore();
    model.result.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return model;
}

struct RunScore {
    double val_acc = 0.0;
    double val_loss = std::numeric_limits<double>::infinity();
};

// Best run: maximal validation accuracy, ties by lower validation loss,
// then by lower run index.
inline size_t pick_best_run(std::span<const RunScore> runs) {
    size_t best = 0;
    for (size_t i = 1; i < runs.size(); ++i) {
        if (runs[i].val_acc > runs[best].val_acc ||
            (runs[i].val_acc == runs[best].val_acc && runs[i].val_loss < runs[best].val_loss))
            best = i;
    }
    return best;
}

inline TrainedModel multi_start_train(const Architecture& arch, const TrainingData& train_set,
                                      const TrainingData& val_set, const TrainConfig& cfg) {
    std::vector<TrainedModel> models;
    std::vector<RunScore> scores;
    int starts = std::max(1, cfg.multi_start);
    for (int run = 0; run < starts; ++run) {
        uint64_t seed = derive_seed(cfg.seed, 0x7275, uint64_t(run));
        models.push_back(train_model(arch, train_set, val_set, cfg, seed));
        scores.push_back({models.back().result.best_val_acc, models.back().result.best_val_loss});
    }
    return std::move(models[pick_best_run(scores)]);
}

} // namespace flownas
