#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "flownas/network.hpp"
#include "flownas/train.hpp"

namespace flownas {

// Asymmetric affine quantization parameters for one tensor (or one channel).
struct QuantParams {
    double scale = 1.0;
    int zero_point = 0;
};

struct QuantConfig {
    int bits = 8;
    bool per_channel = false; // per output channel for conv/dense weights
};

constexpr double kScaleFloor = 1e-8;

inline long q_lo(int bits) { return -(1L << (bits - 1)); }
inline long q_hi(int bits) { return (1L << (bits - 1)) - 1; }

// Range-based affine params; the range is widened to include zero so that
// zero always quantizes exactly.
inline QuantParams affine_params(double lo, double hi, int bits) {
    lo = std::min(lo, 0.0);
    hi = std::max(hi, 0.0);
    QuantParams p;
    p.scale = std::max((hi - lo) / double(q_hi(bits) - q_lo(bits)), kScaleFloor);
    p.zero_point = int(q_lo(bits) - std::llround(lo / p.scale));
    p.zero_point = int(std::clamp<long>(p.zero_point, q_lo(bits), q_hi(bits)));
    return p;
}

// Symmetric params used for weights: zero point 0, range +-max|w|.
inline QuantParams symmetric_params(double max_abs, int bits) {
    QuantParams p;
    p.scale = std::max(max_abs / double(q_hi(bits)), kScaleFloor);
    p.zero_point = 0;
    return p;
}

inline long quantize_value(double x, const QuantParams& p, int bits) {
    long q = std::llround(x / p.scale) + p.zero_point;
    return std::clamp(q, q_lo(bits), q_hi(bits));
}

inline double dequantize_value(long q, const QuantParams& p) {
    return double(q - p.zero_point) * p.scale;
}

inline double fake_quant(double x, const QuantParams& p, int bits) {
    return dequantize_value(quantize_value(x, p, bits), p);
}

inline void fake_quant_span(std::span<double> values, const QuantParams& p, int bits) {
    for (auto& v : values) v = fake_quant(v, p, bits);
}

// Simulated post-training quantization of a trained model. Batch norm is
// folded into the preceding convolution; weights carry symmetric per-tensor
// (or per-channel) params; activation ranges come from calibration batches.
// All arithmetic stays real-valued on dequantized grids (fake quantization).
class QuantizedModel {
public:
    QuantizedModel(Network& net, QuantConfig cfg = {}) : arch_(net.arch()), cfg_(cfg) {
        fold(net);
    }

    // Observes activation ranges on calibration batches (running min/max),
    // then freezes the activation quantization grid.
    void calibrate(std::span<const BatchTensor> batches) {
        if (batches.empty()) throw EmptyCalibration("at least one calibration batch required");
        act_lo_.assign(n_act_points(), std::numeric_limits<double>::infinity());
        act_hi_.assign(n_act_points(), -std::numeric_limits<double>::infinity());
        for (const auto& batch : batches) run(batch, /*quantized=*/false, /*observe=*/true);
        act_params_.clear();
        for (size_t i = 0; i < act_lo_.size(); ++i)
            act_params_.push_back(affine_params(act_lo_[i], act_hi_[i], cfg_.bits));
        calibrated_ = true;
    }

    bool calibrated() const { return calibrated_; }

    // Folded real-valued forward (no quantization anywhere).
    BatchTensor forward_real(const BatchTensor& input) { return run(input, false, false); }

    BatchTensor forward(const BatchTensor& input) {
        if (!calibrated_) throw NotCalibrated("calibrate() must run before quantized inference");
        return run(input, true, false);
    }

    std::vector<int> predict(const BatchTensor& input) {
        auto logits = forward(input);
        std::vector<int> out(size_t(logits.batch));
        for (long b = 0; b < logits.batch; ++b) {
            const double* z = logits.row(b, 0);
            int best = 0;
            for (long c = 1; c < logits.channels; ++c)
                if (z[c] > z[best]) best = int(c);
            out[size_t(b)] = best;
        }
        return out;
    }

    const std::vector<QuantParams>& activation_params() const { return act_params_; }
    const std::vector<std::vector<QuantParams>>& weight_params() const { return weight_params_; }

private:
    struct FoldedBlock {
        std::unique_ptr<Conv1D> conv_real;  // exact folded weights
        std::unique_ptr<Conv1D> conv_quant; // fake-quantized folded weights
        std::unique_ptr<Layer> pool;        // may be null
    };

    size_t n_act_points() const { return arch_.blocks.size() + 3; } // input, per block, gap, logits

    // Fold eval-mode batch norm into the convolution:
    //   w' = w * gamma / sqrt(var + eps), b' = beta + (b - mean) * gamma / sqrt(var + eps)
    void fold(Network& net) {
        long channels = arch_.input_channels;
        for (size_t i = 0; i < arch_.blocks.size(); ++i) {
            const auto& spec = arch_.blocks[i];
            std::string prefix = "block" + std::to_string(i);
            const Tensor& kernel = *net.find_tensor(prefix + "/conv/kernel");
            const Tensor& bias = *net.find_tensor(prefix + "/conv/bias");
            const Tensor& gamma = *net.find_tensor(prefix + "/bn/gamma");
            const Tensor& beta = *net.find_tensor(prefix + "/bn/beta");
            const Tensor& mean = *net.find_tensor(prefix + "/bn/moving_mean");
            const Tensor& var = *net.find_tensor(prefix + "/bn/moving_var");

            FoldedBlock fb;
            fb.conv_real = std::make_unique<Conv1D>(prefix + "/folded", channels, spec.filters,
                                                    spec.kernel, spec.stride, spec.padding);
            std::vector<Tensor*> all, trainable;
            fb.conv_real->collect(all, trainable);
            Tensor& w = *all[0];
            Tensor& b = *all[1];
            long co_n = spec.filters;
            std::vector<double> factor(static_cast<size_t>(co_n));
            for (long co = 0; co < co_n; ++co)
                factor[size_t(co)] =
                    gamma.value[size_t(co)] / std::sqrt(var.value[size_t(co)] + kBnEps);
            for (size_t j = 0; j < kernel.value.size(); ++j)
                w.value[j] = kernel.value[j] * factor[j % size_t(co_n)];
            for (long co = 0; co < co_n; ++co)
                b.value[size_t(co)] = beta.value[size_t(co)] +
                                      (bias.value[size_t(co)] - mean.value[size_t(co)]) *
                                          factor[size_t(co)];
            if (spec.pool.enabled()) {
                if (spec.pool.kind == PoolKind::max)
                    fb.pool = std::make_unique<MaxPool>(spec.pool.size, spec.pool.stride,
                                                        spec.pool.padding);
                else
                    fb.pool = std::make_unique<AvgPool>(spec.pool.size, spec.pool.stride,
                                                        spec.pool.padding);
            }
            fb.conv_quant = std::make_unique<Conv1D>(prefix + "/quant", channels, spec.filters,
                                                     spec.kernel, spec.stride, spec.padding);
            std::vector<Tensor*> qall, qtrainable;
            fb.conv_quant->collect(qall, qtrainable);
            qall[0]->value = w.value;
            qall[1]->value = b.value;
            quantize_weights(*qall[0]);
            blocks_.push_back(std::move(fb));
            channels = spec.filters;
        }
        dense_real_ = std::make_unique<Dense>("head/folded", channels, arch_.n_classes);
        dense_quant_ = std::make_unique<Dense>("head/quant", channels, arch_.n_classes);
        for (auto* d : {dense_real_.get(), dense_quant_.get()}) {
            std::vector<Tensor*> all, trainable;
            d->collect(all, trainable);
            all[0]->value = net.find_tensor("head/dense/kernel")->value;
            all[1]->value = net.find_tensor("head/dense/bias")->value;
            if (d == dense_quant_.get()) quantize_weights(*all[0]);
        }
    }

    // Symmetric fake-quant of weights, stored dequantized. Biases stay real,
    // mirroring the usual int32-bias convention.
    void quantize_weights(Tensor& w) {
        std::vector<QuantParams> params;
        long co_n = w.dims.back();
        if (cfg_.per_channel) {
            for (long co = 0; co < co_n; ++co) {
                double max_abs = 0.0;
                for (size_t j = size_t(co); j < w.value.size(); j += size_t(co_n))
                    max_abs = std::max(max_abs, std::abs(w.value[j]));
                params.push_back(symmetric_params(max_abs, cfg_.bits));
            }
            for (size_t j = 0; j < w.value.size(); ++j)
                w.value[j] = fake_quant(w.value[j], params[j % size_t(co_n)], cfg_.bits);
        } else {
            double max_abs = 0.0;
            for (double v : w.value) max_abs = std::max(max_abs, std::abs(v));
            params.push_back(symmetric_params(max_abs, cfg_.bits));
            fake_quant_span(w.value, params[0], cfg_.bits);
        }
        weight_params_.push_back(std::move(params));
    }

    void touch_point(BatchTensor& t, size_t point, bool quantized, bool observe) {
        if (observe) {
            for (double v : t.data) {
                act_lo_[point] = std::min(act_lo_[point], v);
                act_hi_[point] = std::max(act_hi_[point], v);
            }
        } else if (quantized) {
            fake_quant_span(t.data, act_params_[point], cfg_.bits);
        }
    }

    BatchTensor run(const BatchTensor& input, bool quantized, bool observe) {
        BatchTensor x = input;
        size_t point = 0;
        touch_point(x, point++, quantized, observe);
        for (auto& fb : blocks_) {
            x = (quantized ? *fb.conv_quant : *fb.conv_real).forward(x, Mode::eval);
            for (auto& v : x.data) v = v > 0.0 ? v : 0.0;
            if (fb.pool) x = fb.pool->forward(x, Mode::eval);
            touch_point(x, point++, quantized, observe);
        }
        x = gap_.forward(x, Mode::eval);
        touch_point(x, point++, quantized, observe);
        x = (quantized ? *dense_quant_ : *dense_real_).forward(x, Mode::eval);
        touch_point(x, point++, quantized, observe);
        return x;
    }

    Architecture arch_;
    QuantConfig cfg_;
    std::vector<FoldedBlock> blocks_;
    GlobalAvgPool gap_;
    std::unique_ptr<Dense> dense_real_, dense_quant_;
    std::vector<std::vector<QuantParams>> weight_params_;
    std::vector<double> act_lo_, act_hi_;
    std::vector<QuantParams> act_params_;
    bool calibrated_ = false;
};

struct QuantClassRow {
    int cls = -1; // -1 = overall
    double acc_real = 0.0;
    double acc_quant = 0.0;
    double delta = 0.0;
};

struct QuantReport {
    double acc_real = 0.0;
    double acc_quant = 0.0;
    double delta = 0.0;
    std::vector<QuantClassRow> rows; // overall first, then one per class
};

// Evaluates both models on identical data; per-class rows compare recall.
inline QuantReport compare_models(Network& real_model, QuantizedModel& quant_model,
                                  const TrainingData& data, long batch_size = 256) {
    std::vector<int> real_preds, quant_preds;
    for (size_t start = 0; start < data.size(); start += size_t(batch_size)) {
        size_t n = std::min(size_t(batch_size), data.size() - start);
        std::vector<size_t> idx(n);
        std::iota(idx.begin(), idx.end(), start);
        auto batch = make_batch(data, idx);
        auto r = real_model.predict(batch);
        auto q = quant_model.predict(batch);
        real_preds.insert(real_preds.end(), r.begin(), r.end());
        quant_preds.insert(quant_preds.end(), q.begin(), q.end());
    }
    auto real_metrics = compute_metrics(real_preds, data.y, data.n_classes);
    auto quant_metrics = compute_metrics(quant_preds, data.y, data.n_classes);

    QuantReport report;
    report.acc_real = real_metrics.accuracy;
    report.acc_quant = quant_metrics.accuracy;
    report.delta = report.acc_real - report.acc_quant;
    report.rows.push_back({-1, report.acc_real, report.acc_quant, report.delta});
    for (int c = 0; c < data.n_classes; ++c) {
        double r = real_metrics.per_class[size_t(c)].recall;
        double q = quant_metrics.per_class[size_t(c)].recall;
        report.rows.push_back({c, r, q, r - q});
    }
    return report;
}

} // namespace flownas
