#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "flownas/arch.hpp"
#include "flownas/rng.hpp"
#include "flownas/tensor.hpp"
#include "flownas/threading.hpp"

namespace flownas {

constexpr double kBnEps = 1e-8;
constexpr double kBnMomentum = 0.9;

enum class Mode : uint8_t { train, eval };

struct PadPlan {
    long out_len = 0;
    long pad_left = 0;
};

// Output length and left padding for a window op. "Same" keeps
// ceil(in/stride) outputs with the surplus zero on the right.
inline PadPlan pad_plan(long in_len, long window, long stride, Padding padding) {
    PadPlan plan;
    if (padding == Padding::same) {
        plan.out_len = (in_len + stride - 1) / stride;
        long total = std::max<long>(0, (plan.out_len - 1) * stride + window - in_len);
        plan.pad_left = total / 2;
    } else {
        plan.out_len = in_len >= window ? (in_len - window) / stride + 1 : 0;
        plan.pad_left = 0;
    }
    if (plan.out_len < 1)
        throw ShapeMismatch("window of " + std::to_string(window) + " over length " +
                            std::to_string(in_len) + " leaves no output");
    return plan;
}

class Layer {
public:
    virtual ~Layer() = default;
    virtual BatchTensor forward(const BatchTensor& in, Mode mode) = 0;
    // in/out are the tensors from the matching forward call.
    virtual BatchTensor backward(const BatchTensor& in, const BatchTensor& out,
                                 const BatchTensor& dout) = 0;
    virtual void collect(std::vector<Tensor*>& all, std::vector<Tensor*>& trainable) {
        (void)all;
        (void)trainable;
    }
};

class Conv1D : public Layer {
public:
    Conv1D(const std::string& prefix, long in_channels, long filters, long kernel, long stride,
           Padding padding)
        : in_channels_(in_channels), filters_(filters), kernel_(kernel), stride_(stride),
          padding_(padding),
          weight_(prefix + "/kernel", {kernel, in_channels, filters}),
          bias_(prefix + "/bias", {filters}) {}

    void init(Rng& rng) {
        double limit = std::sqrt(6.0 / double(kernel_ * in_channels_));
        for (auto& w : weight_.value) w = uniform_real(rng, -limit, limit);
        std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
    }

    BatchTensor forward(const BatchTensor& in, Mode) override {
        if (in.channels != in_channels_)
            throw ShapeMismatch("conv input channels " + std::to_string(in.channels) +
                                " != " + std::to_string(in_channels_));
        auto plan = pad_plan(in.length, kernel_, stride_, padding_);
        BatchTensor out(in.batch, plan.out_len, filters_);
        const double* w = weight_.value.data();
        const double* bias = bias_.value.data();
        long chunks = std::min<long>(kGradChunks, in.batch);
        parallel_chunks(chunks, [&](long chunk) {
            auto [b0, b1] = chunk_range(in.batch, chunks, chunk);
            for (long b = b0; b < b1; ++b) {
                for (long t = 0; t < plan.out_len; ++t) {
                    double* out_row = out.row(b, t);
                    for (long co = 0; co < filters_; ++co) out_row[co] = bias[co];
                    long base = t * stride_ - plan.pad_left;
                    for (long k = 0; k < kernel_; ++k) {
                        long pos = base + k;
                        if (pos < 0 || pos >= in.length) continue;
                        const double* in_row = in.row(b, pos);
                        const double* wk = w + k * in_channels_ * filters_;
                        for (long ci = 0; ci < in_channels_; ++ci) {
                            double a = in_row[ci];
                            const double* wrow = wk + ci * filters_;
                            for (long co = 0; co < filters_; ++co) out_row[co] += a * wrow[co];
                        }
                    }
                }
            }
        });
        out.assert_finite("conv");
        last_plan_ = plan;
        return out;
    }

    BatchTensor backward(const BatchTensor& in, const BatchTensor& out,
                         const BatchTensor& dout) override {
        const PadPlan plan = last_plan_;
        BatchTensor din(in.batch, in.length, in.channels);
        const double* w = weight_.value.data();

        long chunks = std::min<long>(kGradChunks, in.batch);
        // input gradient: disjoint per sample
        parallel_chunks(chunks, [&](long chunk) {
            auto [b0, b1] = chunk_range(in.batch, chunks, chunk);
            for (long b = b0; b < b1; ++b) {
                for (long t = 0; t < out.length; ++t) {
                    const double* dout_row = dout.row(b, t);
                    long base = t * stride_ - plan.pad_left;
                    for (long k = 0; k < kernel_; ++k) {
                        long pos = base + k;
                        if (pos < 0 || pos >= in.length) continue;
                        double* din_row = din.row(b, pos);
                        const double* wk = w + k * in_channels_ * filters_;
                        for (long ci = 0; ci < in_channels_; ++ci) {
                            const double* wrow = wk + ci * filters_;
                            double acc = 0.0;
                            for (long co = 0; co < filters_; ++co) acc += dout_row[co] * wrow[co];
                            din_row[ci] += acc;
                        }
                    }
                }
            }
        });

        // weight/bias gradients: per-chunk partials combined in chunk order
        size_t wsize = weight_.size();
        std::vector<std::vector<double>> w_partial(static_cast<size_t>(chunks));
        std::vector<std::vector<double>> b_partial(static_cast<size_t>(chunks));
        parallel_chunks(chunks, [&](long chunk) {
            auto [b0, b1] = chunk_range(in.batch, chunks, chunk);
            auto& wp = w_partial[size_t(chunk)];
            auto& bp = b_partial[size_t(chunk)];
            wp.assign(wsize, 0.0);
            bp.assign(size_t(filters_), 0.0);
            for (long b = b0; b < b1; ++b) {
                for (long t = 0; t < out.length; ++t) {
                    const double* dout_row = dout.row(b, t);
                    for (long co = 0; co < filters_; ++co) bp[size_t(co)] += dout_row[co];
                    long base = t * stride_ - plan.pad_left;
                    for (long k = 0; k < kernel_; ++k) {
                        long pos = base + k;
                        if (pos < 0 || pos >= in.length) continue;
                        const double* in_row = in.row(b, pos);
                        double* wk = wp.data() + k * in_channels_ * filters_;
                        for (long ci = 0; ci < in_channels_; ++ci) {
                            double a = in_row[ci];
                            double* wrow = wk + ci * filters_;
                            for (long co = 0; co < filters_; ++co) wrow[co] += a * dout_row[co];
                        }
                    }
                }
            }
        });
        for (long chunk = 0; chunk < chunks; ++chunk) {
            for (size_t i = 0; i < wsize; ++i) weight_.grad[i] += w_partial[size_t(chunk)][i];
            for (long co = 0; co < filters_; ++co) bias_.grad[size_t(co)] += b_partial[size_t(chunk)][size_t(co)];
        }
        return din;
    }

    void collect(std::vector<Tensor*>& all, std::vector<Tensor*>& trainable) override {
        all.push_back(&weight_);
        all.push_back(&bias_);
        trainable.push_back(&weight_);
        trainable.push_back(&bias_);
    }

private:
    long in_channels_, filters_, kernel_, stride_;
    Padding padding_;
    Tensor weight_, bias_;
    PadPlan last_plan_;
};

class BatchNorm : public Layer {
public:
    BatchNorm(const std::string& prefix, long channels)
        : channels_(channels),
          gamma_(prefix + "/gamma", {channels}),
          beta_(prefix + "/beta", {channels}),
          running_mean_(prefix + "/moving_mean", {channels}),
          running_var_(prefix + "/moving_var", {channels}) {
        std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0);
        std::fill(running_var_.value.begin(), running_var_.value.end(), 1.0);
    }

    bool update_running = true;

    BatchTensor forward(const BatchTensor& in, Mode mode) override {
        BatchTensor out(in.batch, in.length, in.channels);
        long n = in.batch * in.length;
        if (mode == Mode::train) {
            mean_.assign(size_t(channels_), 0.0);
            inv_std_.assign(size_t(channels_), 0.0);
            std::vector<double> var(size_t(channels_), 0.0);
            for (long b = 0; b < in.batch; ++b)
                for (long t = 0; t < in.length; ++t) {
                    const double* row = in.row(b, t);
                    for (long c = 0; c < channels_; ++c) mean_[size_t(c)] += row[c];
                }
            for (auto& m : mean_) m /= double(n);
            for (long b = 0; b < in.batch; ++b)
                for (long t = 0; t < in.length; ++t) {
                    const double* row = in.row(b, t);
                    for (long c = 0; c < channels_; ++c) {
                        double d = row[c] - mean_[size_t(c)];
                        var[size_t(c)] += d * d;
                    }
                }
            for (auto& v : var) v /= double(n); // biased, matching the normalization
            for (long c = 0; c < channels_; ++c) inv_std_[size_t(c)] = 1.0 / std::sqrt(var[size_t(c)] + kBnEps);
            if (update_running) {
                for (long c = 0; c < channels_; ++c) {
                    running_mean_.value[size_t(c)] =
                        kBnMomentum * running_mean_.value[size_t(c)] + (1 - kBnMomentum) * mean_[size_t(c)];
                    running_var_.value[size_t(c)] =
                        kBnMomentum * running_var_.value[size_t(c)] + (1 - kBnMomentum) * var[size_t(c)];
                }
            }
            apply(in, out, mean_.data(), inv_std_.data());
        } else {
            std::vector<double> inv(static_cast<size_t>(channels_));
            for (long c = 0; c < channels_; ++c)
                inv[size_t(c)] = 1.0 / std::sqrt(running_var_.value[size_t(c)] + kBnEps);
            apply(in, out, running_mean_.value.data(), inv.data());
        }
        return out;
    }

    BatchTensor backward(const BatchTensor& in, const BatchTensor&,
                         const BatchTensor& dout) override {
        // train-mode statistics from the last forward
        long n = in.batch * in.length;
        std::vector<double> sum_dy(size_t(channels_), 0.0);
        std::vector<double> sum_dy_xhat(size_t(channels_), 0.0);
        for (long b = 0; b < in.batch; ++b)
            for (long t = 0; t < in.length; ++t) {
                const double* x = in.row(b, t);
                const double* dy = dout.row(b, t);
                for (long c = 0; c < channels_; ++c) {
                    double xhat = (x[c] - mean_[size_t(c)]) * inv_std_[size_t(c)];
                    sum_dy[size_t(c)] += dy[c];
                    sum_dy_xhat[size_t(c)] += dy[c] * xhat;
                }
            }
        for (long c = 0; c < channels_; ++c) {
            gamma_.grad[size_t(c)] += sum_dy_xhat[size_t(c)];
            beta_.grad[size_t(c)] += sum_dy[size_t(c)];
        }
        BatchTensor din(in.batch, in.length, in.channels);
        long chunks = std::min<long>(kGradChunks, in.batch);
        parallel_chunks(chunks, [&](long chunk) {
            auto [b0, b1] = chunk_range(in.batch, chunks, chunk);
            for (long b = b0; b < b1; ++b)
                for (long t = 0; t < in.length; ++t) {
                    const double* x = in.row(b, t);
                    const double* dy = dout.row(b, t);
                    double* dx = din.row(b, t);
                    for (long c = 0; c < channels_; ++c) {
                        double xhat = (x[c] - mean_[size_t(c)]) * inv_std_[size_t(c)];
                        dx[c] = gamma_.value[size_t(c)] * inv_std_[size_t(c)] *
                                (dy[c] - sum_dy[size_t(c)] / double(n) -
                                 xhat * sum_dy_xhat[size_t(c)] / double(n));
                    }
                }
        });
        return din;
    }

    void collect(std::vector<Tensor*>& all, std::vector<Tensor*>& trainable) override {
        all.push_back(&gamma_);
        all.push_back(&beta_);
        all.push_back(&running_mean_);
        all.push_back(&running_var_);
        trainable.push_back(&gamma_);
        trainable.push_back(&beta_);
    }

private:
    void apply(const BatchTensor& in, BatchTensor& out, const double* mean, const double* inv_std) {
        long chunks = std::min<long>(kGradChunks, in.batch);
        parallel_chunks(chunks, [&](long chunk) {
            auto [b0, b1] = chunk_range(in.batch, chunks, chunk);
            for (long b = b0; b < b1; ++b)
                for (long t = 0; t < in.length; ++t) {
                    const double* x = in.row(b, t);
                    double* y = out.row(b, t);
                    for (long c = 0; c < channels_; ++c)
                        y[c] = gamma_.value[size_t(c)] * (x[c] - mean[c]) * inv_std[c] +
                               beta_.value[size_t(c)];
                }
        });
    }

    long channels_;
    Tensor gamma_, beta_, running_mean_, running_var_;
    std::vector<double> mean_, inv_std_; // train-mode cache
};

class ReLU : public Layer {
public:
    BatchTensor forward(const BatchTensor& in, Mode) override {
        BatchTensor out = in;
        for (auto& v : out.data) v = v > 0.0 ? v : 0.0;
        return out;
    }

    BatchTensor backward(const BatchTensor& in, const BatchTensor&,
                         const BatchTensor& dout) override {
        BatchTensor din = dout;
        for (size_t i = 0; i < din.data.size(); ++i)
            if (in.data[i] <= 0.0) din.data[i] = 0.0;
        return din;
    }
};

class MaxPool : public Layer {
public:
    MaxPool(long size, long stride, Padding padding) : size_(size), stride_(stride), padding_(padding) {}

    BatchTensor forward(const BatchTensor& in, Mode) override {
        auto plan = pad_plan(in.length, size_, stride_, padding_);
        BatchTensor out(in.batch, plan.out_len, in.channels);
        argmax_.assign(size_t(out.size()), 0);
        for (long b = 0; b < in.batch; ++b)
            for (long t = 0; t < plan.out_len; ++t) {
                double* out_row = out.row(b, t);
                int* arg_row = argmax_.data() + (b * plan.out_len + t) * in.channels;
                long base = t * stride_ - plan.pad_left;
                for (long c = 0; c < in.channels; ++c) {
                    double best = -std::numeric_limits<double>::infinity();
                    long best_pos = -1;
                    for (long k = 0; k < size_; ++k) {
                        long pos = base + k;
                        if (pos < 0 || pos >= in.length) continue;
                        double v = in.at(b, pos, c);
                        if (v > best) { // ties keep the earliest index
                            best = v;
                            best_pos = pos;
                        }
                    }
                    out_row[c] = best;
                    arg_row[c] = int(best_pos);
                }
            }
        return out;
    }

    BatchTensor backward(const BatchTensor& in, const BatchTensor& out,
                         const BatchTensor& dout) override {
        BatchTensor din(in.batch, in.length, in.channels);
        for (long b = 0; b < out.batch; ++b)
            for (long t = 0; t < out.length; ++t) {
                const double* dout_row = dout.row(b, t);
                const int* arg_row = argmax_.data() + (b * out.length + t) * in.channels;
                for (long c = 0; c < in.channels; ++c)
                    din.at(b, arg_row[c], c) += dout_row[c];
            }
        return din;
    }

private:
    long size_, stride_;
    Padding padding_;
    std::vector<int> argmax_;
};

class AvgPool : public Layer {
public:
    AvgPool(long size, long stride, Padding padding) : size_(size), stride_(stride), padding_(padding) {}

    BatchTensor forward(const BatchTensor& in, Mode) override {
        auto plan = pad_plan(in.length, size_, stride_, padding_);
        last_plan_ = plan;
        BatchTensor out(in.batch, plan.out_len, in.channels);
        counts_.assign(size_t(plan.out_len), 0);
        for (long t = 0; t < plan.out_len; ++t) {
            long base = t * stride_ - plan.pad_left;
            long lo = std::max<long>(0, base);
            long hi = std::min(in.length, base + size_);
            counts_[size_t(t)] = int(hi - lo); // padded cells are excluded from the average
        }
        for (long b = 0; b < in.batch; ++b)
            for (long t = 0; t < plan.out_len; ++t) {
                double* out_row = out.row(b, t);
                long base = t * stride_ - plan.pad_left;
                for (long k = 0; k < size_; ++k) {
                    long pos = base + k;
                    if (pos < 0 || pos >= in.length) continue;
                    const double* in_row = in.row(b, pos);
                    for (long c = 0; c < in.channels; ++c) out_row[c] += in_row[c];
                }
                for (long c = 0; c < in.channels; ++c) out_row[c] /= double(counts_[size_t(t)]);
            }
        return out;
    }

    BatchTensor backward(const BatchTensor& in, const BatchTensor& out,
                         const BatchTensor& dout) override {
        BatchTensor din(in.batch, in.length, in.channels);
        for (long b = 0; b < out.batch; ++b)
            for (long t = 0; t < out.length; ++t) {
                const double* dout_row = dout.row(b, t);
                double inv = 1.0 / double(counts_[size_t(t)]);
                long base = t * stride_ - last_plan_.pad_left;
                for (long k = 0; k < size_; ++k) {
                    long pos = base + k;
                    if (pos < 0 || pos >= in.length) continue;
                    double* din_row = din.row(b, pos);
                    for (long c = 0; c < in.channels; ++c) din_row[c] += dout_row[c] * inv;
                }
            }
        return din;
    }

private:
    long size_, stride_;
    Padding padding_;
    PadPlan last_plan_;
    std::vector<int> counts_;
};

// Inverted dropout: active in train mode only, kept units scaled by 1/(1-p).
class Dropout : public Layer {
public:
    Dropout(double rate, Rng* rng) : rate_(rate), rng_(rng) {}

    BatchTensor forward(const BatchTensor& in, Mode mode) override {
        if (mode == Mode::eval || rate_ == 0.0) {
            mask_.clear();
            return in;
        }
        BatchTensor out = in;
        mask_.resize(size_t(in.size()));
        double keep = 1.0 - rate_;
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (size_t i = 0; i < mask_.size(); ++i) {
            mask_[i] = u(*rng_) < keep ? 1.0 / keep : 0.0;
            out.data[i] *= mask_[i];
        }
        return out;
    }

    BatchTensor backward(const BatchTensor&, const BatchTensor&, const BatchTensor& dout) override {
        if (mask_.empty()) return dout;
        BatchTensor din = dout;
        for (size_t i = 0; i < din.data.size(); ++i) din.data[i] *= mask_[i];
        return din;
    }

private:
    double rate_;
    Rng* rng_;
    std::vector<double> mask_;
};

// Global average pooling: collapses the temporal axis to one position.
class GlobalAvgPool : public Layer {
public:
    BatchTensor forward(const BatchTensor& in, Mode) override {
        BatchTensor out(in.batch, 1, in.channels);
        for (long b = 0; b < in.batch; ++b) {
            double* out_row = out.row(b, 0);
            for (long t = 0; t < in.length; ++t) {
                const double* row = in.row(b, t);
                for (long c = 0; c < in.channels; ++c) out_row[c] += row[c];
            }
            for (long c = 0; c < in.channels; ++c) out_row[c] /= double(in.length);
        }
        return out;
    }

    BatchTensor backward(const BatchTensor& in, const BatchTensor&,
                         const BatchTensor& dout) override {
        BatchTensor din(in.batch, in.length, in.channels);
        for (long b = 0; b < in.batch; ++b) {
            const double* dout_row = dout.row(b, 0);
            for (long t = 0; t < in.length; ++t) {
                double* row = din.row(b, t);
                for (long c = 0; c < in.channels; ++c) row[c] = dout_row[c] / double(in.length);
            }
        }
        return din;
    }
};

class Dense : public Layer {
public:
    Dense(const std::string& prefix, long in_features, long out_features)
        : in_features_(in_features), out_features_(out_features),
          weight_(prefix + "/kernel", {in_features, out_features}),
          bias_(prefix + "/bias", {out_features}) {}

    void init(Rng& rng) {
        double limit = std::sqrt(6.0 / double(in_features_));
        for (auto& w : weight_.value) w = uniform_real(rng, -limit, limit);
        std::fill(bias_.value.begin(), bias_.value.end(), 0.0);
    }

    BatchTensor forward(const BatchTensor& in, Mode) override {
        in.require_shape(in.batch, 1, in_features_, "dense");
        BatchTensor out(in.batch, 1, out_features_);
        for (long b = 0; b < in.batch; ++b) {
            const double* x = in.row(b, 0);
            double* y = out.row(b, 0);
            for (long o = 0; o < out_features_; ++o) y[o] = bias_.value[size_t(o)];
            for (long i = 0; i < in_features_; ++i) {
                double a = x[i];
                const double* wrow = weight_.value.data() + i * out_features_;
                for (long o = 0; o < out_features_; ++o) y[o] += a * wrow[o];
            }
        }
        return out;
    }

    BatchTensor backward(const BatchTensor& in, const BatchTensor&,
                         const BatchTensor& dout) override {
        BatchTensor din(in.batch, 1, in_features_);
        for (long b = 0; b < in.batch; ++b) {
            const double* x = in.row(b, 0);
            const double* dy = dout.row(b, 0);
            double* dx = din.row(b, 0);
            for (long o = 0; o < out_features_; ++o) bias_.grad[size_t(o)] += dy[o];
            for (long i = 0; i < in_features_; ++i) {
                double* wgrad = weight_.grad.data() + i * out_features_;
                const double* wrow = weight_.value.data() + i * out_features_;
                double acc = 0.0;
                for (long o = 0; o < out_features_; ++o) {
                    wgrad[o] += x[i] * dy[o];
                    acc += wrow[o] * dy[o];
                }
                dx[i] = acc;
            }
        }
        return din;
    }

    void collect(std::vector<Tensor*>& all, std::vector<Tensor*>& trainable) override {
        all.push_back(&weight_);
        all.push_back(&bias_);
        trainable.push_back(&weight_);
        trainable.push_back(&bias_);
    }

private:
    long in_features_, out_features_;
    Tensor weight_, bias_;
};

// Row-wise softmax with the max subtracted for stability.
inline std::vector<double> softmax_rows(const BatchTensor& logits) {
    std::vector<double> probs(size_t(logits.size()));
    for (long b = 0; b < logits.batch; ++b) {
        const double* z = logits.row(b, 0);
        double* p = probs.data() + b * logits.channels;
        double m = z[0];
        for (long c = 1; c < logits.channels; ++c) m = std::max(m, z[c]);
        double sum = 0.0;
        for (long c = 0; c < logits.channels; ++c) {
            p[c] = std::exp(z[c] - m);
            sum += p[c];
        }
        for (long c = 0; c < logits.channels; ++c) p[c] /= sum;
    }
    return probs;
}

struct LossResult {
    double loss = 0.0;
    BatchTensor dlogits;
};

// Mean softmax cross-entropy and its gradient w.r.t. the logits.
inline LossResult softmax_cross_entropy(const BatchTensor& logits, std::span<const uint16_t> labels) {
    if (long(labels.size()) != logits.batch)
        throw ShapeMismatch("label count does not match batch size");
    LossResult res;
    res.dlogits = BatchTensor(logits.batch, 1, logits.channels);
    auto probs = softmax_rows(logits);
    double total = 0.0;
    for (long b = 0; b < logits.batch; ++b) {
        const double* p = probs.data() + b * logits.channels;
        long y = labels[size_t(b)];
        if (y >= logits.channels) throw LabelOutOfRange("label " + std::to_string(y) + " out of range");
        total += -std::log(std::max(p[y], 1e-300));
        double* d = res.dlogits.row(b, 0);
        for (long c = 0; c < logits.channels; ++c)
            d[c] = (p[c] - (c == y ? 1.0 : 0.0)) / double(logits.batch);
    }
    res.loss = total / double(logits.batch);
    if (!std::isfinite(res.loss)) throw DivergedLoss("training loss is not finite");
    return res;
}

} // namespace flownas
