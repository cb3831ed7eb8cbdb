#pragma once

// Test-only reference forward pass. Deliberately naive: nested loops over
// explicit padded arrays, one sample and one layer at a time, pulling weights
// out of the production network by tensor name. Used as the independent
// oracle for the engine's forward pass.

#include <cassert>
#include <cmath>
#include <limits>
#include <vector>

#include "flownas/network.hpp"

namespace testsupport {

using Grid = std::vector<std::vector<double>>; // [position][channel]

struct NaiveBatch {
    std::vector<Grid> samples;
};

inline long naive_out_len(long in_len, long window, long stride, flownas::Padding padding) {
    if (padding == flownas::Padding::same) return (in_len + stride - 1) / stride;
    return (in_len - window) / stride + 1;
}

inline long naive_pad_left(long in_len, long window, long stride, flownas::Padding padding) {
    if (padding == flownas::Padding::valid) return 0;
    long out = naive_out_len(in_len, window, stride, padding);
    long total = std::max<long>(0, (out - 1) * stride + window - in_len);
    return total / 2;
}

inline const flownas::Tensor& named(flownas::Network& net, const std::string& name) {
    const flownas::Tensor* t = net.find_tensor(name);
    assert(t != nullptr);
    return *t;
}

inline Grid naive_conv(const Grid& in, const flownas::Tensor& kernel, const flownas::Tensor& bias,
                       long stride, flownas::Padding padding) {
    long in_len = long(in.size());
    long k = kernel.dims[0], ci_n = kernel.dims[1], co_n = kernel.dims[2];
    long pad = naive_pad_left(in_len, k, stride, padding);
    long out_len = naive_out_len(in_len, k, stride, padding);
    Grid out(size_t(out_len), std::vector<double>(size_t(co_n), 0.0));
    for (long t = 0; t < out_len; ++t)
        for (long co = 0; co < co_n; ++co) {
            double acc = bias.value[size_t(co)];
            for (long kk = 0; kk < k; ++kk)
                for (long ci = 0; ci < ci_n; ++ci) {
                    long pos = t * stride + kk - pad;
                    double x = (pos >= 0 && pos < in_len) ? in[size_t(pos)][size_t(ci)] : 0.0;
                    acc += x * kernel.value[size_t((kk * ci_n + ci) * co_n + co)];
                }
            out[size_t(t)][size_t(co)] = acc;
        }
    return out;
}

// Train-mode batch statistics computed across the whole naive batch.
inline void naive_bn_stats(const std::vector<Grid>& batch, std::vector<double>& mean,
                           std::vector<double>& var) {
    long channels = long(batch[0][0].size());
    mean.assign(size_t(channels), 0.0);
    var.assign(size_t(channels), 0.0);
    long n = 0;
    for (const auto& g : batch)
        for (const auto& row : g) {
            for (long c = 0; c < channels; ++c) mean[size_t(c)] += row[size_t(c)];
            ++n;
        }
    for (auto& m : mean) m /= double(n);
    for (const auto& g : batch)
        for (const auto& row : g)
            for (long c = 0; c < channels; ++c) {
                double d = row[size_t(c)] - mean[size_t(c)];
                var[size_t(c)] += d * d;
            }
    for (auto& v : var) v /= double(n);
}

inline Grid naive_bn_apply(const Grid& in, const std::vector<double>& mean,
                           const std::vector<double>& var, const flownas::Tensor& gamma,
                           const flownas::Tensor& beta) {
    Grid out = in;
    for (auto& row : out)
        for (size_t c = 0; c < row.size(); ++c)
            row[c] = gamma.value[c] * (row[c] - mean[c]) / std::sqrt(var[c] + flownas::kBnEps) +
                     beta.value[c];
    return out;
}

inline Grid naive_relu(const Grid& in) {
    Grid out = in;
    for (auto& row : out)
        for (auto& v : row) v = std::max(0.0, v);
    return out;
}

inline Grid naive_pool(const Grid& in, const flownas::PoolSpec& pool) {
    long in_len = long(in.size());
    long channels = long(in[0].size());
    long pad = naive_pad_left(in_len, pool.size, pool.stride, pool.padding);
    long out_len = naive_out_len(in_len, pool.size, pool.stride, pool.padding);
    Grid out(size_t(out_len), std::vector<double>(size_t(channels), 0.0));
    for (long t = 0; t < out_len; ++t)
        for (long c = 0; c < channels; ++c) {
            double best = -std::numeric_limits<double>::infinity();
            double sum = 0.0;
            long count = 0;
            for (long k = 0; k < pool.size; ++k) {
                long pos = t * pool.stride + k - pad;
                if (pos < 0 || pos >= in_len) continue;
                double v = in[size_t(pos)][size_t(c)];
                best = std::max(best, v);
                sum += v;
                ++count;
            }
            out[size_t(t)][size_t(c)] = pool.kind == flownas::PoolKind::max ? best : sum / double(count);
        }
    return out;
}

inline std::vector<double> naive_gap(const Grid& in) {
    std::vector<double> out(in[0].size(), 0.0);
    for (const auto& row : in)
        for (size_t c = 0; c < row.size(); ++c) out[c] += row[c];
    for (auto& v : out) v /= double(in.size());
    return out;
}

inline std::vector<double> naive_dense(const std::vector<double>& in, const flownas::Tensor& kernel,
                                       const flownas::Tensor& bias) {
    long in_n = kernel.dims[0], out_n = kernel.dims[1];
    std::vector<double> out(static_cast<size_t>(out_n));
    for (long o = 0; o < out_n; ++o) {
        double acc = bias.value[size_t(o)];
        for (long i = 0; i < in_n; ++i) acc += in[size_t(i)] * kernel.value[size_t(i * out_n + o)];
        out[size_t(o)] = acc;
    }
    return out;
}

// Full-network reference logits. Dropout must be disabled in the checked
// network (rate 0); train mode uses batch statistics, eval mode the stored
// running statistics.
inline std::vector<std::vector<double>> naive_forward(const flownas::Architecture& arch,
                                                      flownas::Network& net,
                                                      const std::vector<std::vector<double>>& inputs,
                                                      flownas::Mode mode) {
    std::vector<Grid> acts;
    for (const auto& sample : inputs) {
        Grid g(sample.size(), std::vector<double>(1));
        for (size_t t = 0; t < sample.size(); ++t) g[t][0] = sample[t];
        acts.push_back(std::move(g));
    }
    for (size_t bi = 0; bi < arch.blocks.size(); ++bi) {
        const auto& block = arch.blocks[bi];
        std::string prefix = "block" + std::to_string(bi);
        const auto& kernel = named(net, prefix + "/conv/kernel");
        const auto& bias = named(net, prefix + "/conv/bias");
        for (auto& g : acts) g = naive_conv(g, kernel, bias, block.stride, block.padding);

        const auto& gamma = named(net, prefix + "/bn/gamma");
        const auto& beta = named(net, prefix + "/bn/beta");
        std::vector<double> mean, var;
        if (mode == flownas::Mode::train) {
            naive_bn_stats(acts, mean, var);
        } else {
            mean = named(net, prefix + "/bn/moving_mean").value;
            var = named(net, prefix + "/bn/moving_var").value;
        }
        for (auto& g : acts) g = naive_bn_apply(g, mean, var, gamma, beta);
        for (auto& g : acts) g = naive_relu(g);
        if (block.pool.enabled())
            for (auto& g : acts) g = naive_pool(g, block.pool);
    }
    const auto& dk = named(net, "head/dense/kernel");
    const auto& db = named(net, "head/dense/bias");
    std::vector<std::vector<double>> logits;
    for (auto& g : acts) logits.push_back(naive_dense(naive_gap(g), dk, db));
    return logits;
}

} // namespace testsupport
