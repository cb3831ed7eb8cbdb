#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "flownas/arch.hpp"
#include "flownas/errors.hpp"

namespace flownas {

struct TensorShape {
    long long length = 1;
    long long channels = 1;

    long long elements() const { return length * channels; }
    bool operator==(const TensorShape&) const = default;
};

inline long long conv_out_len(long long in_len, int kernel, int stride, Padding padding,
                              const std::string& where) {
    long long out = padding == Padding::same
                        ? (in_len + stride - 1) / stride
                        : (in_len - kernel) / stride + 1;
    if (padding == Padding::valid && in_len < kernel) out = 0;
    if (out < 1)
        throw DegenerateShape(where + ": output length " + std::to_string(out) +
                              " collapses below 1 (input length " + std::to_string(in_len) + ")");
    return out;
}

enum class LayerOp : uint8_t { conv, max_pool, avg_pool, gap, dense };

struct LayerShape {
    LayerOp op;
    int block = -1; // -1 for head layers
    TensorShape in;
    TensorShape out;
};

inline const char* to_string(LayerOp op) {
    switch (op) {
    case LayerOp::conv: return "conv";
    case LayerOp::max_pool: return "max_pool";
    case LayerOp::avg_pool: return "avg_pool";
    case LayerOp::gap: return "gap";
    default: return "dense";
    }
}

// Structural shape trace: one row per conv/pool/GAP/dense layer. Batch norm,
// ReLU and dropout preserve shape and are accounted only in the cost model.
inline std::vector<LayerShape> infer_shapes(const Architecture& arch) {
    std::vector<LayerShape> trace;
    TensorShape cur{arch.input_len, arch.input_channels};
    if (cur.length < 1 || cur.channels < 1) throw DegenerateShape("input shape below 1");
    int index = 0;
    for (const auto& b : arch.blocks) {
        ++index;
        std::string where = "block " + std::to_string(index) + " conv";
        TensorShape out{conv_out_len(cur.length, b.kernel, b.stride, b.padding, where), b.filters};
        trace.push_back({LayerOp::conv, index - 1, cur, out});
        cur = out;
        if (b.pool.enabled()) {
            where = "block " + std::to_string(index) + " pool";
            TensorShape pooled{conv_out_len(cur.length, b.pool.size, b.pool.stride, b.pool.padding, where),
                               cur.channels};
            trace.push_back({b.pool.kind == PoolKind::max ? LayerOp::max_pool : LayerOp::avg_pool,
                             index - 1, cur, pooled});
            cur = pooled;
        }
    }
    trace.push_back({LayerOp::gap, -1, cur, TensorShape{1, cur.channels}});
    cur = {1, cur.channels};
    trace.push_back({LayerOp::dense, -1, cur, TensorShape{1, arch.n_classes}});
    return trace;
}

// Batch-norm parameter accounting: gamma/beta always train; the running
// statistics are stored with the model and counted by default.
enum class BnParamMode : uint8_t { full, trainable_only, off };

inline int bn_params_per_channel(BnParamMode mode) {
    switch (mode) {
    case BnParamMode::full: return 4;
    case BnParamMode::trainable_only: return 2;
    default: return 0;
    }
}

inline long long count_params(const Architecture& arch, BnParamMode bn_mode = BnParamMode::full) {
    auto trace = infer_shapes(arch); // validates shapes
    long long params = 0;
    for (const auto& layer : trace) {
        if (layer.op == LayerOp::conv) {
            const auto& b = arch.blocks[size_t(layer.block)];
            params += (long long)b.kernel * layer.in.channels * b.filters + b.filters;
            params += (long long)bn_params_per_channel(bn_mode) * b.filters;
        } else if (layer.op == LayerOp::dense) {
            params += layer.in.channels * (long long)arch.n_classes + arch.n_classes;
        }
    }
    return params;
}

// One inference pass, 2 ops per multiply-accumulate. Minor layers: batch
// norm 2/element, ReLU 1/element, pooling pool_size/output element, GAP one
// add per input element, softmax 5/class.
inline long long count_flops(const Architecture& arch) {
    auto trace = infer_shapes(arch);
    long long flops = 0;
    for (const auto& layer : trace) {
        switch (layer.op) {
        case LayerOp::conv: {
            const auto& b = arch.blocks[size_t(layer.block)];
            flops += 2LL * layer.out.length * layer.out.channels * b.kernel * layer.in.channels;
            flops += 2LL * layer.out.elements(); // batch norm
            flops += layer.out.elements();       // ReLU
            break;
        }
        case LayerOp::max_pool:
        case LayerOp::avg_pool: {
            const auto& b = arch.blocks[size_t(layer.block)];
            flops += (long long)b.pool.size * layer.out.elements();
            break;
        }
        case LayerOp::gap:
            flops += layer.in.elements();
            break;
        case LayerOp::dense:
            flops += 2LL * layer.in.channels * arch.n_classes;
            flops += 5LL * arch.n_classes; // softmax
            break;
        }
    }
    return flops;
}

// Peak single activation, in elements, over the input and every layer output.
inline long long max_tensor(const Architecture& arch) {
    auto trace = infer_shapes(arch);
    long long peak = (long long)arch.input_len * arch.input_channels;
    for (const auto& layer : trace) peak = std::max(peak, layer.out.elements());
    return peak;
}

struct HwCost {
    long long params = 0;
    long long flops = 0;
    long long max_tensor = 0;

    bool operator==(const HwCost&) const = default;
};

inline HwCost estimate_cost(const Architecture& arch, BnParamMode bn_mode = BnParamMode::full) {
    return HwCost{count_params(arch, bn_mode), count_flops(arch), max_tensor(arch)};
}

struct HwThresholds {
    long long max_params = 120'000;
    long long max_tensor_elems = 22'000;
    long long max_flops = 11'000'000;
};

enum class ConstraintTag : uint8_t { params, tensor, flops, shape };

inline const char* to_string(ConstraintTag tag) {
    switch (tag) {
    case ConstraintTag::params: return "params";
    case ConstraintTag::tensor: return "tensor";
    case ConstraintTag::flops: return "flops";
    default: return "shape";
    }
}

// Strict-inequality admissibility gate. Returns every violated constraint;
// an empty list means admissible. A degenerate shape is inadmissible on its
// own tag rather than an error.
inline std::vector<ConstraintTag> check_constraints(const Architecture& arch,
                                                    const HwThresholds& th,
                                                    BnParamMode bn_mode = BnParamMode::full) {
    HwCost cost;
    try {
        cost = estimate_cost(arch, bn_mode);
    } catch (const DegenerateShape&) {
        return {ConstraintTag::shape};
    }
    std::vector<ConstraintTag> violations;
    if (!(cost.params < th.max_params)) violations.push_back(ConstraintTag::params);
    if (!(cost.max_tensor < th.max_tensor_elems)) violations.push_back(ConstraintTag::tensor);
    if (!(cost.flops < th.max_flops)) violations.push_back(ConstraintTag::flops);
    return violations;
}

inline bool admissible(const Architecture& arch, const HwThresholds& th,
                       BnParamMode bn_mode = BnParamMode::full) {
    return check_constraints(arch, th, bn_mode).empty();
}

} // namespace flownas
