#pragma once

#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "flownas/cost.hpp"

namespace flownas {

struct EstimateRow {
    std::string layer;
    TensorShape in;
    TensorShape out;
    long long params = 0;
    long long flops = 0;
};

struct EstimateReport {
    std::vector<EstimateRow> rows;
    HwCost total;
    HwThresholds thresholds;
    std::vector<ConstraintTag> violations;

    bool passes(ConstraintTag tag) const {
        for (auto v : violations)
            if (v == tag) return false;
        return true;
    }
    bool admissible() const { return violations.empty(); }
};

// Per-layer cost table. Conv rows fold in their batch norm and ReLU terms;
// the dense row carries the softmax term. Row sums equal the cost model by
// construction of the same formulas.
inline EstimateReport build_estimate(const Architecture& arch, const HwThresholds& th,
                                     BnParamMode bn_mode = BnParamMode::full) {
    EstimateReport report;
    report.thresholds = th;
    auto trace = infer_shapes(arch);
    for (const auto& layer : trace) {
        EstimateRow row;
        row.in = layer.in;
        row.out = layer.out;
        switch (layer.op) {
        case LayerOp::conv: {
            const auto& b = arch.blocks[size_t(layer.block)];
            row.layer = "conv" + std::to_string(layer.block + 1) + " k" + std::to_string(b.kernel) +
                        " s" + std::to_string(b.stride) + " " + to_string(b.padding);
            row.params = (long long)b.kernel * layer.in.channels * b.filters + b.filters +
                         (long long)bn_params_per_channel(bn_mode) * b.filters;
            row.flops = 2LL * layer.out.length * layer.out.channels * b.kernel * layer.in.channels +
                        3LL * layer.out.elements();
            break;
        }
        case LayerOp::max_pool:
        case LayerOp::avg_pool: {
            const auto& b = arch.blocks[size_t(layer.block)];
            row.layer = std::string(layer.op == LayerOp::max_pool ? "max_pool" : "avg_pool") + " p" +
                        std::to_string(b.pool.size) + " s" + std::to_string(b.pool.stride);
            row.flops = (long long)b.pool.size * layer.out.elements();
            break;
        }
        case LayerOp::gap:
            row.layer = "gap";
            row.flops = layer.in.elements();
            break;
        case LayerOp::dense:
            row.layer = "dense+softmax";
            row.params = layer.in.channels * (long long)arch.n_classes + arch.n_classes;
            row.flops = 2LL * layer.in.channels * arch.n_classes + 5LL * arch.n_classes;
            break;
        }
        report.rows.push_back(row);
    }
    report.total = estimate_cost(arch, bn_mode);
    report.violations = check_constraints(arch, th, bn_mode);
    return report;
}

inline std::string shape_str(const TensorShape& s) {
    return std::to_string(s.length) + "x" + std::to_string(s.channels);
}

inline std::string estimate_text(const EstimateReport& report) {
    std::ostringstream os;
    os << std::left << std::setw(22) << "layer" << std::setw(12) << "input" << std::setw(12)
       << "output" << std::right << std::setw(10) << "params" << std::setw(14) << "flops" << "\n";
    for (const auto& row : report.rows) {
        os << std::left << std::setw(22) << row.layer << std::setw(12) << shape_str(row.in)
           << std::setw(12) << shape_str(row.out) << std::right << std::setw(10) << row.params
           << std::setw(14) << row.flops << "\n";
    }
    os << "\n";
    os << "total params      " << report.total.params << "\n";
    os << "total flops       " << report.total.flops << "\n";
    os << "max tensor        " << report.total.max_tensor << "\n\n";
    os << "constraint params " << report.total.params << " < " << report.thresholds.max_params
       << " : " << (report.passes(ConstraintTag::params) ? "PASS" : "FAIL") << "\n";
    os << "constraint tensor " << report.total.max_tensor << " < "
       << report.thresholds.max_tensor_elems << " : "
       << (report.passes(ConstraintTag::tensor) ? "PASS" : "FAIL") << "\n";
    os << "constraint flops  " << report.total.flops << " < " << report.thresholds.max_flops
       << " : " << (report.passes(ConstraintTag::flops) ? "PASS" : "FAIL") << "\n";
    if (!report.passes(ConstraintTag::shape)) os << "constraint shape : FAIL (degenerate)\n";
    return os.str();
}

inline std::string estimate_csv(const EstimateReport& report) {
    std::ostringstream os;
    os << "layer,in_len,in_ch,out_len,out_ch,params,flops\n";
    for (const auto& row : report.rows)
        os << row.layer << "," << row.in.length << "," << row.in.channels << "," << row.out.length
           << "," << row.out.channels << "," << row.params << "," << row.flops << "\n";
    os << "total,,,,," << report.total.params << "," << report.total.flops << "\n";
    os << "max_tensor,,,,,," << report.total.max_tensor << "\n";
    return os.str();
}

} // namespace flownas
