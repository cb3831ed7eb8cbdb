#pragma once

#include <span>
#include <vector>

#include "flownas/errors.hpp"

namespace flownas {

struct ClassMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    long support = 0;    // ground-truth count
    bool absent = false; // class never appears in the ground truth
};

struct EvalReport {
    double accuracy = 0.0;
    double macro_f1 = 0.0; // unweighted mean over all classes
    std::vector<ClassMetrics> per_class;
    std::vector<std::vector<long>> confusion; // [truth][predicted]
};

inline EvalReport compute_metrics(std::span<const int> predictions,
                                  std::span<const uint16_t> labels, int n_classes) {
    if (predictions.size() != labels.size())
        throw ShapeMismatch("prediction/label count mismatch");
    EvalReport report;
    report.confusion.assign(size_t(n_classes), std::vector<long>(size_t(n_classes), 0));
    long correct = 0;
    for (size_t i = 0; i < labels.size(); ++i) {
        int truth = labels[i];
        int pred = predictions[i];
        if (truth >= n_classes || pred >= n_classes)
            throw LabelOutOfRange("class index out of range in metrics");
        report.confusion[size_t(truth)][size_t(pred)]++;
        if (truth == pred) ++correct;
    }
    report.accuracy = labels.empty() ? 0.0 : double(correct) / double(labels.size());

    report.per_class.resize(size_t(n_classes));
    double f1_sum = 0.0;
    for (int c = 0; c < n_classes; ++c) {
        long tp = report.confusion[size_t(c)][size_t(c)];
        long fn = 0, fp = 0;
        for (int o = 0; o < n_classes; ++o) {
            if (o == c) continue;
            fn += report.confusion[size_t(c)][size_t(o)];
            fp += report.confusion[size_t(o)][size_t(c)];
        }
        auto& m = report.per_class[size_t(c)];
        m.support = tp + fn;
        m.absent = m.support == 0;
        m.precision = tp + fp > 0 ? double(tp) / double(tp + fp) : 0.0;
        m.recall = tp + fn > 0 ? double(tp) / double(tp + fn) : 0.0;
        m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
        if (m.absent) m.f1 = 0.0;
        f1_sum += m.f1;
    }
    report.macro_f1 = n_classes > 0 ? f1_sum / double(n_classes) : 0.0;
    return report;
}

} // namespace flownas
