#pragma once

#include <algorithm>
#include <cstdint>

#include "flownas/dataset.hpp"
#include "flownas/rng.hpp"

namespace flownas {

// Synthetic class-separable session vectors: every class owns a random byte
// template and samples are the template plus per-byte noise. Lets the whole
// pipeline run and learn without an external capture corpus.
struct ToyConfig {
    int n_classes = 4;
    int n_samples = 2000;
    int length = 784;
    int noise = 36; // max absolute per-byte perturbation
    uint64_t seed = 1;
};

inline Dataset make_toy_dataset(const ToyConfig& cfg) {
    Dataset ds;
    ds.n_classes = uint16_t(cfg.n_classes);
    ds.input_len = uint32_t(cfg.length);

    std::vector<std::vector<uint8_t>> templates(size_t(cfg.n_classes));
    Rng template_rng(derive_seed(cfg.seed, 0x746f79));
    for (auto& t : templates) {
        t.resize(size_t(cfg.length));
        for (auto& b : t) b = uint8_t(uniform_int(template_rng, 0, 255));
    }

    Rng rng(derive_seed(cfg.seed, 0x6e6f69));
    for (int i = 0; i < cfg.n_samples; ++i) {
        int cls = i % cfg.n_classes;
        SessionVector sv;
        sv.label = uint16_t(cls);
        sv.bytes.resize(size_t(cfg.length));
        for (int j = 0; j < cfg.length; ++j) {
            int v = templates[size_t(cls)][size_t(j)] + uniform_int(rng, -cfg.noise, cfg.noise);
            sv.bytes[size_t(j)] = uint8_t(std::clamp(v, 0, 255));
        }
        ds.samples.push_back(std::move(sv));
    }
    return ds;
}

} // namespace flownas
