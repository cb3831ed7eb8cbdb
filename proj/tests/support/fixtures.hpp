#pragma once

// Shared fixtures: the reference 784-byte/11-class architecture used as the
// golden input of the cost-model tests, plus helpers for random valid
// architectures.

#include "flownas/arch.hpp"
#include "flownas/search_space.hpp"

namespace testsupport {

inline flownas::Architecture reference_architecture(int input_len = 784, int n_classes = 11) {
    using namespace flownas;
    Architecture arch;
    arch.input_len = input_len;
    arch.n_classes = n_classes;

    BlockSpec b1;
    b1.filters = 129;
    b1.kernel = 7;
    b1.stride = 5;
    b1.padding = Padding::valid;
    arch.blocks.push_back(b1);

    BlockSpec b2;
    b2.filters = 110;
    b2.kernel = 4;
    b2.stride = 2;
    b2.padding = Padding::valid;
    b2.pool = PoolSpec{PoolKind::avg, 3, 2, Padding::same};
    arch.blocks.push_back(b2);

    BlockSpec b3;
    b3.filters = 38;
    b3.kernel = 7;
    b3.stride = 2;
    b3.padding = Padding::valid;
    b3.pool = PoolSpec{PoolKind::max, 2, 2, Padding::same};
    arch.blocks.push_back(b3);

    return arch;
}

// Draws random architectures until one has valid shapes at the given input
// length. Bounded by the caller's patience; the spaces used in tests are
// easy to satisfy.
inline flownas::Architecture random_valid_arch(flownas::Rng& rng, int input_len, int n_classes,
                                               const flownas::SearchSpaceConfig& cfg) {
    using namespace flownas;
    for (;;) {
        Architecture arch;
        arch.input_len = input_len;
        arch.n_classes = n_classes;
        int depth = uniform_int(rng, 1, cfg.max_depth);
        for (int i = 0; i < depth; ++i) arch.blocks.push_back(random_block(cfg, rng));
        try {
            infer_shapes(arch);
            return arch;
        } catch (const DegenerateShape&) {
        }
    }
}

} // namespace testsupport
