#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "flownas/arch.hpp"
#include "flownas/cost.hpp"
#include "flownas/errors.hpp"
#include "flownas/rng.hpp"

namespace flownas {

struct SearchSpaceConfig {
    int filters_min = 16, filters_max = 140;
    int kernel_min = 3, kernel_max = 7;
    int stride_min = 1, stride_max = 6;
    double dropout_min = 0.1, dropout_max = 0.5;
    std::vector<int> pool_sizes{2, 3};
    int max_depth = 5;
    int mutations_per_child = 2;

    ArchLimits limits() const {
        ArchLimits lim;
        lim.filters_min = filters_min;
        lim.filters_max = filters_max;
        lim.kernel_min = kernel_min;
        lim.kernel_max = kernel_max;
        lim.stride_min = stride_min;
        lim.stride_max = stride_max;
        lim.pool_size_min = pool_sizes.front();
        lim.pool_size_max = pool_sizes.back();
        lim.dropout_min = dropout_min;
        lim.dropout_max = dropout_max;
        lim.max_depth = max_depth;
        return lim;
    }
};

inline Padding random_padding(Rng& rng) {
    return uniform_int(rng, 0, 1) == 0 ? Padding::valid : Padding::same;
}

// Dropout is optional per block: absent with probability 1/2, otherwise
// drawn uniformly from the configured range.
inline double random_dropout(const SearchSpaceConfig& cfg, Rng& rng) {
    if (uniform_int(rng, 0, 1) == 0) return 0.0;
    return uniform_real(rng, cfg.dropout_min, cfg.dropout_max);
}

inline PoolSpec random_pool(const SearchSpaceConfig& cfg, Rng& rng) {
    PoolSpec pool;
    int kind = uniform_int(rng, 0, 2);
    pool.kind = kind == 0 ? PoolKind::none : (kind == 1 ? PoolKind::max : PoolKind::avg);
    if (pool.enabled()) {
        pool.size = cfg.pool_sizes[size_t(uniform_int(rng, 0, int(cfg.pool_sizes.size()) - 1))];
        pool.stride = pool.size; // default stride tracks the window; mutation can detach it
        pool.padding = random_padding(rng);
    }
    return pool;
}

inline BlockSpec random_block(const SearchSpaceConfig& cfg, Rng& rng) {
    BlockSpec b;
    b.filters = uniform_int(rng, cfg.filters_min, cfg.filters_max);
    b.kernel = uniform_int(rng, cfg.kernel_min, cfg.kernel_max);
    b.stride = uniform_int(rng, cfg.stride_min, cfg.stride_max);
    b.padding = random_padding(rng);
    b.pool = random_pool(cfg, rng);
    b.dropout_rate = random_dropout(cfg, rng);
    return b;
}

enum class MutationOp : uint8_t { insert_block, remove_block, modify_param };

enum class BlockField : uint8_t {
    filters, kernel, stride, padding, pool_kind, pool_size, pool_stride, pool_pad, dropout
};

// Re-draws one field of one block from its range.
inline void modify_block_field(BlockSpec& b, BlockField field, const SearchSpaceConfig& cfg, Rng& rng) {
    switch (field) {
    case BlockField::filters: b.filters = uniform_int(rng, cfg.filters_min, cfg.filters_max); break;
    case BlockField::kernel: b.kernel = uniform_int(rng, cfg.kernel_min, cfg.kernel_max); break;
    case BlockField::stride: b.stride = uniform_int(rng, cfg.stride_min, cfg.stride_max); break;
    case BlockField::padding: b.padding = random_padding(rng); break;
    case BlockField::pool_kind: {
        PoolKind old = b.pool.kind;
        b.pool = random_pool(cfg, rng);
        if (!b.pool.enabled() && old == PoolKind::none) b.pool.kind = PoolKind::none;
        break;
    }
    case BlockField::pool_size:
        b.pool.size = cfg.pool_sizes[size_t(uniform_int(rng, 0, int(cfg.pool_sizes.size()) - 1))];
        break;
    case BlockField::pool_stride:
        b.pool.stride = cfg.pool_sizes[size_t(uniform_int(rng, 0, int(cfg.pool_sizes.size()) - 1))];
        break;
    case BlockField::pool_pad: b.pool.padding = random_padding(rng); break;
    case BlockField::dropout: b.dropout_rate = random_dropout(cfg, rng); break;
    }
}

inline void apply_modify_param(Architecture& arch, const SearchSpaceConfig& cfg, Rng& rng) {
    BlockSpec& b = arch.blocks[size_t(uniform_int(rng, 0, int(arch.blocks.size()) - 1))];
    std::vector<BlockField> fields = {BlockField::filters, BlockField::kernel, BlockField::stride,
                                      BlockField::padding, BlockField::pool_kind, BlockField::dropout};
    if (b.pool.enabled()) {
        fields.push_back(BlockField::pool_size);
        fields.push_back(BlockField::pool_stride);
        fields.push_back(BlockField::pool_pad);
    }
    modify_block_field(b, fields[size_t(uniform_int(rng, 0, int(fields.size()) - 1))], cfg, rng);
}

// One child = mutations_per_child draws from {insert, remove, modify},
// applied sequentially. Draws that would break the depth bounds (remove on a
// one-block genome, insert at max depth) are re-drawn; after 32 re-draws the
// mutation falls back to a parameter modification. Shape validity is not
// checked here; the constraint gate owns that.
inline Architecture mutate(const Architecture& parent, const SearchSpaceConfig& cfg, Rng& rng) {
    Architecture child = parent;
    for (int m = 0; m < cfg.mutations_per_child; ++m) {
        bool applied = false;
        for (int attempt = 0; attempt < 32 && !applied; ++attempt) {
            auto op = MutationOp(uniform_int(rng, 0, 2));
            switch (op) {
            case MutationOp::insert_block: {
                if (int(child.blocks.size()) >= cfg.max_depth) break; // re-draw
                size_t pos = size_t(uniform_int(rng, 0, int(child.blocks.size())));
                child.blocks.insert(child.blocks.begin() + ptrdiff_t(pos), random_block(cfg, rng));
                applied = true;
                break;
            }
            case MutationOp::remove_block: {
                if (child.blocks.size() <= 1) break; // re-draw
                size_t pos = size_t(uniform_int(rng, 0, int(child.blocks.size()) - 1));
                child.blocks.erase(child.blocks.begin() + ptrdiff_t(pos));
                applied = true;
                break;
            }
            case MutationOp::modify_param:
                apply_modify_param(child, cfg, rng);
                applied = true;
                break;
            }
        }
        if (!applied) apply_modify_param(child, cfg, rng);
    }
    return child;
}

struct RejectedChild {
    Architecture arch;
    std::vector<ConstraintTag> violations;
};

struct SpawnResult {
    std::vector<Architecture> children;
    long long attempts = 0;
    std::vector<RejectedChild> rejected;
};

// Keeps mutating the parent until n admissible children exist. Every
// rejection is recorded with its violation tags.
inline SpawnResult spawn_admissible(const Architecture& parent, const SearchSpaceConfig& cfg,
                                    const HwThresholds& th, int n, Rng& rng,
                                    long long attempts_cap = 0,
                                    BnParamMode bn_mode = BnParamMode::full) {
    if (attempts_cap <= 0) attempts_cap = 1000LL * n;
    SpawnResult result;
    while (int(result.children.size()) < n) {
        if (result.attempts >= attempts_cap)
            throw BudgetExhausted("no admissible child after " + std::to_string(result.attempts) +
                                  " attempts (cap " + std::to_string(attempts_cap) + ")");
        ++result.attempts;
        Architecture child = mutate(parent, cfg, rng);
        auto violations = check_constraints(child, th, bn_mode);
        if (violations.empty())
            result.children.push_back(std::move(child));
        else
            result.rejected.push_back({std::move(child), std::move(violations)});
    }
    return result;
}

// Default starting genome: a single mid-sized conv block plus the head.
inline Architecture default_initial_parent(int input_len, int n_classes) {
    Architecture arch;
    arch.input_len = input_len;
    arch.n_classes = n_classes;
    BlockSpec b;
    b.filters = 32;
    b.kernel = 5;
    b.stride = 2;
    b.padding = Padding::valid;
    arch.blocks.push_back(b);
    return arch;
}

} // namespace flownas
