#pragma once

#include <charconv>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "flownas/errors.hpp"

namespace flownas {

enum class Padding : uint8_t { valid, same };
enum class PoolKind : uint8_t { none, max, avg };

inline const char* to_string(Padding p) { return p == Padding::valid ? "valid" : "same"; }
inline const char* to_string(PoolKind k) {
    switch (k) {
    case PoolKind::none: return "none";
    case PoolKind::max: return "max";
    default: return "avg";
    }
}

// Shortest round-trippable decimal form of a double.
inline std::string format_double(double v) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, end);
}

struct PoolSpec {
    PoolKind kind = PoolKind::none;
    int size = 2;
    int stride = 2;
    Padding padding = Padding::same;

    bool enabled() const { return kind != PoolKind::none; }
    bool operator==(const PoolSpec&) const = default;
};

// One search-space block: conv (+ batch norm + ReLU) with optional pooling
// and dropout.
struct BlockSpec {
    int filters = 16;
    int kernel = 3;
    int stride = 1;
    Padding padding = Padding::valid;
    PoolSpec pool;
    double dropout_rate = 0.0;

    bool operator==(const BlockSpec&) const = default;
};

// Genome of the search: block list plus the fixed GAP -> dense head.
struct Architecture {
    int input_len = 784;
    int input_channels = 1;
    std::vector<BlockSpec> blocks;
    int n_classes = 2;

    bool operator==(const Architecture&) const = default;
};

// --- flat key/value text format -------------------------------------------
//
//   input_len 784
//   n_classes 11
//   block
//   filters 129
//   kernel 7
//   stride 5
//   padding valid
//   pool_kind none
//   dropout 0
//
// `block` opens a new block section; pool_size/pool_stride/pool_pad are only
// valid when pool_kind is max or avg. '#' starts a comment.

inline std::string serialize_arch(const Architecture& arch) {
    std::ostringstream os;
    os << "input_len " << arch.input_len << "\n";
    os << "n_classes " << arch.n_classes << "\n";
    for (const auto& b : arch.blocks) {
        os << "block\n";
        os << "filters " << b.filters << "\n";
        os << "kernel " << b.kernel << "\n";
        os << "stride " << b.stride << "\n";
        os << "padding " << to_string(b.padding) << "\n";
        os << "pool_kind " << to_string(b.pool.kind) << "\n";
        if (b.pool.enabled()) {
            os << "pool_size " << b.pool.size << "\n";
            os << "pool_stride " << b.pool.stride << "\n";
            os << "pool_pad " << to_string(b.pool.padding) << "\n";
        }
        os << "dropout " << format_double(b.dropout_rate) << "\n";
    }
    return os.str();
}

namespace detail {

inline int parse_int(const std::string& value, int line, const std::string& key) {
    try {
        size_t pos = 0;
        int v = std::stoi(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing chars");
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line) + ": bad integer for '" + key + "': " + value);
    }
}

inline double parse_double(const std::string& value, int line, const std::string& key) {
    try {
        size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing chars");
        return v;
    } catch (const std::exception&) {
        throw ParseError("line " + std::to_string(line) + ": bad number for '" + key + "': " + value);
    }
}

inline Padding parse_padding(const std::string& value, int line, const std::string& key) {
    if (value == "valid") return Padding::valid;
    if (value == "same") return Padding::same;
    throw ParseError("line " + std::to_string(line) + ": '" + key + "' must be valid|same, got " + value);
}

} // namespace detail

// Search-space bounds enforced by strict parsing and by architecture
// validation before a run.
struct ArchLimits {
    int filters_min = 16, filters_max = 140;
    int kernel_min = 3, kernel_max = 7;
    int stride_min = 1, stride_max = 6;
    int pool_size_min = 2, pool_size_max = 3;
    double dropout_min = 0.1, dropout_max = 0.5;
    int max_depth = 5;
};

inline void validate_architecture(const Architecture& arch, const ArchLimits& lim = {},
                                  bool enforce_ranges = true) {
    if (arch.input_len < 1) throw ParseError("input_len must be >= 1");
    if (arch.input_channels < 1) throw ParseError("input_channels must be >= 1");
    if (arch.n_classes < 2) throw ParseError("n_classes must be >= 2");
    if (enforce_ranges && arch.blocks.empty()) throw ParseError("architecture needs at least one block");
    if (enforce_ranges && int(arch.blocks.size()) > lim.max_depth)
        throw ParseError("architecture exceeds max depth " + std::to_string(lim.max_depth));
    for (size_t i = 0; i < arch.blocks.size(); ++i) {
        const auto& b = arch.blocks[i];
        auto fail = [&](const std::string& msg) {
            throw ParseError("block " + std::to_string(i + 1) + ": " + msg);
        };
        if (b.filters < 1 || b.kernel < 1 || b.stride < 1) fail("fields must be positive");
        if (b.pool.enabled() && (b.pool.size < 1 || b.pool.stride < 1)) fail("pool fields must be positive");
        if (b.dropout_rate < 0.0 || b.dropout_rate >= 1.0) fail("dropout must be in [0,1)");
        if (!enforce_ranges) continue;
        if (b.filters < lim.filters_min || b.filters > lim.filters_max)
            fail("filters " + std::to_string(b.filters) + " outside [" +
                 std::to_string(lim.filters_min) + "," + std::to_string(lim.filters_max) + "]");
        if (b.kernel < lim.kernel_min || b.kernel > lim.kernel_max)
            fail("kernel " + std::to_string(b.kernel) + " outside range");
        if (b.stride < lim.stride_min || b.stride > lim.stride_max)
            fail("stride " + std::to_string(b.stride) + " outside range");
        if (b.pool.enabled()) {
            if (b.pool.size < lim.pool_size_min || b.pool.size > lim.pool_size_max)
                fail("pool_size " + std::to_string(b.pool.size) + " outside range");
            if (b.pool.stride < lim.pool_size_min || b.pool.stride > lim.pool_size_max)
                fail("pool_stride " + std::to_string(b.pool.stride) + " outside range");
        }
        if (b.dropout_rate != 0.0 &&
            (b.dropout_rate < lim.dropout_min || b.dropout_rate > lim.dropout_max))
            fail("dropout must be 0 or within [" + std::to_string(lim.dropout_min) + "," +
                 std::to_string(lim.dropout_max) + "]");
    }
}

inline Architecture parse_arch(const std::string& text, bool strict = true) {
    Architecture arch;
    arch.blocks.clear();
    bool have_input_len = false, have_n_classes = false;
    BlockSpec* current = nullptr;
    std::istringstream is(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(is, raw)) {
        ++line_no;
        std::string line = raw.substr(0, raw.find('#'));
        std::istringstream ls(line);
        std::string key, value, extra;
        if (!(ls >> key)) continue;
        if (key == "block") {
            arch.blocks.emplace_back();
            current = &arch.blocks.back();
            continue;
        }
        if (!(ls >> value))
            throw ParseError("line " + std::to_string(line_no) + ": key '" + key + "' has no value");
        if (ls >> extra)
            throw ParseError("line " + std::to_string(line_no) + ": trailing token '" + extra + "'");

        if (key == "input_len") {
            arch.input_len = detail::parse_int(value, line_no, key);
            have_input_len = true;
        } else if (key == "n_classes") {
            arch.n_classes = detail::parse_int(value, line_no, key);
            have_n_classes = true;
        } else if (key == "input_channels") {
            arch.input_channels = detail::parse_int(value, line_no, key);
        } else {
            if (!current)
                throw ParseError("line " + std::to_string(line_no) + ": '" + key +
                                 "' appears before the first block");
            if (key == "filters") current->filters = detail::parse_int(value, line_no, key);
            else if (key == "kernel") current->kernel = detail::parse_int(value, line_no, key);
            else if (key == "stride") current->stride = detail::parse_int(value, line_no, key);
            else if (key == "padding") current->padding = detail::parse_padding(value, line_no, key);
            else if (key == "pool_kind") {
                if (value == "none") current->pool.kind = PoolKind::none;
                else if (value == "max") current->pool.kind = PoolKind::max;
                else if (value == "avg") current->pool.kind = PoolKind::avg;
                else throw ParseError("line " + std::to_string(line_no) + ": pool_kind must be none|max|avg");
            } else if (key == "pool_size" || key == "pool_stride" || key == "pool_pad") {
                if (!current->pool.enabled())
                    throw ParseError("line " + std::to_string(line_no) + ": '" + key +
                                     "' requires pool_kind max|avg first");
                if (key == "pool_size") current->pool.size = detail::parse_int(value, line_no, key);
                else if (key == "pool_stride") current->pool.stride = detail::parse_int(value, line_no, key);
                else current->pool.padding = detail::parse_padding(value, line_no, key);
            } else if (key == "dropout") {
                current->dropout_rate = detail::parse_double(value, line_no, key);
            } else {
                throw ParseError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
            }
        }
    }
    if (!have_input_len) throw ParseError("missing required key 'input_len'");
    if (!have_n_classes) throw ParseError("missing required key 'n_classes'");
    validate_architecture(arch, ArchLimits{}, strict);
    return arch;
}

} // namespace flownas
