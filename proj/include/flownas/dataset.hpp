#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "flownas/errors.hpp"
#include "flownas/io.hpp"

namespace flownas {

struct SessionVector {
    std::vector<uint8_t> bytes; // unscaled; scaling to [0,1] happens at load into the trainer
    uint16_t label = 0;
};

struct Dataset {
    uint16_t n_classes = 0;
    uint32_t input_len = 0;
    std::vector<SessionVector> samples;
};

// On-disk layout (little-endian):
//   "SESS" | version u16 = 1 | n_classes u16 | input_len u32 | n_samples u64
//   then per sample: label u16 | input_len raw bytes
constexpr char kDatasetMagic[4] = {'S', 'E', 'S', 'S'};
constexpr uint16_t kDatasetVersion = 1;

inline void write_dataset(const Dataset& ds, std::ostream& os) {
    for (const auto& s : ds.samples) {
        if (s.bytes.size() != ds.input_len)
            throw LengthMismatch("sample length " + std::to_string(s.bytes.size()) +
                                 " does not match input_len " + std::to_string(ds.input_len));
        if (s.label >= ds.n_classes)
            throw LabelOutOfRange("label " + std::to_string(s.label) + " >= n_classes " +
                                  std::to_string(ds.n_classes));
    }
    os.write(kDatasetMagic, 4);
    put_u16_le(os, kDatasetVersion);
    put_u16_le(os, ds.n_classes);
    put_u32_le(os, ds.input_len);
    put_u64_le(os, ds.samples.size());
    for (const auto& s : ds.samples) {
        put_u16_le(os, s.label);
        os.write(reinterpret_cast<const char*>(s.bytes.data()),
                 static_cast<std::streamsize>(s.bytes.size()));
    }
    if (!os) throw IoError("dataset write failed");
}

inline Dataset read_dataset(std::istream& is) {
    char magic[4];
    if (!try_read_exact(is, magic, 4) || std::string(magic, 4) != std::string(kDatasetMagic, 4))
        throw BadMagic("not a session dataset file");
    uint16_t version = get_u16_le(is, "dataset version");
    if (version != kDatasetVersion)
        throw BadMagic("unsupported dataset version " + std::to_string(version));
    Dataset ds;
    ds.n_classes = get_u16_le(is, "n_classes");
    ds.input_len = get_u32_le(is, "input_len");
    uint64_t n_samples = get_u64_le(is, "n_samples");
    ds.samples.reserve(n_samples);
    for (uint64_t i = 0; i < n_samples; ++i) {
        SessionVector sv;
        uint8_t lbl[2];
        if (!try_read_exact(is, lbl, 2))
            throw LengthMismatch("dataset truncated at sample " + std::to_string(i));
        sv.label = uint16_t(lbl[0]) | uint16_t(lbl[1]) << 8;
        if (sv.label >= ds.n_classes)
            throw LabelOutOfRange("label " + std::to_string(sv.label) + " >= n_classes " +
                                  std::to_string(ds.n_classes) + " at sample " + std::to_string(i));
        sv.bytes.resize(ds.input_len);
        if (!try_read_exact(is, sv.bytes.data(), ds.input_len))
            throw LengthMismatch("dataset truncated at sample " + std::to_string(i));
        ds.samples.push_back(std::move(sv));
    }
    return ds;
}

inline void write_dataset_file(const Dataset& ds, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open dataset for writing: " + path);
    write_dataset(ds, f);
}

inline Dataset read_dataset_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open dataset: " + path);
    return read_dataset(f);
}

} // namespace flownas
