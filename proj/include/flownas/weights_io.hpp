#pragma once

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "flownas/io.hpp"
#include "flownas/network.hpp"

namespace flownas {

// Weights checkpoint: "WGTS" | version u16 | per tensor:
//   name length u16 | name bytes | rank u8 | dims u32 each | f32 LE values.
// Tensors appear in model order; the file ends after the last tensor.
constexpr char kWeightsMagic[4] = {'W', 'G', 'T', 'S'};
constexpr uint16_t kWeightsVersion = 1;

inline void save_weights(Network& net, std::ostream& os) {
    os.write(kWeightsMagic, 4);
    put_u16_le(os, kWeightsVersion);
    for (const Tensor* t : net.tensors()) {
        put_u16_le(os, uint16_t(t->name.size()));
        os.write(t->name.data(), std::streamsize(t->name.size()));
        os.put(char(t->dims.size()));
        for (long d : t->dims) put_u32_le(os, uint32_t(d));
        for (double v : t->value) put_f32_le(os, float(v));
    }
    if (!os) throw IoError("weights write failed");
}

inline void load_weights(Network& net, std::istream& is) {
    char magic[4];
    if (!try_read_exact(is, magic, 4) || std::string(magic, 4) != std::string(kWeightsMagic, 4))
        throw BadMagic("not a weights checkpoint");
    uint16_t version = get_u16_le(is, "weights version");
    if (version != kWeightsVersion)
        throw BadMagic("unsupported weights version " + std::to_string(version));
    size_t seen = 0;
    for (;;) {
        uint8_t len_bytes[2];
        if (!try_read_exact(is, len_bytes, 2)) break; // clean EOF
        uint16_t name_len = uint16_t(len_bytes[0]) | uint16_t(len_bytes[1]) << 8;
        std::string name(name_len, '\0');
        read_exact(is, name.data(), name_len, "tensor name");
        uint8_t rank;
        read_exact(is, &rank, 1, "tensor rank");
        std::vector<long> dims(rank);
        size_t count = 1;
        for (auto& d : dims) {
            d = long(get_u32_le(is, "tensor dim"));
            count *= size_t(d);
        }
        Tensor* t = net.find_tensor(name);
        if (!t)
            throw ParseError("checkpoint tensor '" + name + "' does not exist in this architecture");
        if (t->dims != dims)
            throw ShapeMismatch("checkpoint tensor '" + name + "' has mismatched dimensions");
        for (size_t i = 0; i < count; ++i) t->value[i] = double(get_f32_le(is, "tensor value"));
        ++seen;
    }
    if (seen != net.tensors().size())
        throw ParseError("checkpoint holds " + std::to_string(seen) + " tensors, architecture needs " +
                         std::to_string(net.tensors().size()));
}

inline void save_weights_file(Network& net, const std::string& path) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open weights file for writing: " + path);
    save_weights(net, f);
}

inline void load_weights_file(Network& net, const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open weights file: " + path);
    load_weights(net, f);
}

} // namespace flownas
