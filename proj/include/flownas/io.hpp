#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "flownas/errors.hpp"

namespace flownas {

// Little-endian primitives composed byte-wise so the on-disk formats do not
// depend on host endianness.

inline void put_u16_le(std::ostream& os, uint16_t v) {
    char b[2] = {char(v & 0xff), char((v >> 8) & 0xff)};
    os.write(b, 2);
}

inline void put_u32_le(std::ostream& os, uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = char((v >> (8 * i)) & 0xff);
    os.write(b, 4);
}

inline void put_u64_le(std::ostream& os, uint64_t v) {
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = char((v >> (8 * i)) & 0xff);
    os.write(b, 8);
}

inline void put_f32_le(std::ostream& os, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32_le(os, bits);
}

inline bool try_read_exact(std::istream& is, void* dst, size_t n) {
    is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    return static_cast<size_t>(is.gcount()) == n;
}

inline void read_exact(std::istream& is, void* dst, size_t n, const char* what) {
    if (!try_read_exact(is, dst, n))
        throw TruncatedRecord(std::string("unexpected end of stream while reading ") + what);
}

inline uint16_t get_u16_le(std::istream& is, const char* what = "u16") {
    uint8_t b[2];
    read_exact(is, b, 2, what);
    return uint16_t(b[0]) | uint16_t(b[1]) << 8;
}

inline uint32_t get_u32_le(std::istream& is, const char* what = "u32") {
    uint8_t b[4];
    read_exact(is, b, 4, what);
    uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline uint64_t get_u64_le(std::istream& is, const char* what = "u64") {
    uint8_t b[8];
    read_exact(is, b, 8, what);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
}

inline float get_f32_le(std::istream& is, const char* what = "f32") {
    uint32_t bits = get_u32_le(is, what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

// In-buffer views used by the packet decoder: bounds-checked big-endian reads.
inline uint16_t load_be16(std::span<const uint8_t> buf, size_t off) {
    return uint16_t(buf[off]) << 8 | uint16_t(buf[off + 1]);
}

inline uint32_t load_le32(const uint8_t* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

inline uint32_t load_be32(const uint8_t* p) {
    return uint32_t(p[3]) | uint32_t(p[2]) << 8 | uint32_t(p[1]) << 16 | uint32_t(p[0]) << 24;
}

inline std::vector<uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open file: " + path);
    return std::vector<uint8_t>(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

inline void write_file_bytes(const std::string& path, std::span<const uint8_t> bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open file for writing: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("short write: " + path);
}

inline std::string read_file_text(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open file: " + path);
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

inline void write_file_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open file for writing: " + path);
    f << text;
    if (!f) throw IoError("short write: " + path);
}

} // namespace flownas
