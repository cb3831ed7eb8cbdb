#pragma once

#include <cstdint>
#include <fstream>
#include <istream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "flownas/errors.hpp"
#include "flownas/io.hpp"

namespace flownas {

struct CaptureFrame {
    int64_t ts_sec = 0;
    int64_t ts_usec = 0; // always microseconds, regardless of file resolution
    uint32_t captured_len = 0;
    uint32_t original_len = 0;
    std::vector<uint8_t> data;
};

namespace pcap_magic {
constexpr uint32_t usec = 0xa1b2c3d4u;
constexpr uint32_t usec_swapped = 0xd4c3b2a1u;
constexpr uint32_t nsec = 0xa1b23c4du;
constexpr uint32_t nsec_swapped = 0x4d3cb2a1u;
constexpr uint32_t pcapng = 0x0a0d0d0au;
} // namespace pcap_magic

// Sequential single-consumer reader for classic pcap files. Per-record byte
// order follows the global-header magic; nanosecond captures are normalized
// to microsecond timestamps.
class PcapReader {
public:
    explicit PcapReader(std::istream& in) : in_(in) {
        uint8_t raw[4];
        read_exact_or(raw, 4, "pcap global header");
        uint32_t magic = load_le32(raw);
        switch (magic) {
        case pcap_magic::usec: swapped_ = false; nanosecond_ = false; break;
        case pcap_magic::usec_swapped: swapped_ = true; nanosecond_ = false; break;
        case pcap_magic::nsec: swapped_ = false; nanosecond_ = true; break;
        case pcap_magic::nsec_swapped: swapped_ = true; nanosecond_ = true; break;
        case pcap_magic::pcapng:
            throw BadMagic("pcapng container is not supported (classic pcap only)");
        default:
            throw BadMagic("not a pcap file (unknown magic)");
        }
        // version, thiszone, sigfigs, snaplen, linktype
        uint8_t rest[20];
        if (!try_read_exact(in_, rest, 20))
            throw TruncatedRecord("pcap global header shorter than 24 bytes");
        link_type_ = field(rest + 16);
    }

    bool swapped() const { return swapped_; }
    bool nanosecond() const { return nanosecond_; }
    uint32_t link_type() const { return link_type_; }

    // Returns nullopt at clean end-of-file; throws TruncatedRecord when a
    // record header promises more bytes than remain.
    std::optional<CaptureFrame> next() {
        uint8_t hdr[16];
        if (!in_.read(reinterpret_cast<char*>(hdr), 1)) return std::nullopt;
        if (!try_read_exact(in_, hdr + 1, 15))
            throw TruncatedRecord("pcap record header truncated");
        CaptureFrame frame;
        frame.ts_sec = field(hdr);
        uint32_t frac = field(hdr + 4);
        frame.ts_usec = nanosecond_ ? int64_t(frac) / 1000 : int64_t(frac);
        frame.captured_len = field(hdr + 8);
        frame.original_len = field(hdr + 12);
        frame.data.resize(frame.captured_len);
        if (!try_read_exact(in_, frame.data.data(), frame.captured_len))
            throw TruncatedRecord("pcap record payload truncated");
        return frame;
    }

private:
    uint32_t field(const uint8_t* p) const { return swapped_ ? load_be32(p) : load_le32(p); }

    void read_exact_or(uint8_t* dst, size_t n, const char* what) {
        if (!try_read_exact(in_, dst, n))
            throw BadMagic(std::string("stream too short for ") + what);
    }

    std::istream& in_;
    bool swapped_ = false;
    bool nanosecond_ = false;
    uint32_t link_type_ = 0;
};

inline std::vector<CaptureFrame> read_capture(std::istream& in) {
    PcapReader reader(in);
    std::vector<CaptureFrame> frames;
    while (auto f = reader.next()) frames.push_back(std::move(*f));
    return frames;
}

inline std::vector<CaptureFrame> read_capture_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open capture: " + path);
    return read_capture(f);
}

} // namespace flownas
