#pragma once

// Test-only reference builders: pcap files and Ethernet/IPv4/TCP/UDP frames
// are composed byte by byte from the RFC wire layouts, independently of the
// production reader/decoder they are used to check.

#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace testsupport {

inline void put16be(std::vector<uint8_t>& v, uint16_t x) {
    v.push_back(uint8_t(x >> 8));
    v.push_back(uint8_t(x & 0xff));
}

inline void put32(std::vector<uint8_t>& v, uint32_t x, bool big_endian) {
    if (big_endian)
        for (int i = 3; i >= 0; --i) v.push_back(uint8_t(x >> (8 * i)));
    else
        for (int i = 0; i < 4; ++i) v.push_back(uint8_t(x >> (8 * i)));
}

struct FrameSpec {
    std::array<uint8_t, 6> dst_mac{0x02, 0, 0, 0, 0, 0x01};
    std::array<uint8_t, 6> src_mac{0x02, 0, 0, 0, 0, 0x02};
    std::array<uint8_t, 4> src_ip{10, 0, 0, 1};
    std::array<uint8_t, 4> dst_ip{10, 0, 0, 2};
    uint16_t src_port = 40000;
    uint16_t dst_port = 443;
    uint8_t ip_proto = 6; // 6 tcp, 17 udp
    uint8_t ihl = 5;
    uint8_t tcp_data_offset = 5;
    uint8_t tcp_flags = 0x18; // PSH|ACK
    bool vlan = false;
    std::vector<uint8_t> payload;
};

inline std::vector<uint8_t> build_frame(const FrameSpec& s) {
    std::vector<uint8_t> f;
    f.insert(f.end(), s.dst_mac.begin(), s.dst_mac.end());
    f.insert(f.end(), s.src_mac.begin(), s.src_mac.end());
    if (s.vlan) {
        put16be(f, 0x8100);
        put16be(f, 0x0064); // VID 100
    }
    put16be(f, 0x0800);

    size_t ip_header_len = size_t(s.ihl) * 4;
    size_t transport_len = s.ip_proto == 6 ? size_t(s.tcp_data_offset) * 4 : 8;
    size_t ip_total = ip_header_len + transport_len + s.payload.size();

    f.push_back(uint8_t(0x40 | s.ihl)); // version 4 + IHL
    f.push_back(0);                     // DSCP/ECN
    put16be(f, uint16_t(ip_total));
    put16be(f, 0x1234); // identification
    put16be(f, 0x4000); // flags: DF, fragment offset 0
    f.push_back(64);    // TTL
    f.push_back(s.ip_proto);
    put16be(f, 0); // checksum left zero; decoding does not verify it
    f.insert(f.end(), s.src_ip.begin(), s.src_ip.end());
    f.insert(f.end(), s.dst_ip.begin(), s.dst_ip.end());
    for (size_t i = 20; i < ip_header_len; ++i) f.push_back(0x01); // IP options filler

    put16be(f, s.src_port);
    put16be(f, s.dst_port);
    if (s.ip_proto == 6) {
        put32(f, 0x1000, true); // seq
        put32(f, 0x2000, true); // ack
        f.push_back(uint8_t(s.tcp_data_offset << 4));
        f.push_back(s.tcp_flags);
        put16be(f, 0xffff); // window
        put16be(f, 0);      // checksum
        put16be(f, 0);      // urgent
        for (size_t i = 20; i < size_t(s.tcp_data_offset) * 4; ++i) f.push_back(0x02);
    } else {
        put16be(f, uint16_t(8 + s.payload.size()));
        put16be(f, 0); // checksum
    }
    f.insert(f.end(), s.payload.begin(), s.payload.end());
    return f;
}

struct RecordSpec {
    uint32_t ts_sec = 0;
    uint32_t ts_frac = 0; // usec, or nsec for nanosecond captures
    std::vector<uint8_t> data;
    int captured_override = -1; // truncate the stored bytes when >= 0
};

inline void put16(std::vector<uint8_t>& v, uint16_t x, bool big_endian) {
    if (big_endian) {
        v.push_back(uint8_t(x >> 8));
        v.push_back(uint8_t(x & 0xff));
    } else {
        v.push_back(uint8_t(x & 0xff));
        v.push_back(uint8_t(x >> 8));
    }
}

// Writes a classic pcap file in the requested byte order. A big-endian file
// starts with bytes a1 b2 c3 d4, which a little-endian reader sees as the
// swapped magic 0xd4c3b2a1.
inline std::vector<uint8_t> build_pcap(const std::vector<RecordSpec>& records,
                                       bool big_endian = false, bool nanosecond = false) {
    std::vector<uint8_t> f;
    put32(f, nanosecond ? 0xa1b23c4du : 0xa1b2c3d4u, big_endian);
    put16(f, 2, big_endian); // version major
    put16(f, 4, big_endian); // version minor
    put32(f, 0, big_endian); // thiszone
    put32(f, 0, big_endian); // sigfigs
    put32(f, 0x40000, big_endian);
    put32(f, 1, big_endian); // LINKTYPE_ETHERNET
    for (const auto& r : records) {
        uint32_t incl = r.captured_override >= 0 ? uint32_t(r.captured_override)
                                                 : uint32_t(r.data.size());
        put32(f, r.ts_sec, big_endian);
        put32(f, r.ts_frac, big_endian);
        put32(f, incl, big_endian);
        put32(f, uint32_t(r.data.size()), big_endian);
        f.insert(f.end(), r.data.begin(), r.data.begin() + std::min<size_t>(incl, r.data.size()));
    }
    return f;
}

} // namespace testsupport
