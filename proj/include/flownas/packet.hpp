#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>

#include "flownas/errors.hpp"
#include "flownas/io.hpp"
#include "flownas/pcap.hpp"

namespace flownas {

enum class Transport : uint8_t { tcp = 6, udp = 17 };

struct DecodedPacket {
    CaptureFrame frame;
    size_t eth_offset = 0;
    size_t ip_offset = 0;
    size_t transport_offset = 0;
    size_t payload_offset = 0;
    std::array<uint8_t, 6> dst_mac{};
    std::array<uint8_t, 6> src_mac{};
    std::array<uint8_t, 4> src_ip{};
    std::array<uint8_t, 4> dst_ip{};
    uint16_t src_port = 0;
    uint16_t dst_port = 0;
    Transport protocol = Transport::tcp;
    uint8_t tcp_flags = 0; // zero for UDP
    uint32_t payload_len = 0;
};

namespace ethertype {
constexpr uint16_t ipv4 = 0x0800;
constexpr uint16_t vlan = 0x8100;
} // namespace ethertype

// Decodes Ethernet II / IPv4 / TCP|UDP. Returns nullopt (Skip) for anything
// else: ARP, IPv6, 802.3 frames, non-first IP fragments, other transports.
// Throws MalformedHeader when the frame is shorter than its declared headers
// or carries an impossible length field; never reads past captured_len.
inline std::optional<DecodedPacket> decode_packet(const CaptureFrame& frame) {
    std::span<const uint8_t> data(frame.data);
    if (data.size() != frame.captured_len)
        throw MalformedHeader("captured_len disagrees with frame data size");

    if (data.size() < 14) throw MalformedHeader("frame shorter than Ethernet header");

    DecodedPacket pkt;
    pkt.frame = frame;
    pkt.eth_offset = 0;
    std::copy_n(data.begin(), 6, pkt.dst_mac.begin());
    std::copy_n(data.begin() + 6, 6, pkt.src_mac.begin());

    uint16_t ether_type = load_be16(data, 12);
    size_t ip_off = 14;
    if (ether_type == ethertype::vlan) { // single 802.1Q tag unwrapped
        if (data.size() < 18) throw MalformedHeader("frame shorter than VLAN-tagged Ethernet header");
        ether_type = load_be16(data, 16);
        ip_off = 18;
    }
    if (ether_type < 0x0600) return std::nullopt; // 802.3 length field, not Ethernet II
    if (ether_type != ethertype::ipv4) return std::nullopt;

    if (data.size() < ip_off + 20) throw MalformedHeader("frame shorter than IPv4 header");
    uint8_t ver_ihl = data[ip_off];
    if ((ver_ihl >> 4) != 4) return std::nullopt;
    size_t ihl = ver_ihl & 0x0f;
    if (ihl < 5) throw MalformedHeader("IPv4 IHL below 5");
    size_t ip_header_len = ihl * 4;
    if (data.size() < ip_off + ip_header_len) throw MalformedHeader("frame shorter than IPv4 header with options");

    uint16_t flags_frag = load_be16(data, ip_off + 6);
    if ((flags_frag & 0x1fff) != 0) return std::nullopt; // non-first fragment: no transport header

    uint8_t ip_proto = data[ip_off + 9];
    if (ip_proto != 6 && ip_proto != 17) return std::nullopt;

    pkt.ip_offset = ip_off;
    std::copy_n(data.begin() + ip_off + 12, 4, pkt.src_ip.begin());
    std::copy_n(data.begin() + ip_off + 16, 4, pkt.dst_ip.begin());

    size_t tr_off = ip_off + ip_header_len;
    pkt.transport_offset = tr_off;
    size_t tr_header_len = 0;
    if (ip_proto == 6) {
        pkt.protocol = Transport::tcp;
        if (data.size() < tr_off + 20) throw MalformedHeader("frame shorter than TCP header");
        size_t data_offset = data[tr_off + 12] >> 4;
        if (data_offset < 5) throw MalformedHeader("TCP data offset below 5");
        tr_header_len = data_offset * 4;
        if (data.size() < tr_off + tr_header_len)
            throw MalformedHeader("frame shorter than TCP header with options");
        pkt.tcp_flags = data[tr_off + 13];
    } else {
        pkt.protocol = Transport::udp;
        if (data.size() < tr_off + 8) throw MalformedHeader("frame shorter than UDP header");
        tr_header_len = 8;
    }
    pkt.src_port = load_be16(data, tr_off);
    pkt.dst_port = load_be16(data, tr_off + 2);
    pkt.payload_offset = tr_off + tr_header_len;
    pkt.payload_len = uint32_t(data.size() - pkt.payload_offset);
    return pkt;
}

} // namespace flownas
