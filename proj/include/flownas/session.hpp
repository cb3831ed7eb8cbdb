#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <mutex>
#include <set>
#include <span>
#include <tuple>
#include <vector>

#include "flownas/errors.hpp"
#include "flownas/packet.hpp"
#include "flownas/rng.hpp"

namespace flownas {

struct Endpoint {
    std::array<uint8_t, 4> ip{};
    uint16_t port = 0;

    auto operator<=>(const Endpoint&) const = default;
};

// Bidirectional session identity: the two endpoints in lexicographic order
// plus the transport, so a packet and its reverse map to the same key.
struct SessionKey {
    Endpoint a;
    Endpoint b;
    Transport protocol = Transport::tcp;

    auto operator<=>(const SessionKey&) const = default;
};

inline SessionKey session_key(const DecodedPacket& pkt) {
    Endpoint src{pkt.src_ip, pkt.src_port};
    Endpoint dst{pkt.dst_ip, pkt.dst_port};
    if (dst < src) std::swap(src, dst);
    return SessionKey{src, dst, pkt.protocol};
}

struct Session {
    SessionKey key;
    std::vector<DecodedPacket> packets;
};

// Groups packets by canonical 5-tuple. Sessions come out in order of first
// appearance; packets keep capture order within each session.
inline std::vector<Session> assemble_sessions(std::span<const DecodedPacket> packets) {
    std::vector<Session> sessions;
    std::map<SessionKey, size_t> index;
    for (const auto& pkt : packets) {
        SessionKey key = session_key(pkt);
        auto [it, inserted] = index.try_emplace(key, sessions.size());
        if (inserted) sessions.push_back(Session{key, {}});
        sessions[it->second].packets.push_back(pkt);
    }
    return sessions;
}

constexpr uint16_t kDnsPort = 53;

// Drops zero-payload packets (handshake/ack noise) and DNS traffic.
inline std::vector<DecodedPacket> filter_packets(std::vector<DecodedPacket> packets) {
    std::erase_if(packets, [](const DecodedPacket& p) {
        return p.payload_len == 0 || p.src_port == kDnsPort || p.dst_port == kDnsPort;
    });
    return packets;
}

// The seven header-handling switches. The 24 canonical combinations are
// exposed through table_row(); hand-built instances must pass validate().
struct PreprocStrategy {
    bool eth_removal = false;
    bool mac_anon = false;
    bool mac_zero = false;
    bool ip_anon = false;
    bool ip_zero = false;
    bool port_zero = false;
    bool udp_pad = false;

    void validate() const {
        int mac = int(eth_removal) + int(mac_anon) + int(mac_zero);
        if (mac > 1)
            throw InvalidStrategy("at most one of eth_removal/mac_anon/mac_zero may be set");
        if (int(ip_anon) + int(ip_zero) != 1)
            throw InvalidStrategy("exactly one of ip_anon/ip_zero must be set");
    }

    // Rows 1..24: {eth_removal, mac_anon, mac_zero} x {ip_anon, ip_zero}
    // x {port_zero off/on} x {udp_pad on/off}, in table order.
    static PreprocStrategy table_row(int id) {
        if (id < 1 || id > 24) throw InvalidStrategy("strategy id must be in [1,24]");
        int r = id - 1;
        PreprocStrategy s;
        int mac_group = r / 8; // 0: eth removal, 1: mac anon, 2: mac zero
        s.eth_removal = mac_group == 0;
        s.mac_anon = mac_group == 1;
        s.mac_zero = mac_group == 2;
        s.ip_anon = (r % 8) / 4 == 0;
        s.ip_zero = !s.ip_anon;
        s.port_zero = (r % 4) / 2 == 1;
        s.udp_pad = r % 2 == 0;
        return s;
    }
};

// Keyed, injective, run-stable pseudonym map for MAC/IP values. Pseudonyms
// are drawn from a keyed hash of the original value and re-drawn on
// collision, so distinct inputs never share a pseudonym within a run.
// Insert-if-absent is internally synchronized.
class AnonymizationMap {
public:
    explicit AnonymizationMap(uint64_t key) : key_(key) {}

    std::vector<uint8_t> pseudonym(std::span<const uint8_t> value) {
        std::lock_guard lock(mutex_);
        auto& table = value.size() == 4 ? ip_table_ : mac_table_;
        auto& used = value.size() == 4 ? ip_used_ : mac_used_;
        std::vector<uint8_t> orig(value.begin(), value.end());
        if (auto it = table.find(orig); it != table.end()) return it->second;
        uint64_t h = key_;
        for (uint8_t byte : value) h = splitmix64(h) ^ byte;
        for (uint64_t attempt = 0;; ++attempt) {
            uint64_t state = h + attempt;
            uint64_t draw = splitmix64(state);
            std::vector<uint8_t> candidate(value.size());
            for (size_t i = 0; i < candidate.size(); ++i)
                candidate[i] = uint8_t(draw >> (8 * i));
            if (used.insert(candidate).second) {
                table.emplace(std::move(orig), candidate);
                return candidate;
            }
        }
    }

    void rewrite(std::vector<uint8_t>& packet, size_t offset, size_t width) {
        auto p = pseudonym(std::span<const uint8_t>(packet.data() + offset, width));
        std::copy(p.begin(), p.end(), packet.begin() + ptrdiff_t(offset));
    }

private:
    uint64_t key_;
    std::mutex mutex_;
    std::map<std::vector<uint8_t>, std::vector<uint8_t>> ip_table_, mac_table_;
    std::set<std::vector<uint8_t>> ip_used_, mac_used_;
};

constexpr size_t kUdpPadBytes = 12; // brings the 8-byte UDP header up to TCP's 20

// Applies one header strategy to a decoded packet and returns the rewritten
// raw bytes. Field rewrites happen in place first; Ethernet removal then
// slices from the IP header; UDP padding inserts zeros after the UDP header.
// Payload bytes are never touched.
inline std::vector<uint8_t> apply_strategy_packet(const DecodedPacket& pkt,
                                                  const PreprocStrategy& strategy,
                                                  AnonymizationMap& anon) {
    std::vector<uint8_t> bytes = pkt.frame.data;

    if (!strategy.eth_removal) {
        if (strategy.mac_zero) {
            std::fill(bytes.begin(), bytes.begin() + 12, uint8_t(0));
        } else if (strategy.mac_anon) {
            anon.rewrite(bytes, 0, 6);
            anon.rewrite(bytes, 6, 6);
        }
    }
    if (strategy.ip_zero) {
        std::fill_n(bytes.begin() + ptrdiff_t(pkt.ip_offset + 12), 8, uint8_t(0));
    } else if (strategy.ip_anon) {
        anon.rewrite(bytes, pkt.ip_offset + 12, 4);
        anon.rewrite(bytes, pkt.ip_offset + 16, 4);
    }
    if (strategy.port_zero)
        std::fill_n(bytes.begin() + ptrdiff_t(pkt.transport_offset), 4, uint8_t(0));

    if (strategy.eth_removal)
        bytes.erase(bytes.begin(), bytes.begin() + ptrdiff_t(pkt.ip_offset));

    if (strategy.udp_pad && pkt.protocol == Transport::udp) {
        size_t udp_end = pkt.transport_offset + 8 - (strategy.eth_removal ? pkt.ip_offset : 0);
        bytes.insert(bytes.begin() + ptrdiff_t(udp_end), kUdpPadBytes, uint8_t(0));
    }
    return bytes;
}

inline std::vector<std::vector<uint8_t>> apply_strategy(std::span<const DecodedPacket> session,
                                                        const PreprocStrategy& strategy,
                                                        AnonymizationMap& anon) {
    strategy.validate();
    std::vector<std::vector<uint8_t>> out;
    out.reserve(session.size());
    for (const auto& pkt : session) out.push_back(apply_strategy_packet(pkt, strategy, anon));
    return out;
}

// Concatenates the rewritten packet bytes, truncates to length, zero-pads.
inline std::vector<uint8_t> normalize_session(std::span<const std::vector<uint8_t>> packets,
                                              size_t length) {
    if (packets.empty()) throw EmptySession("cannot normalize an empty session");
    if (length == 0) throw LengthMismatch("target length must be positive");
    std::vector<uint8_t> out;
    out.reserve(length);
    for (const auto& p : packets) {
        size_t take = std::min(p.size(), length - out.size());
        out.insert(out.end(), p.begin(), p.begin() + ptrdiff_t(take));
        if (out.size() == length) break;
    }
    out.resize(length, 0);
    return out;
}

inline std::vector<double> scale(std::span<const uint8_t> bytes) {
    std::vector<double> out(bytes.size());
    for (size_t i = 0; i < bytes.size(); ++i) out[i] = double(bytes[i]) / 255.0;
    return out;
}

} // namespace flownas
