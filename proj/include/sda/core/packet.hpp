#pragma once

#include "sda/core/overlay_addr.hpp"
#include "sda/core/types.hpp"

#include <optional>

namespace sda
{
    inline constexpr std::uint8_t kInitialTtl = 16;

    /// Logical VXLAN-GPO style packet: outer underlay header, 24-bit VN,
    /// 16-bit source group tag and the inner overlay addresses.
    struct EncapPacket
    {
        UnderlayAddr outer_src;
        UnderlayAddr outer_dst;
        Vn vn;
        GroupId group;
        OverlayAddr inner_src;
        OverlayAddr inner_dst;
        std::uint32_t payload_len = 0;
        std::uint8_t ttl = kInitialTtl;

        // trace fields, not part of the header
        PacketId id = 0;
        std::uint32_t flow = 0;
    };

    struct Decapsulated
    {
        Vn vn;
        GroupId group;
        OverlayAddr inner_dst;
        OverlayAddr inner_src;
    };

    EncapPacket encapsulate(const OverlayAddr &inner_dst, const OverlayAddr &inner_src, Vn vn, GroupId group,
                            UnderlayAddr locator, UnderlayAddr self_locator, std::uint8_t initial_ttl = kInitialTtl);

    /// Empty when the packet must be dropped (TTL exhausted).
    std::optional<Decapsulated> decapsulate(const EncapPacket &pkt);

    /// Re-targets an already encapsulated packet at a new locator, consuming
    /// one hop. Empty when the TTL runs out.
    std::optional<EncapPacket> reencapsulate(const EncapPacket &pkt, UnderlayAddr locator, UnderlayAddr self_locator);

    enum class FrameKind : std::uint8_t
    {
        Unicast,
        ArpRequest,
        Broadcast,
    };

    /// A frame as emitted by a locally attached endpoint, before encapsulation.
    struct OverlayFrame
    {
        PacketId id = 0;
        std::uint32_t flow = 0;
        FrameKind kind = FrameKind::Unicast;
        OverlayAddr inner_src;
        /// Broadcast MAC for ArpRequest/Broadcast frames.
        OverlayAddr inner_dst;
        /// The who-has target of an ArpRequest.
        OverlayAddr arp_target;
        std::uint32_t payload_len = 0;
    };
}
