#include "sda/core/mapping.hpp"
#include "sda/core/packet.hpp"

#include <stdexcept>

namespace sda
{
    EncapPacket encapsulate(const OverlayAddr &inner_dst, const OverlayAddr &inner_src, Vn vn, GroupId group,
                            UnderlayAddr locator, UnderlayAddr self_locator, std::uint8_t initial_ttl)
    {
        if (locator.is_null())
        {
            throw std::invalid_argument("encapsulate: null locator");
        }
        if (initial_ttl == 0)
        {
            throw std::invalid_argument("encapsulate: initial TTL must be positive");
        }
        EncapPacket pkt;
        pkt.outer_src = self_locator;
        pkt.outer_dst = locator;
        pkt.vn = vn;
        pkt.group = group;
        pkt.inner_src = inner_src;
        pkt.inner_dst = inner_dst;
        pkt.ttl = initial_ttl;
        return pkt;
    }

    std::optional<Decapsulated> decapsulate(const EncapPacket &pkt)
    {
        if (pkt.ttl == 0)
        {
            return std::nullopt;
        }
        return Decapsulated{pkt.vn, pkt.group, pkt.inner_dst, pkt.inner_src};
    }

    std::optional<EncapPacket> reencapsulate(const EncapPacket &pkt, UnderlayAddr locator, UnderlayAddr self_locator)
    {
        if (pkt.ttl <= 1)
        {
            return std::nullopt;
        }
        EncapPacket out = pkt;
        out.outer_src = self_locator;
        out.outer_dst = locator;
        out.ttl = static_cast<std::uint8_t>(pkt.ttl - 1);
        return out;
    }

    std::string MappingKey::to_string() const
    {
        return std::to_string(vn.value()) + ":" + addr.to_string();
    }

    void EndpointRecord::validate() const
    {
        for (const auto &a : addrs)
        {
            if (!a.is_host())
            {
                throw std::invalid_argument("endpoint " + std::to_string(endpoint_id) + " address " + a.to_string() +
                                            " is not a host entry");
            }
        }
    }
}
