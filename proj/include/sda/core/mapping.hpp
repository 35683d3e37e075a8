#pragma once

#include "sda/core/overlay_addr.hpp"
#include "sda/core/types.hpp"

#include <string>
#include <vector>

namespace sda
{
    /// (VN, overlay prefix): the key of the endpoint-location database.
    struct MappingKey
    {
        Vn vn;
        OverlayAddr addr;

        std::string to_string() const;

        friend bool operator==(const MappingKey &, const MappingKey &) = default;
        friend auto operator<=>(const MappingKey &, const MappingKey &) = default;
    };

    struct MappingKeyHash
    {
        std::size_t operator()(const MappingKey &k) const noexcept
        {
            return OverlayAddrHash{}(k.addr) ^ (std::size_t{k.vn.value()} * 0x9E3779B97F4A7C15ull);
        }
    };

    /// A stored overlay-to-underlay mapping.
    struct MappingEntry
    {
        MappingKey key;
        UnderlayAddr locator;
        GroupId group;
        SimTime registered_at = 0;
        std::uint64_t version = 0;

        friend bool operator==(const MappingEntry &, const MappingEntry &) = default;
    };

    /// What the policy server knows about one endpoint.
    struct EndpointRecord
    {
        EndpointId endpoint_id = 0;
        std::string auth_token;
        Vn vn;
        GroupId group;
        /// Host entries only (IPv4, IPv6, MAC).
        std::vector<OverlayAddr> addrs;

        /// Throws std::invalid_argument unless every address is a host entry.
        void validate() const;
    };
}
