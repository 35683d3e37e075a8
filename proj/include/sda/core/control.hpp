#pragma once

#include "sda/core/mapping.hpp"
#include "sda/core/policy_types.hpp"

#include <array>
#include <optional>
#include <string_view>
#include <variant>
#include <vector>

namespace sda
{
    enum class MsgKind : std::uint8_t
    {
        MapRequest,
        MapReply,
        NegativeMapReply,
        MapRegister,
        SolicitUpdate,
        SubscribeUpdate,
        AuthRequest,
        AuthReply,
        RuleDownload,
        ProactivePush,
    };

    inline constexpr std::size_t kMsgKindCount = 10;

    std::string_view msg_kind_name(MsgKind k) noexcept;

    /// Resolve one or more keys. Replies come back one entry per message.
    struct MapRequestBody
    {
        std::vector<MappingKey> keys;
        /// Ask for the MAC bound to an IP key (L2 gateway ARP conversion).
        bool want_l2_binding = false;
    };

    struct MapReplyBody
    {
        MappingKey queried;
        MappingEntry entry;
        std::optional<OverlayAddr> l2_binding;
    };

    struct NegativeMapReplyBody
    {
        MappingKey key;
    };

    struct RegisterRecord
    {
        MappingKey key;
        GroupId group;
    };

    /// Publish (or, with withdraw set, retract) the records at locator.
    struct MapRegisterBody
    {
        UnderlayAddr locator;
        std::vector<RegisterRecord> records;
        /// MAC of the endpoint owning the IP records, stored for ARP lookups.
        std::optional<OverlayAddr> l2_addr;
        bool withdraw = false;
    };

    /// Tells a holder of stale mappings to re-resolve these keys.
    struct SolicitUpdateBody
    {
        std::vector<MappingKey> keys;
    };

    /// One change of the routing-server store, streamed to subscribed borders.
    struct SubscribeUpdateBody
    {
        MappingEntry entry;
        bool withdrawn = false;
    };

    struct AuthRequestBody
    {
        EndpointId endpoint_id = 0;
        std::string auth_token;
    };

    struct AuthReplyBody
    {
        EndpointId endpoint_id = 0;
        bool success = false;
        AuthResult result;
        /// Pushed by the policy server after a group reassignment.
        bool reauth = false;
    };

    /// Full destination-filtered rule set for (vn, dst_group).
    struct RuleDownloadBody
    {
        Vn vn;
        GroupId dst_group;
        std::vector<ConnectivityRule> rules;
        std::uint64_t matrix_version = 0;
    };

    /// One reflector update: every record of a single registration event.
    struct ProactivePushBody
    {
        std::vector<MappingEntry> entries;
        bool withdrawn = false;
    };

    // Alternative order matches MsgKind.
    using ControlBody = std::variant<MapRequestBody, MapReplyBody, NegativeMapReplyBody, MapRegisterBody,
                                     SolicitUpdateBody, SubscribeUpdateBody, AuthRequestBody, AuthReplyBody,
                                     RuleDownloadBody, ProactivePushBody>;

    static_assert(std::variant_size_v<ControlBody> == kMsgKindCount);

    struct ControlMessage
    {
        UnderlayAddr from;
        CauseId cause = 0;
        ControlBody body;

        MsgKind kind() const noexcept { return static_cast<MsgKind>(body.index()); }

        template <class Body>
        const Body &as() const
        {
            return std::get<Body>(body);
        }
    };

    /// Control message addressed to a node on the underlay.
    struct ControlOut
    {
        UnderlayAddr to;
        ControlMessage msg;
    };

    using KindCounts = std::array<std::uint64_t, kMsgKindCount>;
}
