#pragma once

#include "sda/core/control.hpp"
#include "sda/core/packet.hpp"
#include "sda/router/map_cache.hpp"
#include "sda/router/synced_fib.hpp"

#include <map>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <unordered_map>
#include <unordered_set>
#include <variant>
#include <vector>

namespace sda
{
    enum class RouterRole : std::uint8_t
    {
        Edge,
        Border,
    };

    enum class ControlPlaneMode : std::uint8_t
    {
        Reactive,
        Proactive,
    };

    const char *role_name(RouterRole r) noexcept;
    const char *mode_name(ControlPlaneMode m) noexcept;

    enum class OnboardPhase : std::uint8_t
    {
        Detected,
        Authenticating,
        RulesInstalled,
        Addressed,
        Registered,
        Quarantined,
    };

    const char *phase_name(OnboardPhase p) noexcept;

    enum class DropReason : std::uint8_t
    {
        NotOnboarded,
        Policy,
        DefaultDeny,
        Negative,
        NoRoute,
        Unknown,
        InTransit,
        Ttl,
        LoopGuard,
        Unreachable,
        RouterDown,
        UnsupportedBroadcast,
        ArpUnresolved,
    };

    inline constexpr std::size_t kDropReasonCount = 13;

    const char *drop_reason_name(DropReason r) noexcept;

    struct RouterConfig
    {
        RouterRole role = RouterRole::Edge;
        ControlPlaneMode mode = ControlPlaneMode::Reactive;
        UnderlayAddr locator;
        /// Where MapRequest/MapRegister go: the routing server, or the route
        /// reflector in proactive mode.
        UnderlayAddr mapping_server;
        UnderlayAddr policy_server;
        /// Default-route target; null when the router has none.
        UnderlayAddr default_border;
        /// All border locators. Borders keep a synced FIB, so they are never solicited.
        std::vector<UnderlayAddr> borders;
        Action default_action = Action::Deny;
        std::uint8_t initial_ttl = kInitialTtl;
        MapCache::Timers cache;
        /// How long a departed endpoint's mappings are held before withdrawal.
        SimTime departure_grace = 5 * kMicrosPerSecond;
        /// Minimum spacing of solicits for unknown traffic per (sender, key).
        SimTime solicit_holddown = kMicrosPerSecond;
        /// Track underlay announcements: purge mappings towards withdrawn
        /// locators and, on borders, refuse to forward to them.
        bool underlay_tracking = true;
        /// Drop unrecognized inbound traffic and solicit its sender instead of
        /// default-routing it back to the border.
        bool unknown_solicit = true;
    };

    /// What an endpoint presents when it attaches to a port.
    struct AttachInfo
    {
        EndpointId endpoint_id = 0;
        std::string auth_token;
        /// Hardware addresses the endpoint brings; IPv4 comes from DHCP.
        std::optional<OverlayAddr> mac;
        std::optional<OverlayAddr> ipv6;
    };

    // ---- actions a router asks its environment to carry out ----

    struct SendPacket
    {
        EncapPacket pkt;
    };

    struct DeliverLocal
    {
        PortId port = 0;
        EndpointId endpoint = 0;
        PacketId id = 0;
        std::uint32_t flow = 0;
        GroupId src_group;
    };

    struct DropPacket
    {
        PacketId id = 0;
        std::uint32_t flow = 0;
        DropReason reason = DropReason::NoRoute;
    };

    struct ExternalExit
    {
        PacketId id = 0;
        std::uint32_t flow = 0;
    };

    struct RequestAddress
    {
        EndpointId endpoint = 0;
        Vn vn;
    };

    struct ArmTimer
    {
        SimTime at = 0;
        std::uint64_t tag = 0;
    };

    struct PhaseChange
    {
        EndpointId endpoint = 0;
        OnboardPhase phase = OnboardPhase::Detected;
    };

    struct SessionEnded
    {
        EndpointId endpoint = 0;
    };

    using RouterAction = std::variant<ControlOut, SendPacket, DeliverLocal, DropPacket, ExternalExit, RequestAddress,
                                      ArmTimer, PhaseChange, SessionEnded>;
    using Actions = std::vector<RouterAction>;

    struct RouterCounters
    {
        std::uint64_t acl_hits = 0;
        std::uint64_t acl_drops = 0;
        std::uint64_t control_in = 0;
        std::uint64_t control_out = 0;
        std::uint64_t packets_fwd = 0;
        std::uint64_t packets_dropped = 0;
        std::uint64_t packets_delivered = 0;
        std::uint64_t external_pkts = 0;
        std::uint64_t solicits_sent = 0;
    };

    /// Edge or border router of the fabric.
    ///
    /// A pure state machine: every entry point takes the current simulated
    /// time and appends the resulting actions. Edges resolve destinations on
    /// demand into a map-cache and default-route to their border meanwhile;
    /// borders hold a FIB synchronized from the routing server. Both enforce
    /// group policy on egress with an exact-match (src group, dst group) ACL
    /// that only carries rules for locally attached destination groups.
    class Router
    {
    public:
        explicit Router(RouterConfig config);

        const RouterConfig &config() const noexcept { return cfg_; }
        UnderlayAddr locator() const noexcept { return cfg_.locator; }
        RouterRole role() const noexcept { return cfg_.role; }
        bool is_down() const noexcept { return down_; }

        // ---- onboarding and attachment ----

        /// Endpoint seen on port: authenticate, install rules, obtain an
        /// address, register. A known endpoint on a new port re-runs the same
        /// sequence, which refreshes its registration.
        void onboard(const AttachInfo &info, PortId port, SimTime now, Actions &out, CauseId cause = 0);

        /// Same sequence triggered by an endpoint arriving from another edge.
        void detect_roam(const AttachInfo &info, PortId new_port, SimTime now, Actions &out, CauseId cause)
        {
            onboard(info, new_port, now, out, cause);
        }

        /// DHCP stub answer for an endpoint in the RulesInstalled phase.
        void on_address_allocated(EndpointId id, const OverlayAddr &ipv4, SimTime now, Actions &out);

        /// Endpoint left its port. Registered mappings are withdrawn after
        /// departure_grace unless the routing server reports a move first.
        void detach(EndpointId id, SimTime now, Actions &out);

        void on_timer(std::uint64_t tag, SimTime now, Actions &out);

        // ---- data plane ----

        /// Frame from a locally attached endpoint.
        void handle_outbound(PortId port, const OverlayFrame &frame, SimTime now, Actions &out);

        /// Encapsulated packet addressed to this router.
        void handle_inbound(const EncapPacket &pkt, SimTime now, Actions &out);

        // ---- control plane ----

        void handle_control(const ControlMessage &msg, SimTime now, Actions &out);

        /// Re-resolve stale mappings for key (solicit from the routing server or a peer).
        void handle_solicit(const std::vector<MappingKey> &keys, SimTime now, Actions &out, CauseId cause = 0);

        void underlay_route_change(UnderlayAddr peer, bool reachable, SimTime now);

        /// Clears all overlay state and stays down until restart(). Returns the
        /// number of parked frames that were lost.
        std::size_t reboot(SimTime now);
        void restart(SimTime now);

        // ---- inspection ----

        /// Local VRF host entries + live map-cache entries (edge), or
        /// synchronized/pushed FIB + external prefixes + local entries.
        std::size_t fib_entries(SimTime now) const;
        std::size_t local_entry_count() const noexcept { return vrf_.size(); }
        std::size_t acl_rule_count() const noexcept { return acl_.size(); }
        /// Frames parked in the L2 gateway awaiting resolution.
        std::size_t held_frames() const noexcept { return arp_pending_.size(); }
        /// Distinct (vn, group) pairs with a locally attached endpoint.
        std::vector<std::pair<Vn, GroupId>> local_groups() const;
        std::optional<GroupId> local_group_of(const MappingKey &key) const;
        std::optional<OnboardPhase> phase_of(EndpointId id) const;
        bool is_unreachable(UnderlayAddr peer) const { return unreachable_.contains(peer); }

        MapCache &map_cache() noexcept { return cache_; }
        const MapCache &map_cache() const noexcept { return cache_; }
        const SyncedFib &synced_fib() const noexcept { return synced_; }
        const KeyedTries<MappingEntry> &proactive_fib() const noexcept { return proactive_fib_; }
        const RouterCounters &counters() const noexcept { return counters_; }

        /// Prefix that exits the fabric at a border.
        void add_external_prefix(const OverlayAddr &prefix);

        /// Exact-match ACL row for (vn, src, dst), if one is installed.
        std::optional<Action> acl_lookup(Vn vn, GroupId src, GroupId dst) const;

    private:
        struct LocalEndpoint
        {
            EndpointId id = 0;
            PortId port = 0;
            AttachInfo attach;
            OnboardPhase phase = OnboardPhase::Detected;
            Vn vn;
            GroupId group;
            std::vector<OverlayAddr> addrs;
            CauseId cause = 0;
            bool rules_held = false;
        };

        struct VrfEntry
        {
            PortId port = 0;
            GroupId group;
            EndpointId endpoint = 0;
        };

        struct Tombstone
        {
            std::vector<MappingKey> keys;
            SimTime expires = 0;
        };

        struct ArpTransaction
        {
            PortId port = 0;
            OverlayFrame frame;
            Vn vn;
            GroupId group;
            bool awaiting_locator = false;
            OverlayAddr target_mac;
        };

        using AclKey = std::tuple<std::uint32_t, std::uint16_t, std::uint16_t>; // vn, dst, src
        using GroupKey = std::pair<std::uint32_t, std::uint16_t>;               // vn, group

        void set_phase(LocalEndpoint &ep, OnboardPhase phase, Actions &out);
        void remove_local(EndpointId id, bool leave_tombstone, SimTime now, Actions &out);
        void install_rules(Vn vn, GroupId dst, const std::vector<ConnectivityRule> &rules);
        void retain_group(Vn vn, GroupId g, const std::vector<ConnectivityRule> &rules);
        void release_group(Vn vn, GroupId g);

        void send_control(UnderlayAddr to, ControlBody body, CauseId cause, Actions &out);
        void send_map_request(std::vector<MappingKey> keys, CauseId cause, Actions &out, bool want_l2 = false);
        void transmit(const EncapPacket &pkt, Actions &out);
        void drop(PacketId id, std::uint32_t flow, DropReason why, Actions &out);

        void egress(const EncapPacket &pkt, const VrfEntry &local, Actions &out);
        void route_overlay(const EncapPacket &pkt, const MappingKey &dst, SimTime now, Actions &out);
        void forward_via_border(const EncapPacket &pkt, Actions &out);
        void border_forward(const EncapPacket &pkt, const MappingKey &dst, Actions &out);
        void edge_inbound_miss(const EncapPacket &pkt, const MappingKey &dst, SimTime now, Actions &out);

        void arp_request(PortId port, const LocalEndpoint &src, const OverlayFrame &frame, SimTime now,
                         Actions &out);
        bool arp_reply(const ControlMessage &msg, SimTime now, Actions &out);
        void arp_send(ArpTransaction &tx, UnderlayAddr locator, Actions &out);

        void on_map_reply(const MapReplyBody &reply, CauseId cause, SimTime now);
        void on_negative(const NegativeMapReplyBody &neg, SimTime now);
        void on_auth_reply(const AuthReplyBody &reply, SimTime now, Actions &out);
        void on_rule_download(const RuleDownloadBody &body);
        void on_push(const ProactivePushBody &push);

        const VrfEntry *vrf_find(const MappingKey &key) const;
        bool is_border(UnderlayAddr a) const;
        void clear_tombstone(const MappingKey &key);
        void solicit_sender(UnderlayAddr sender, const MappingKey &key, CauseId cause, Actions &out);
        const LocalEndpoint *bound_endpoint(PortId port) const;

        RouterConfig cfg_;
        bool down_ = false;

        std::unordered_map<EndpointId, LocalEndpoint> endpoints_;
        std::unordered_map<PortId, EndpointId> ports_;
        std::unordered_map<MappingKey, VrfEntry, MappingKeyHash> vrf_;
        std::map<AclKey, Action> acl_;
        std::map<GroupKey, unsigned> group_refs_;

        MapCache cache_;
        std::unordered_map<EndpointId, Tombstone> tombstones_;
        std::unordered_map<MappingKey, EndpointId, MappingKeyHash> tombstoned_keys_;
        std::map<std::pair<UnderlayAddr, MappingKey>, SimTime> solicit_holddown_;
        std::unordered_set<UnderlayAddr> unreachable_;
        std::unordered_map<CauseId, ArpTransaction> arp_pending_;

        SyncedFib synced_;
        KeyedTries<OverlayAddr> external_;
        KeyedTries<MappingEntry> proactive_fib_;
        std::unordered_map<MappingKey, std::uint64_t, MappingKeyHash> proactive_versions_;
        std::size_t proactive_remote_ = 0;

        RouterCounters counters_;
    };
}
