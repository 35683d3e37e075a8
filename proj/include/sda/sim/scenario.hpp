#pragma once

#include "sda/policy/policy_server.hpp"
#include "sda/router/router.hpp"

#include <string>
#include <vector>

namespace sda
{
    struct TopologyConfig
    {
        unsigned edge_count = 1;
        unsigned border_count = 1;
        SimTime link_delay_us = 50;
        /// Processing latency of a control message at its receiver.
        SimTime control_delay_us = 500;
        /// AuthRequest sent to AuthReply handled, as seen by the edge.
        SimTime auth_rtt_us = 2000;
        SimTime dhcp_delay_us = 1000;
        SimTime edge_processing_us = 10;
        SimTime border_processing_us = 2;
        /// Gap between a router restart and its endpoints being detected again.
        SimTime redetect_delay_us = 1000;
        /// Prefixes reachable through the borders' external exit.
        std::vector<std::string> external_prefixes;
    };

    /// Router behavior shared by every edge and border.
    struct RouterParams
    {
        double map_cache_ttl_s = 24 * 3600;
        double negative_ttl_s = 60;
        unsigned negative_retries = 3;
        SimTime resolve_timeout_us = 1000000;
        double departure_grace_s = 5;
        SimTime solicit_holddown_us = 1000000;
        bool underlay_tracking = true;
        bool unknown_solicit = true;
        unsigned initial_ttl = kInitialTtl;
    };

    struct VnDecl
    {
        std::uint32_t id = 0;
        std::string name;
        /// Address pool the DHCP stub allocates from, e.g. "10.1.0.0/16".
        std::string pool;
    };

    struct GroupDecl
    {
        std::uint16_t id = 0;
        std::string name;
    };

    enum class Placement : std::uint8_t
    {
        Spread,  ///< round-robin over edges
        Edge,    ///< all on edge `index`
        Border,  ///< all on border `index`
    };

    enum class Presence : std::uint8_t
    {
        Always,
        Diurnal,
    };

    struct EndpointBlock
    {
        std::string name;
        unsigned count = 0;
        std::uint32_t vn = 0;
        std::uint16_t group = 0;
        Placement placement = Placement::Spread;
        unsigned index = 0;
        bool ipv6 = false;
        bool mac = true;
        Presence presence = Presence::Always;
        /// Endpoints present a wrong credential and end up quarantined.
        bool bad_credentials = false;
    };

    struct RuleDecl
    {
        std::uint32_t vn = 0;
        std::uint16_t src = 0;
        std::uint16_t dst = 0;
        Action action = Action::Deny;
    };

    struct PolicyUpdateDecl
    {
        double at_s = 0;
        MatrixChange::Op op = MatrixChange::Op::Flip;
        RuleDecl rule;
    };

    struct ReassignDecl
    {
        double at_s = 0;
        /// "<block>:<n>", the n-th endpoint of a block.
        std::string endpoint;
        std::uint16_t group = 0;
    };

    struct PolicyConfig
    {
        Action default_action = Action::Deny;
        std::vector<RuleDecl> rules;
        std::vector<PolicyUpdateDecl> updates;
        std::vector<ReassignDecl> reassignments;
    };

    /// Calendar shape used by diurnal presence and traffic.
    struct DiurnalProfile
    {
        double day_start_h = 9;
        double day_end_h = 18;
        /// Days 0..workdays-1 of each week are working days.
        unsigned workdays = 5;
        /// Spread of arrival/departure times around the day bounds.
        double jitter_h = 1;
        /// Traffic multiplier outside working hours.
        double night_rate = 0.05;
    };

    enum class TrafficKind : std::uint8_t
    {
        Pairs,
        Handover,
        Diurnal,
        Backoff,
        Arp,
    };

    struct FlowDecl
    {
        std::string src;
        std::string dst;
        SimTime interval_us = 10000;
        double start_s = 0;
        double stop_s = -1;
    };

    /// One traffic generator. Only the fields of its kind are read.
    struct TrafficSpec
    {
        TrafficKind kind = TrafficKind::Pairs;
        std::uint32_t payload_bytes = 512;

        // pairs
        std::vector<FlowDecl> flows;

        // handover: one sender per move streams to the mover around the move
        SimTime interval_us = 5000;
        SimTime lead_us = 30000;
        SimTime timeout_us = 2000000;
        unsigned tail_packets = 2;

        // diurnal: Poisson flow arrivals per present endpoint
        double flows_per_hour = 6;
        unsigned packets_per_flow = 4;
        SimTime packet_gap_us = 20000;
        /// Probability the destination sits on the sender's own edge.
        double locality = 0.5;
        /// Probability the destination is one of the `popular` block.
        double popular = 0.3;
        std::string popular_block;

        // backoff: clients retry a denied destination k times, then give up
        std::string clients_block;
        std::vector<std::string> server_blocks;
        double attempts_per_second = 1;
        unsigned give_up_after = 3;
        double explore = 0.001;

        // arp: requests per second for remote, local and unknown targets
        double arp_per_second = 10;
        double arp_local = 0.2;
        double arp_unknown = 0.1;
        double arp_broadcast = 0.1;
        double stop_s = -1;
    };

    struct MobilityConfig
    {
        double moves_per_second = 0;
        double start_s = 1;
        /// Detach to attach gap at the new edge.
        SimTime reattach_delay_us = 0;
        /// Blocks whose endpoints may move; empty means all.
        std::vector<std::string> mover_blocks;
    };

    struct RebootDecl
    {
        std::string router; // "edge-3" or "border-0"
        double at_s = 0;
        double down_s = 1;
    };

    struct Scenario
    {
        std::string name = "unnamed";
        std::uint64_t seed = 1;
        ControlPlaneMode control_plane = ControlPlaneMode::Reactive;
        double duration_s = 10;
        double sampling_interval_s = 1;
        /// Calendar seconds per simulated second. Calendar quantities (durations,
        /// sampling, diurnal profile, flow rates, cache lifetimes) shrink by it;
        /// network and processing delays do not.
        double timescale = 1;
        std::size_t max_pending_events = 20000000;

        TopologyConfig topology;
        RouterParams router;
        std::vector<VnDecl> vns;
        std::vector<GroupDecl> groups;
        std::vector<EndpointBlock> endpoints;
        PolicyConfig policy;
        DiurnalProfile diurnal;
        std::vector<TrafficSpec> traffic;
        MobilityConfig mobility;
        std::vector<RebootDecl> reboots;

        /// Calendar seconds to simulated microseconds.
        SimTime calendar(double seconds) const
        {
            return static_cast<SimTime>(seconds * 1e6 / timescale + 0.5);
        }
    };
}
