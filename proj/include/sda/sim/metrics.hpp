#pragma once

#include "sda/core/control.hpp"
#include "sda/router/router.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace sda
{
    struct RouterInfo
    {
        std::string name;
        RouterRole role = RouterRole::Edge;
    };

    struct FibSample
    {
        SimTime time = 0;
        std::uint32_t router = 0;
        std::uint64_t entries = 0;
    };

    struct HandoverSample
    {
        EndpointId endpoint = 0;
        SimTime detach = 0;
        SimTime restore = 0;

        SimTime delay() const noexcept { return restore - detach; }
    };

    /// Control messages emitted during one sampling interval, by kind.
    struct ControlSample
    {
        SimTime time = 0;
        KindCounts counts{};
    };

    /// ACL activity of one router during one sampling interval.
    struct DropSample
    {
        SimTime time = 0;
        std::uint32_t router = 0;
        std::uint64_t acl_hits = 0;
        std::uint64_t acl_drops = 0;
    };

    /// One watched mobility event, as observed from outside the routers.
    struct MoveRecord
    {
        CauseId cause = 0;
        EndpointId endpoint = 0;
        std::uint32_t old_router = 0;
        std::uint32_t new_router = 0;
        SimTime detach = 0;
        std::optional<SimTime> restore;
        /// When the old edge handled the reply carrying the new location.
        std::optional<SimTime> old_edge_pulled;
        /// Non-border routers whose packets for the mover reached the old edge
        /// after it learned the new location.
        std::vector<std::uint32_t> stale_senders;
        /// Control messages tagged with this move, by kind.
        KindCounts signaling{};
        bool timed_out = false;
    };

    /// Observation order of the three onboarding milestones of one attempt.
    /// Zero means the milestone was not observed.
    struct OnboardTrace
    {
        EndpointId endpoint = 0;
        std::uint32_t router = 0;
        std::uint64_t auth_request = 0;
        std::uint64_t address = 0;
        std::uint64_t registration = 0;
    };

    enum class ArpTarget : std::uint8_t
    {
        Remote,
        Local,
        Unknown,
    };

    struct ArpRecord
    {
        PacketId frame = 0;
        ArpTarget target = ArpTarget::Remote;
        /// MapRequests sent for this frame.
        unsigned lookups = 0;
        unsigned unicast_packets = 0;
        bool delivered = false;
        bool dropped = false;
    };

    struct Conservation
    {
        std::uint64_t injected = 0;
        std::uint64_t delivered = 0;
        std::uint64_t external = 0;
        std::array<std::uint64_t, kDropReasonCount> dropped{};
        std::uint64_t in_flight = 0;
        /// Frames parked in a router (ARP awaiting resolution).
        std::uint64_t held = 0;

        std::uint64_t dropped_total() const noexcept
        {
            std::uint64_t n = 0;
            for (auto d : dropped)
                n += d;
            return n;
        }
        bool balanced() const noexcept { return injected == delivered + external + dropped_total() + in_flight + held; }
    };

    /// Re-registration after a reboot to the next delivery to that endpoint.
    struct LossWindow
    {
        EndpointId endpoint = 0;
        SimTime registered = 0;
        std::optional<SimTime> first_delivery;
    };

    struct LoopStats
    {
        /// Most transmissions of one packet between a rebooted router and a border.
        unsigned max_crossings = 0;
        /// Packets that crossed such a pair more than twice.
        std::uint64_t looping_packets = 0;
        /// Most underlay transmissions of any single packet.
        unsigned max_hops = 0;
        std::vector<LossWindow> loss_windows;
    };

    struct MetricsSeries
    {
        std::string scenario;
        ControlPlaneMode mode = ControlPlaneMode::Reactive;
        double timescale = 1;
        SimTime duration = 0;
        SimTime sampling_interval = 0;
        std::vector<RouterInfo> routers;

        std::vector<FibSample> fib;
        std::vector<HandoverSample> handovers;
        std::uint64_t handover_timeouts = 0;
        std::vector<ControlSample> control;
        std::vector<DropSample> drops;

        std::vector<MoveRecord> moves;
        std::vector<OnboardTrace> onboardings;
        std::vector<ArpRecord> arps;
        std::uint64_t underlay_broadcasts = 0;
        Conservation conservation;
        LoopStats loops;
        KindCounts control_total{};

        std::uint64_t events = 0;
        bool aborted = false;
        std::string abort_reason;
    };
}
