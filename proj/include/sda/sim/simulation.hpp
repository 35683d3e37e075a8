#pragma once

#include "sda/policy/policy_server.hpp"
#include "sda/proactive/route_reflector.hpp"
#include "sda/router/router.hpp"
#include "sda/routing/routing_server.hpp"
#include "sda/sim/event_queue.hpp"
#include "sda/sim/metrics.hpp"
#include "sda/sim/rng.hpp"
#include "sda/sim/scenario.hpp"

#include <map>
#include <memory>
#include <unordered_map>
#include <unordered_set>

namespace sda
{
    class Simulation;

    /// A traffic (and possibly mobility) model. Generators only act through
    /// the Simulation API and their own ticks.
    class TrafficGenerator
    {
    public:
        virtual ~TrafficGenerator() = default;
        virtual void start(Simulation &sim) = 0;
        virtual void on_tick(Simulation &sim, std::uint64_t tag) = 0;
        virtual void on_delivered(Simulation &, std::uint32_t flow, std::uint32_t router, EndpointId endpoint)
        {
            (void)flow, (void)router, (void)endpoint;
        }
        virtual void on_dropped(Simulation &, std::uint32_t flow, DropReason reason) { (void)flow, (void)reason; }
    };

    std::unique_ptr<TrafficGenerator> make_generator(const TrafficSpec &spec, std::size_t index);

    enum class RngRole : std::uint64_t
    {
        Traffic = 1,
        Mobility = 2,
        ProactiveOrder = 3,
        Presence = 4,
        Placement = 5,
    };

    /// Everything the harness knows about one endpoint.
    struct EndpointState
    {
        EndpointId id = 0;
        std::uint32_t block = 0;
        Vn vn;
        GroupId group;
        std::optional<OverlayAddr> mac;
        std::optional<OverlayAddr> ipv6;
        /// DHCP lease, stable for the whole run once allocated.
        std::optional<OverlayAddr> ipv4;
        /// Router it is physically attached to, -1 when away.
        std::int32_t router = -1;
        PortId port = 0;
        bool bad_credentials = false;
    };

    /// One deterministic run of a scenario.
    class Simulation
    {
    public:
        /// The scenario must already be validated.
        explicit Simulation(Scenario scenario);
        ~Simulation();

        Simulation(const Simulation &) = delete;
        Simulation &operator=(const Simulation &) = delete;

        MetricsSeries run();

        /// Extra generator next to the scenario's own; call before run().
        /// Returns its index, the `generator` argument of schedule_tick.
        std::size_t add_generator(std::unique_ptr<TrafficGenerator> gen);

        // ---- generator API ----

        const Scenario &scenario() const noexcept { return sc_; }
        SimTime now() const noexcept { return now_; }
        SimTime end_time() const noexcept { return end_; }
        Rng &rng(RngRole role) { return rngs_.at(static_cast<std::size_t>(role)); }
        /// Traffic generator i gets its own stream.
        Rng &generator_rng(std::size_t i) { return gen_rngs_.at(i); }

        void schedule_tick(std::size_t generator, SimTime at, std::uint64_t tag);

        /// Unicast frame from src to dst's IPv4 address. Returns the packet id,
        /// or 0 when src is not attached or dst has no address yet.
        PacketId send(EndpointId src, EndpointId dst, std::uint32_t flow, std::uint32_t payload);
        PacketId send_to(EndpointId src, const OverlayAddr &dst, std::uint32_t flow, std::uint32_t payload);
        PacketId send_arp(EndpointId src, const OverlayAddr &target, std::uint32_t flow, ArpTarget kind);
        PacketId send_broadcast(EndpointId src, std::uint32_t flow);
        /// Flow id carried by packets of generator `generator`; callbacks get `local` back.
        static std::uint32_t flow_id(std::size_t generator, std::uint32_t local);
        /// An address inside vn's pool that is never leased.
        std::optional<OverlayAddr> unknown_address(Vn vn) const;

        /// Detach now and reattach at new_router after the configured gap.
        /// A watched move produces a handover sample or a timeout.
        CauseId move(EndpointId id, std::uint32_t new_router, bool watch, SimTime timeout);
        void attach(EndpointId id, std::uint32_t router, CauseId cause = 0);
        void detach(EndpointId id);

        const std::vector<EndpointState> &endpoints() const noexcept { return endpoints_; }
        const EndpointState &endpoint(EndpointId id) const { return endpoints_.at(id); }
        /// Endpoint ids of a block, in declaration order.
        const std::vector<EndpointId> &block_members(std::uint32_t block) const { return blocks_.at(block); }
        std::optional<std::uint32_t> block_index(const std::string &name) const;
        /// "<block>:<n>"
        std::optional<EndpointId> resolve_endpoint(const std::string &ref) const;

        /// Attached endpoints overall and per router (unordered).
        const std::vector<EndpointId> &attached() const noexcept { return attached_.items; }
        const std::vector<EndpointId> &attached_at(std::uint32_t router) const { return per_router_.at(router).items; }
        bool is_registered(EndpointId id) const;

        std::uint32_t edge_count() const noexcept { return sc_.topology.edge_count; }
        std::uint32_t router_count() const noexcept { return static_cast<std::uint32_t>(routers_.size()); }
        Router &router(std::uint32_t i) { return *routers_.at(i); }
        const Router &router(std::uint32_t i) const { return *routers_.at(i); }
        std::optional<std::uint32_t> router_index(const std::string &name) const;
        const std::string &router_name(std::uint32_t i) const { return info_.at(i).name; }

        RoutingServer &routing_server() noexcept { return rs_; }
        PolicyServer &policy_server() noexcept { return ps_; }
        RouteReflector *reflector() noexcept { return reflector_.get(); }

        /// Metrics collected so far (complete after run()).
        const MetricsSeries &metrics() const noexcept { return m_; }

    private:
        struct EvFrame
        {
            std::uint32_t router;
            PortId port;
            OverlayFrame frame;
        };
        struct EvPacket
        {
            std::uint32_t router;
            EncapPacket pkt;
        };
        struct EvControl
        {
            UnderlayAddr to;
            ControlMessage msg;
        };
        struct EvTimer
        {
            std::uint32_t router;
            std::uint64_t tag;
        };
        struct EvDhcp
        {
            std::uint32_t router;
            EndpointId endpoint;
        };
        struct EvAttach
        {
            EndpointId endpoint;
            std::uint32_t router;
            CauseId cause;
        };
        struct EvTick
        {
            std::size_t generator;
            std::uint64_t tag;
        };
        struct EvReboot
        {
            std::uint32_t router;
            SimTime down_for;
        };
        struct EvRestart
        {
            std::uint32_t router;
        };
        struct EvRedetect
        {
            std::uint32_t router;
        };
        struct EvSample
        {
        };
        struct EvPolicy
        {
            std::size_t index;
        };
        struct EvReassign
        {
            std::size_t index;
        };
        struct EvPresence
        {
            EndpointId endpoint;
            bool arrive;
            std::int64_t day;
        };
        struct EvHandoverTimeout
        {
            std::size_t move;
        };

        using Event = std::variant<EvFrame, EvPacket, EvControl, EvTimer, EvDhcp, EvAttach, EvTick, EvReboot,
                                   EvRestart, EvRedetect, EvSample, EvPolicy, EvReassign, EvPresence,
                                   EvHandoverTimeout>;

        struct NodeRef
        {
            enum Kind : std::uint8_t
            {
                RouterNode,
                RoutingServerNode,
                PolicyServerNode,
                ReflectorNode,
            } kind;
            std::uint32_t index = 0;
        };

        /// Unordered id set with O(1) insert/erase.
        struct IdSet
        {
            std::vector<EndpointId> items;
            std::unordered_map<EndpointId, std::size_t> pos;
            void insert(EndpointId id);
            void erase(EndpointId id);
        };

        void build();
        void dispatch(Event &ev);
        void schedule(SimTime at, Event ev) { queue_.push(at, std::move(ev)); }

        void apply_router_actions(std::uint32_t r, Actions &acts);
        void emit_control(UnderlayAddr from, const ControlOut &co, SimTime at);
        void emit_control_list(UnderlayAddr from, std::vector<ControlOut> &outs);
        void observe_control(UnderlayAddr from, const ControlOut &co);
        void deliver_control(EvControl &ev);
        void transmit_packet(std::uint32_t from, const EncapPacket &pkt);
        void arrive_packet(EvPacket &ev);
        void observe_pull(std::uint32_t r, const ControlMessage &msg);
        void observe_stale_sender(std::uint32_t r, const EncapPacket &pkt);
        static std::uint64_t pull_key(std::uint32_t r, EndpointId id) { return (std::uint64_t{r} << 32) | id; }
        void inject(std::uint32_t router, PortId port, const OverlayFrame &frame);
        void on_delivered(std::uint32_t r, const DeliverLocal &d);
        void on_dropped(PacketId id, std::uint32_t flow, DropReason why);
        void handle_dhcp(const EvDhcp &ev);
        void handle_attach(const EvAttach &ev);
        void handle_reboot(const EvReboot &ev);
        void handle_restart(const EvRestart &ev);
        void handle_redetect(const EvRedetect &ev);
        void handle_presence(const EvPresence &ev);
        void schedule_arrival(EndpointId id, std::int64_t from_day);
        void take_sample();
        SimTime processing_delay(const NodeRef &n, bool control) const;
        AttachInfo attach_info(const EndpointState &ep) const;
        std::uint64_t next_observation() { return ++observation_; }

        Scenario sc_;
        SimTime now_ = 0;
        SimTime end_ = 0;
        EventQueue<Event> queue_;
        MetricsSeries m_;

        std::vector<std::unique_ptr<Router>> routers_;
        std::vector<RouterInfo> info_;
        std::unordered_map<UnderlayAddr, NodeRef> nodes_;
        RoutingServer rs_;
        PolicyServer ps_;
        std::unique_ptr<RouteReflector> reflector_;
        std::vector<bool> down_;

        std::vector<EndpointState> endpoints_;
        std::vector<std::vector<EndpointId>> blocks_;
        std::vector<std::uint32_t> home_router_;
        IdSet attached_;
        std::vector<IdSet> per_router_;
        std::vector<PortId> next_port_;
        std::map<std::uint32_t, std::pair<std::uint32_t, std::uint32_t>> pools_; // vn -> (next, last)
        std::unordered_map<std::uint32_t, EndpointId> lease_owner_;               // ipv4 -> endpoint

        std::vector<Rng> rngs_;
        std::vector<Rng> gen_rngs_;
        std::vector<std::unique_ptr<TrafficGenerator>> generators_;

        PacketId next_packet_ = 1;
        CauseId next_move_cause_ = CauseId{1} << 62;

        // observation state
        std::uint64_t observation_ = 0;
        std::unordered_map<EndpointId, std::size_t> open_onboard_;
        std::unordered_map<CauseId, std::size_t> move_by_cause_;
        std::unordered_map<EndpointId, std::size_t> pending_move_;
        // every watched move per endpoint
        std::unordered_map<EndpointId, std::vector<std::size_t>> watch_;
        // (router, mover) -> move whose reply last taught the router the mover's location
        struct Pull
        {
            std::size_t move = 0;
            UnderlayAddr locator;
            SimTime at = 0;
        };
        std::unordered_map<std::uint64_t, Pull> pulled_;
        std::unordered_map<PacketId, std::size_t> arp_by_frame_;
        KindCounts interval_counts_{};
        std::vector<RouterCounters> last_counters_;

        // reboot observation: watched router pairs and per-packet counters
        std::unordered_set<std::uint64_t> watched_pairs_;
        std::unordered_map<PacketId, std::pair<unsigned, unsigned>> packet_hops_; // (crossings, hops)
        std::unordered_map<EndpointId, std::size_t> open_loss_window_;
        std::unordered_set<std::uint32_t> rebooted_;
    };
}
