#include "sda/sim/simulation.hpp"

#include <algorithm>
#include <cmath>

namespace sda
{
    namespace
    {
        constexpr std::uint32_t kEdgeBase = 0xAC100001;   // 172.16.0.1
        constexpr std::uint32_t kBorderBase = 0xAC1F0001; // 172.31.0.1
        const UnderlayAddr kRoutingServer{0xC0000201};    // 192.0.2.1
        const UnderlayAddr kPolicyServer{0xC0000202};
        const UnderlayAddr kReflector{0xC0000203};

        constexpr std::uint32_t kFlowShift = 24;
        constexpr double kDay = 86400;

        std::uint64_t pair_key(UnderlayAddr a, UnderlayAddr b)
        {
            auto lo = std::min(a.value(), b.value());
            auto hi = std::max(a.value(), b.value());
            return (std::uint64_t{hi} << 32) | lo;
        }
    }

    void Simulation::IdSet::insert(EndpointId id)
    {
        if (pos.contains(id))
            return;
        pos[id] = items.size();
        items.push_back(id);
    }

    void Simulation::IdSet::erase(EndpointId id)
    {
        auto it = pos.find(id);
        if (it == pos.end())
            return;
        const std::size_t i = it->second;
        pos.erase(it);
        if (i + 1 != items.size())
        {
            items[i] = items.back();
            pos[items[i]] = i;
        }
        items.pop_back();
    }

    Simulation::Simulation(Scenario scenario)
        : sc_(std::move(scenario)), queue_(sc_.max_pending_events), rs_(kRoutingServer),
          ps_(kPolicyServer, sc_.policy.default_action)
    {
        try
        {
            build();
        }
        catch (const std::length_error &e)
        {
            // initial attaches alone overflow the bound; run() returns at once
            m_.aborted = true;
            m_.abort_reason = e.what();
        }
    }

    Simulation::~Simulation() = default;

    // ---------------------------------------------------------------- construction

    void Simulation::build()
    {
        const TopologyConfig &topo = sc_.topology;
        end_ = sc_.calendar(sc_.duration_s);

        rngs_.resize(8);
        for (std::uint64_t r = 1; r < rngs_.size(); ++r)
            rngs_[r] = Rng(derive_seed(sc_.seed, r));

        m_.scenario = sc_.name;
        m_.mode = sc_.control_plane;
        m_.timescale = sc_.timescale;
        m_.duration = end_;
        m_.sampling_interval = sc_.calendar(sc_.sampling_interval_s);

        nodes_[kRoutingServer] = {NodeRef::RoutingServerNode, 0};
        nodes_[kPolicyServer] = {NodeRef::PolicyServerNode, 0};

        const bool proactive = sc_.control_plane == ControlPlaneMode::Proactive;
        std::vector<UnderlayAddr> borders;
        for (unsigned j = 0; j < topo.border_count; ++j)
            borders.emplace_back(kBorderBase + j);
        std::vector<UnderlayAddr> edges;
        for (unsigned i = 0; i < topo.edge_count; ++i)
            edges.emplace_back(kEdgeBase + i);

        auto base_config = [&](RouterRole role, UnderlayAddr loc) {
            RouterConfig c;
            c.role = role;
            c.mode = sc_.control_plane;
            c.locator = loc;
            c.mapping_server = proactive ? kReflector : kRoutingServer;
            c.policy_server = kPolicyServer;
            c.borders = borders;
            c.default_action = sc_.policy.default_action;
            c.initial_ttl = static_cast<std::uint8_t>(sc_.router.initial_ttl);
            c.cache.fresh_ttl = sc_.calendar(sc_.router.map_cache_ttl_s);
            c.cache.negative_ttl = sc_.calendar(sc_.router.negative_ttl_s);
            c.cache.negative_retries = sc_.router.negative_retries;
            c.cache.resolve_timeout = sc_.router.resolve_timeout_us;
            c.departure_grace = sc_.calendar(sc_.router.departure_grace_s);
            c.solicit_holddown = sc_.router.solicit_holddown_us;
            c.underlay_tracking = sc_.router.underlay_tracking;
            c.unknown_solicit = sc_.router.unknown_solicit;
            return c;
        };

        for (unsigned i = 0; i < topo.edge_count; ++i)
        {
            RouterConfig c = base_config(RouterRole::Edge, edges[i]);
            c.default_border = borders[i % borders.size()];
            routers_.push_back(std::make_unique<Router>(std::move(c)));
            info_.push_back({"edge-" + std::to_string(i), RouterRole::Edge});
        }
        for (unsigned j = 0; j < topo.border_count; ++j)
        {
            routers_.push_back(std::make_unique<Router>(base_config(RouterRole::Border, borders[j])));
            info_.push_back({"border-" + std::to_string(j), RouterRole::Border});
            for (const std::string &p : topo.external_prefixes)
                routers_.back()->add_external_prefix(OverlayAddr::parse(p));
        }
        for (std::uint32_t r = 0; r < routers_.size(); ++r)
            nodes_[routers_[r]->locator()] = {NodeRef::RouterNode, r};
        m_.routers = info_;
        down_.assign(routers_.size(), false);
        per_router_.resize(routers_.size());
        next_port_.assign(routers_.size(), 1);
        last_counters_.resize(routers_.size());

        if (proactive)
        {
            reflector_ = std::make_unique<RouteReflector>(
                kReflector, edges, topo.control_delay_us,
                derive_seed(sc_.seed, static_cast<std::uint64_t>(RngRole::ProactiveOrder)));
            nodes_[kReflector] = {NodeRef::ReflectorNode, 0};
        }
        else
        {
            for (UnderlayAddr b : borders)
            {
                std::vector<ControlOut> outs;
                rs_.subscribe(b, outs);
                emit_control_list(kRoutingServer, outs);
            }
        }

        for (const RuleDecl &r : sc_.policy.rules)
            ps_.load_rule({Vn(r.vn), GroupId(r.src), GroupId(r.dst), r.action});

        for (const VnDecl &v : sc_.vns)
        {
            const OverlayAddr pool = OverlayAddr::parse(v.pool);
            const std::uint32_t base = pool.ipv4_value();
            const std::uint64_t size = std::uint64_t{1} << (32 - pool.prefix_len());
            // network address, the reserved never-allocated address and broadcast are skipped
            pools_[v.id] = {base + 1, static_cast<std::uint32_t>(base + size - 3)};
        }

        // endpoints
        Rng &presence = rng(RngRole::Presence);
        const SimTime spread = std::max<SimTime>(1, std::min<SimTime>(kMicrosPerSecond, end_ / 4));
        std::uint32_t spread_next = 0;
        for (std::uint32_t b = 0; b < sc_.endpoints.size(); ++b)
        {
            const EndpointBlock &blk = sc_.endpoints[b];
            blocks_.emplace_back();
            for (unsigned n = 0; n < blk.count; ++n)
            {
                EndpointState ep;
                ep.id = static_cast<EndpointId>(endpoints_.size());
                ep.block = b;
                ep.vn = Vn(blk.vn);
                ep.group = GroupId(blk.group);
                ep.bad_credentials = blk.bad_credentials;
                if (blk.mac)
                    ep.mac = OverlayAddr::mac(0x020000000000ull | (ep.id + 1));
                if (blk.ipv6)
                {
                    OverlayAddr::Bytes bytes{};
                    bytes[0] = 0xfd;
                    for (int k = 0; k < 4; ++k)
                    {
                        bytes[4 + k] = static_cast<std::uint8_t>(blk.vn >> (24 - 8 * k));
                        bytes[12 + k] = static_cast<std::uint8_t>((ep.id + 1) >> (24 - 8 * k));
                    }
                    ep.ipv6 = OverlayAddr::ipv6(bytes);
                }
                std::uint32_t home = 0;
                switch (blk.placement)
                {
                case Placement::Spread:
                    home = spread_next++ % topo.edge_count;
                    break;
                case Placement::Edge:
                    home = blk.index;
                    break;
                case Placement::Border:
                    home = topo.edge_count + blk.index;
                    break;
                }
                home_router_.push_back(home);

                EndpointRecord rec;
                rec.endpoint_id = ep.id;
                rec.auth_token = "tok-" + std::to_string(ep.id);
                rec.vn = ep.vn;
                rec.group = ep.group;
                if (ep.ipv6)
                    rec.addrs.push_back(*ep.ipv6);
                if (ep.mac)
                    rec.addrs.push_back(*ep.mac);
                ps_.add_endpoint(rec);

                blocks_.back().push_back(ep.id);
                endpoints_.push_back(ep);

                if (blk.presence == Presence::Always)
                {
                    const SimTime at = static_cast<SimTime>(presence.index(static_cast<std::uint64_t>(spread)));
                    schedule(at, EvAttach{ep.id, home, 0});
                }
                else
                {
                    schedule_arrival(ep.id, 0);
                }
            }
        }

        for (const RebootDecl &rb : sc_.reboots)
        {
            const std::uint32_t r = *router_index(rb.router);
            for (std::uint32_t j = topo.edge_count; j < routers_.size(); ++j)
            {
                if (j != r)
                    watched_pairs_.insert(pair_key(routers_[r]->locator(), routers_[j]->locator()));
            }
            schedule(sc_.calendar(rb.at_s), EvReboot{r, sc_.calendar(rb.down_s)});
        }
        for (std::size_t i = 0; i < sc_.policy.updates.size(); ++i)
            schedule(sc_.calendar(sc_.policy.updates[i].at_s), EvPolicy{i});
        for (std::size_t i = 0; i < sc_.policy.reassignments.size(); ++i)
            schedule(sc_.calendar(sc_.policy.reassignments[i].at_s), EvReassign{i});

        if (m_.sampling_interval > 0)
        {
            for (SimTime t = m_.sampling_interval; t <= end_; t += m_.sampling_interval)
                schedule(t, EvSample{});
        }

        const std::uint64_t traffic_seed = derive_seed(sc_.seed, static_cast<std::uint64_t>(RngRole::Traffic));
        for (std::size_t i = 0; i < sc_.traffic.size(); ++i)
        {
            generators_.push_back(make_generator(sc_.traffic[i], i));
            gen_rngs_.emplace_back(derive_seed(traffic_seed, i));
        }
    }

    std::size_t Simulation::add_generator(std::unique_ptr<TrafficGenerator> gen)
    {
        const std::size_t i = generators_.size();
        const std::uint64_t traffic_seed = derive_seed(sc_.seed, static_cast<std::uint64_t>(RngRole::Traffic));
        generators_.push_back(std::move(gen));
        gen_rngs_.emplace_back(derive_seed(traffic_seed, i));
        return i;
    }

    // ---------------------------------------------------------------- lookup helpers

    std::optional<std::uint32_t> Simulation::router_index(const std::string &name) const
    {
        for (std::uint32_t i = 0; i < info_.size(); ++i)
        {
            if (info_[i].name == name)
                return i;
        }
        return std::nullopt;
    }

    std::optional<std::uint32_t> Simulation::block_index(const std::string &name) const
    {
        for (std::uint32_t b = 0; b < sc_.endpoints.size(); ++b)
        {
            if (sc_.endpoints[b].name == name)
                return b;
        }
        return std::nullopt;
    }

    std::optional<EndpointId> Simulation::resolve_endpoint(const std::string &ref) const
    {
        const auto colon = ref.rfind(':');
        if (colon == std::string::npos)
            return std::nullopt;
        auto b = block_index(ref.substr(0, colon));
        if (!b)
            return std::nullopt;
        try
        {
            const unsigned long n = std::stoul(ref.substr(colon + 1));
            if (n >= blocks_[*b].size())
                return std::nullopt;
            return blocks_[*b][n];
        }
        catch (const std::exception &)
        {
            return std::nullopt;
        }
    }

    bool Simulation::is_registered(EndpointId id) const
    {
        const EndpointState &ep = endpoints_.at(id);
        if (ep.router < 0 || down_[ep.router])
            return false;
        return routers_[ep.router]->phase_of(id) == OnboardPhase::Registered;
    }

    SimTime Simulation::processing_delay(const NodeRef &n, bool control) const
    {
        const TopologyConfig &t = sc_.topology;
        switch (n.kind)
        {
        case NodeRef::RouterNode:
            if (control)
                return t.control_delay_us;
            return routers_[n.index]->role() == RouterRole::Edge ? t.edge_processing_us : t.border_processing_us;
        case NodeRef::PolicyServerNode:
            // the whole auth round trip, as seen by the edge, is auth_rtt
            return std::max<SimTime>(0, t.auth_rtt_us - 2 * t.link_delay_us - t.control_delay_us);
        default:
            return t.control_delay_us;
        }
    }

    AttachInfo Simulation::attach_info(const EndpointState &ep) const
    {
        AttachInfo info;
        info.endpoint_id = ep.id;
        info.auth_token = ep.bad_credentials ? "invalid" : "tok-" + std::to_string(ep.id);
        info.mac = ep.mac;
        info.ipv6 = ep.ipv6;
        return info;
    }

    // ---------------------------------------------------------------- main loop

    MetricsSeries Simulation::run()
    {
        if (m_.aborted)
            return std::move(m_);
        try
        {
            for (auto &g : generators_)
                g->start(*this);
            while (!queue_.empty() && queue_.next_time() <= end_)
            {
                auto ev = queue_.pop();
                now_ = ev->time;
                dispatch(ev->payload);
                ++m_.events;
            }
            now_ = end_;
        }
        catch (const std::length_error &e)
        {
            m_.aborted = true;
            m_.abort_reason = e.what();
        }
        catch (const std::exception &e)
        {
            m_.aborted = true;
            m_.abort_reason = std::string("simulation error: ") + e.what();
        }
        m_.conservation.held = 0;
        for (const auto &r : routers_)
            m_.conservation.held += r->held_frames();
        return std::move(m_);
    }

    void Simulation::dispatch(Event &ev)
    {
        std::visit(
            [this](auto &e) {
                using T = std::decay_t<decltype(e)>;
                if constexpr (std::is_same_v<T, EvFrame>)
                {
                    inject(e.router, e.port, e.frame);
                }
                else if constexpr (std::is_same_v<T, EvPacket>)
                {
                    arrive_packet(e);
                }
                else if constexpr (std::is_same_v<T, EvControl>)
                {
                    deliver_control(e);
                }
                else if constexpr (std::is_same_v<T, EvTimer>)
                {
                    Actions acts;
                    routers_[e.router]->on_timer(e.tag, now_, acts);
                    apply_router_actions(e.router, acts);
                }
                else if constexpr (std::is_same_v<T, EvDhcp>)
                {
                    handle_dhcp(e);
                }
                else if constexpr (std::is_same_v<T, EvAttach>)
                {
                    handle_attach(e);
                }
                else if constexpr (std::is_same_v<T, EvTick>)
                {
                    generators_[e.generator]->on_tick(*this, e.tag);
                }
                else if constexpr (std::is_same_v<T, EvReboot>)
                {
                    handle_reboot(e);
                }
                else if constexpr (std::is_same_v<T, EvRestart>)
                {
                    handle_restart(e);
                }
                else if constexpr (std::is_same_v<T, EvRedetect>)
                {
                    handle_redetect(e);
                }
                else if constexpr (std::is_same_v<T, EvSample>)
                {
                    take_sample();
                }
                else if constexpr (std::is_same_v<T, EvPolicy>)
                {
                    const PolicyUpdateDecl &u = sc_.policy.updates[e.index];
                    MatrixChange ch;
                    ch.op = u.op;
                    ch.rule = {Vn(u.rule.vn), GroupId(u.rule.src), GroupId(u.rule.dst), u.rule.action};
                    std::vector<ControlOut> outs;
                    ps_.update_matrix(ch, outs);
                    emit_control_list(kPolicyServer, outs);
                }
                else if constexpr (std::is_same_v<T, EvReassign>)
                {
                    const ReassignDecl &d = sc_.policy.reassignments[e.index];
                    std::vector<ControlOut> outs;
                    ps_.reassign_group(*resolve_endpoint(d.endpoint), GroupId(d.group), outs);
                    emit_control_list(kPolicyServer, outs);
                }
                else if constexpr (std::is_same_v<T, EvPresence>)
                {
                    handle_presence(e);
                }
                else if constexpr (std::is_same_v<T, EvHandoverTimeout>)
                {
                    MoveRecord &mv = m_.moves[e.move];
                    if (!mv.restore)
                    {
                        mv.timed_out = true;
                        ++m_.handover_timeouts;
                        auto p = pending_move_.find(mv.endpoint);
                        if (p != pending_move_.end() && p->second == e.move)
                            pending_move_.erase(p);
                    }
                }
            },
            ev);
    }

    void Simulation::schedule_tick(std::size_t generator, SimTime at, std::uint64_t tag)
    {
        schedule(std::max(at, now_), EvTick{generator, tag});
    }

    // ---------------------------------------------------------------- router actions

    void Simulation::apply_router_actions(std::uint32_t r, Actions &acts)
    {
        const UnderlayAddr self = routers_[r]->locator();
        for (std::size_t i = 0; i < acts.size(); ++i)
        {
            std::visit(
                [&](auto &a) {
                    using T = std::decay_t<decltype(a)>;
                    if constexpr (std::is_same_v<T, ControlOut>)
                        emit_control(self, a, now_);
                    else if constexpr (std::is_same_v<T, SendPacket>)
                        transmit_packet(r, a.pkt);
                    else if constexpr (std::is_same_v<T, DeliverLocal>)
                        on_delivered(r, a);
                    else if constexpr (std::is_same_v<T, DropPacket>)
                        on_dropped(a.id, a.flow, a.reason);
                    else if constexpr (std::is_same_v<T, ExternalExit>)
                        ++m_.conservation.external;
                    else if constexpr (std::is_same_v<T, RequestAddress>)
                        schedule(now_ + sc_.topology.dhcp_delay_us, EvDhcp{r, a.endpoint});
                    else if constexpr (std::is_same_v<T, ArmTimer>)
                        schedule(std::max(a.at, now_), EvTimer{r, a.tag});
                    else if constexpr (std::is_same_v<T, SessionEnded>)
                        ps_.session_ended(a.endpoint, self);
                },
                acts[i]);
        }
    }

    void Simulation::emit_control_list(UnderlayAddr from, std::vector<ControlOut> &outs)
    {
        for (const ControlOut &co : outs)
            emit_control(from, co, now_);
    }

    void Simulation::emit_control(UnderlayAddr from, const ControlOut &co, SimTime at)
    {
        observe_control(from, co);
        auto it = nodes_.find(co.to);
        if (it == nodes_.end())
            return;
        const SimTime arrive = at + sc_.topology.link_delay_us + processing_delay(it->second, true);
        schedule(arrive, EvControl{co.to, co.msg});
    }

    void Simulation::observe_control(UnderlayAddr from, const ControlOut &co)
    {
        const MsgKind k = co.msg.kind();
        const auto ki = static_cast<std::size_t>(k);
        ++interval_counts_[ki];
        ++m_.control_total[ki];

        if (co.msg.cause != 0)
        {
            if (auto mv = move_by_cause_.find(co.msg.cause); mv != move_by_cause_.end())
                ++m_.moves[mv->second].signaling[ki];
            if (k == MsgKind::MapRequest)
            {
                if (auto a = arp_by_frame_.find(co.msg.cause); a != arp_by_frame_.end())
                    ++m_.arps[a->second].lookups;
            }
        }

        auto src = nodes_.find(from);
        if (src == nodes_.end() || src->second.kind != NodeRef::RouterNode)
            return;
        const std::uint32_t r = src->second.index;

        if (k == MsgKind::AuthRequest)
        {
            const EndpointId id = co.msg.as<AuthRequestBody>().endpoint_id;
            OnboardTrace t;
            t.endpoint = id;
            t.router = r;
            t.auth_request = next_observation();
            open_onboard_[id] = m_.onboardings.size();
            m_.onboardings.push_back(t);
        }
        else if (k == MsgKind::MapRegister)
        {
            const auto &reg = co.msg.as<MapRegisterBody>();
            if (reg.withdraw)
                return;
            for (const RegisterRecord &rec : reg.records)
            {
                if (rec.key.addr.family() != AddrFamily::IPv4)
                    continue;
                auto owner = lease_owner_.find(rec.key.addr.ipv4_value());
                if (owner == lease_owner_.end())
                    continue;
                const EndpointId id = owner->second;
                if (auto o = open_onboard_.find(id); o != open_onboard_.end())
                {
                    OnboardTrace &t = m_.onboardings[o->second];
                    if (t.router == r && t.registration == 0)
                        t.registration = next_observation();
                    open_onboard_.erase(o);
                }
                if (rebooted_.contains(r))
                {
                    open_loss_window_[id] = m_.loops.loss_windows.size();
                    m_.loops.loss_windows.push_back({id, now_, std::nullopt});
                }
            }
        }
    }

    void Simulation::deliver_control(EvControl &ev)
    {
        auto it = nodes_.find(ev.to);
        if (it == nodes_.end())
            return;
        const NodeRef n = it->second;
        switch (n.kind)
        {
        case NodeRef::RouterNode:
        {
            if (down_[n.index])
                return;
            if (!watch_.empty())
                observe_pull(n.index, ev.msg);
            Actions acts;
            routers_[n.index]->handle_control(ev.msg, now_, acts);
            apply_router_actions(n.index, acts);
            break;
        }
        case NodeRef::RoutingServerNode:
        {
            std::vector<ControlOut> outs;
            rs_.handle(ev.msg, now_, outs);
            emit_control_list(kRoutingServer, outs);
            break;
        }
        case NodeRef::PolicyServerNode:
        {
            std::vector<ControlOut> outs;
            ps_.handle(ev.msg, outs);
            emit_control_list(kPolicyServer, outs);
            break;
        }
        case NodeRef::ReflectorNode:
        {
            std::vector<TimedControl> outs;
            reflector_->handle(ev.msg, now_, outs);
            for (const TimedControl &tc : outs)
                emit_control(kReflector, tc.out, tc.at);
            break;
        }
        }
    }

    // ---------------------------------------------------------------- data plane

    void Simulation::transmit_packet(std::uint32_t from, const EncapPacket &pkt)
    {
        ++m_.conservation.in_flight;
        if (pkt.inner_dst.is_broadcast_mac())
            ++m_.underlay_broadcasts;
        if (!arp_by_frame_.empty())
        {
            if (auto a = arp_by_frame_.find(pkt.id); a != arp_by_frame_.end())
                ++m_.arps[a->second].unicast_packets;
        }
        const unsigned hops = static_cast<unsigned>(sc_.router.initial_ttl - pkt.ttl) + 1;
        m_.loops.max_hops = std::max(m_.loops.max_hops, hops);
        if (!watched_pairs_.empty() && watched_pairs_.contains(pair_key(routers_[from]->locator(), pkt.outer_dst)))
        {
            unsigned &c = packet_hops_[pkt.id].first;
            ++c;
            m_.loops.max_crossings = std::max(m_.loops.max_crossings, c);
            if (c == 3)
                ++m_.loops.looping_packets;
        }

        auto it = nodes_.find(pkt.outer_dst);
        if (it == nodes_.end() || it->second.kind != NodeRef::RouterNode)
        {
            --m_.conservation.in_flight;
            on_dropped(pkt.id, pkt.flow, DropReason::NoRoute);
            return;
        }
        const SimTime arrive = now_ + sc_.topology.link_delay_us + processing_delay(it->second, false);
        schedule(arrive, EvPacket{it->second.index, pkt});
    }

    void Simulation::arrive_packet(EvPacket &ev)
    {
        --m_.conservation.in_flight;
        const std::uint32_t r = ev.router;
        if (down_[r])
        {
            // the underlay no longer announces this locator
            on_dropped(ev.pkt.id, ev.pkt.flow, DropReason::Unreachable);
            return;
        }

        if (!pulled_.empty() && ev.pkt.inner_dst.family() == AddrFamily::IPv4)
            observe_stale_sender(r, ev.pkt);

        Actions acts;
        routers_[r]->handle_inbound(ev.pkt, now_, acts);
        apply_router_actions(r, acts);
    }

    void Simulation::observe_pull(std::uint32_t r, const ControlMessage &msg)
    {
        // which move, if any, the router's entry for a mover was last learned under
        auto watched = [&](const MappingKey &k) -> std::optional<EndpointId> {
            if (k.addr.family() != AddrFamily::IPv4)
                return std::nullopt;
            auto owner = lease_owner_.find(k.addr.ipv4_value());
            if (owner == lease_owner_.end() || !watch_.contains(owner->second))
                return std::nullopt;
            const EndpointState &ep = endpoints_[owner->second];
            if (!ep.ipv4 || MappingKey{ep.vn, *ep.ipv4} != k)
                return std::nullopt;
            return owner->second;
        };
        if (msg.kind() == MsgKind::SolicitUpdate)
        {
            // the entry goes back to resolving; nothing is tagged until the reply
            for (const MappingKey &k : msg.as<SolicitUpdateBody>().keys)
            {
                if (auto id = watched(k))
                    pulled_.erase(pull_key(r, *id));
            }
            return;
        }
        if (msg.kind() != MsgKind::MapReply)
            return;
        const auto &reply = msg.as<MapReplyBody>();
        auto id = watched(reply.queried);
        if (!id)
            return;
        auto mv = move_by_cause_.find(msg.cause);
        if (msg.cause == 0 || mv == move_by_cause_.end() || m_.moves[mv->second].endpoint != *id)
        {
            pulled_.erase(pull_key(r, *id));
            return;
        }
        MoveRecord &rec = m_.moves[mv->second];
        if (r == rec.old_router && !rec.old_edge_pulled)
            rec.old_edge_pulled = now_;
        pulled_[pull_key(r, *id)] = {mv->second, reply.entry.locator, now_};
    }

    void Simulation::observe_stale_sender(std::uint32_t r, const EncapPacket &pkt)
    {
        auto owner = lease_owner_.find(pkt.inner_dst.ipv4_value());
        if (owner == lease_owner_.end())
            return;
        auto p = pulled_.find(pull_key(r, owner->second));
        if (p == pulled_.end())
            return;
        // back home at r: delivered locally, nobody is stale
        if (endpoints_.at(owner->second).router == static_cast<std::int32_t>(r))
            return;
        const Pull &pull = p->second;
        if (now_ >= pull.at + sc_.calendar(sc_.router.map_cache_ttl_s))
            return;
        auto src = nodes_.find(pkt.outer_src);
        if (src == nodes_.end() || src->second.kind != NodeRef::RouterNode)
            return;
        const std::uint32_t s = src->second.index;
        if (routers_[s]->role() == RouterRole::Border || pkt.outer_src == pull.locator)
            return;
        MoveRecord &mv = m_.moves[pull.move];
        if (std::find(mv.stale_senders.begin(), mv.stale_senders.end(), s) == mv.stale_senders.end())
            mv.stale_senders.push_back(s);
    }

    void Simulation::inject(std::uint32_t router, PortId port, const OverlayFrame &frame)
    {
        ++m_.conservation.injected;
        Actions acts;
        routers_[router]->handle_outbound(port, frame, now_, acts);
        apply_router_actions(router, acts);
    }

    void Simulation::on_delivered(std::uint32_t r, const DeliverLocal &d)
    {
        ++m_.conservation.delivered;
        if (!arp_by_frame_.empty())
        {
            if (auto a = arp_by_frame_.find(d.id); a != arp_by_frame_.end())
                m_.arps[a->second].delivered = true;
        }
        if (auto p = pending_move_.find(d.endpoint); p != pending_move_.end())
        {
            MoveRecord &mv = m_.moves[p->second];
            if (mv.new_router == r)
            {
                mv.restore = now_;
                m_.handovers.push_back({mv.endpoint, mv.detach, now_});
                pending_move_.erase(p);
            }
        }
        if (auto lw = open_loss_window_.find(d.endpoint); lw != open_loss_window_.end())
        {
            m_.loops.loss_windows[lw->second].first_delivery = now_;
            open_loss_window_.erase(lw);
        }
        const std::uint32_t gen = d.flow >> kFlowShift;
        if (gen != 0 && gen <= generators_.size())
            generators_[gen - 1]->on_delivered(*this, d.flow & ((1u << kFlowShift) - 1), r, d.endpoint);
    }

    void Simulation::on_dropped(PacketId id, std::uint32_t flow, DropReason why)
    {
        ++m_.conservation.dropped[static_cast<std::size_t>(why)];
        if (!arp_by_frame_.empty())
        {
            if (auto a = arp_by_frame_.find(id); a != arp_by_frame_.end())
                m_.arps[a->second].dropped = true;
        }
        const std::uint32_t gen = flow >> kFlowShift;
        if (gen != 0 && gen <= generators_.size())
            generators_[gen - 1]->on_dropped(*this, flow & ((1u << kFlowShift) - 1), why);
    }

    // ---------------------------------------------------------------- endpoint traffic API

    std::uint32_t Simulation::flow_id(std::size_t generator, std::uint32_t local)
    {
        return static_cast<std::uint32_t>((generator + 1) << kFlowShift) | (local & ((1u << kFlowShift) - 1));
    }

    PacketId Simulation::send(EndpointId src, EndpointId dst, std::uint32_t flow, std::uint32_t payload)
    {
        const EndpointState &d = endpoints_.at(dst);
        if (!d.ipv4)
            return 0;
        return send_to(src, *d.ipv4, flow, payload);
    }

    PacketId Simulation::send_to(EndpointId src, const OverlayAddr &dst, std::uint32_t flow, std::uint32_t payload)
    {
        const EndpointState &ep = endpoints_.at(src);
        if (ep.router < 0 || !ep.ipv4)
            return 0;
        OverlayFrame f;
        f.id = next_packet_++;
        f.flow = flow;
        f.kind = FrameKind::Unicast;
        f.inner_src = *ep.ipv4;
        f.inner_dst = dst;
        f.payload_len = payload;
        const auto r = static_cast<std::uint32_t>(ep.router);
        schedule(now_ + processing_delay({NodeRef::RouterNode, r}, false), EvFrame{r, ep.port, f});
        return f.id;
    }

    PacketId Simulation::send_arp(EndpointId src, const OverlayAddr &target, std::uint32_t flow, ArpTarget kind)
    {
        const EndpointState &ep = endpoints_.at(src);
        if (ep.router < 0 || !ep.mac)
            return 0;
        OverlayFrame f;
        f.id = next_packet_++;
        f.flow = flow;
        f.kind = FrameKind::ArpRequest;
        f.inner_src = *ep.mac;
        f.inner_dst = OverlayAddr::broadcast_mac();
        f.arp_target = target;
        f.payload_len = 28;
        arp_by_frame_[f.id] = m_.arps.size();
        m_.arps.push_back({f.id, kind, 0, 0, false, false});
        const auto r = static_cast<std::uint32_t>(ep.router);
        schedule(now_ + processing_delay({NodeRef::RouterNode, r}, false), EvFrame{r, ep.port, f});
        return f.id;
    }

    PacketId Simulation::send_broadcast(EndpointId src, std::uint32_t flow)
    {
        const EndpointState &ep = endpoints_.at(src);
        if (ep.router < 0 || !ep.mac)
            return 0;
        OverlayFrame f;
        f.id = next_packet_++;
        f.flow = flow;
        f.kind = FrameKind::Broadcast;
        f.inner_src = *ep.mac;
        f.inner_dst = OverlayAddr::broadcast_mac();
        f.payload_len = 64;
        const auto r = static_cast<std::uint32_t>(ep.router);
        schedule(now_ + processing_delay({NodeRef::RouterNode, r}, false), EvFrame{r, ep.port, f});
        return f.id;
    }

    std::optional<OverlayAddr> Simulation::unknown_address(Vn vn) const
    {
        auto it = pools_.find(vn.value());
        if (it == pools_.end())
            return std::nullopt;
        // the address right after the allocatable range is never leased
        return OverlayAddr::ipv4(it->second.second + 1);
    }

    // ---------------------------------------------------------------- attachment

    void Simulation::attach(EndpointId id, std::uint32_t router, CauseId cause)
    {
        schedule(now_, EvAttach{id, router, cause});
    }

    void Simulation::handle_attach(const EvAttach &ev)
    {
        EndpointState &ep = endpoints_.at(ev.endpoint);
        if (ep.router >= 0)
            detach(ep.id);
        const std::uint32_t r = ev.router;
        // registering locally replaces whatever r had cached for the endpoint
        pulled_.erase(pull_key(r, ep.id));
        ep.router = static_cast<std::int32_t>(r);
        ep.port = next_port_[r]++;
        attached_.insert(ep.id);
        per_router_[r].insert(ep.id);
        Actions acts;
        routers_[r]->onboard(attach_info(ep), ep.port, now_, acts, ev.cause);
        apply_router_actions(r, acts);
    }

    void Simulation::detach(EndpointId id)
    {
        EndpointState &ep = endpoints_.at(id);
        if (ep.router < 0)
            return;
        const auto r = static_cast<std::uint32_t>(ep.router);
        Actions acts;
        routers_[r]->detach(id, now_, acts);
        apply_router_actions(r, acts);
        attached_.erase(id);
        per_router_[r].erase(id);
        ep.router = -1;
    }

    CauseId Simulation::move(EndpointId id, std::uint32_t new_router, bool watch, SimTime timeout)
    {
        EndpointState &ep = endpoints_.at(id);
        if (ep.router < 0)
            return 0;
        const CauseId cause = next_move_cause_++;
        if (watch)
        {
            MoveRecord rec;
            rec.cause = cause;
            rec.endpoint = id;
            rec.old_router = static_cast<std::uint32_t>(ep.router);
            rec.new_router = new_router;
            rec.detach = now_;
            const std::size_t idx = m_.moves.size();
            m_.moves.push_back(rec);
            move_by_cause_[cause] = idx;
            pending_move_[id] = idx;
            watch_[id].push_back(idx);
            schedule(now_ + timeout, EvHandoverTimeout{idx});
        }
        detach(id);
        schedule(now_ + sc_.mobility.reattach_delay_us, EvAttach{id, new_router, cause});
        return cause;
    }

    void Simulation::handle_dhcp(const EvDhcp &ev)
    {
        EndpointState &ep = endpoints_.at(ev.endpoint);
        if (ep.router != static_cast<std::int32_t>(ev.router) ||
            routers_[ev.router]->phase_of(ep.id) != OnboardPhase::RulesInstalled)
            return;
        if (!ep.ipv4)
        {
            auto &[next, last] = pools_.at(ep.vn.value());
            if (next > last)
                throw std::runtime_error("address pool of VN " + std::to_string(ep.vn.value()) + " exhausted");
            ep.ipv4 = OverlayAddr::ipv4(next);
            lease_owner_[next] = ep.id;
            ++next;
        }
        if (auto o = open_onboard_.find(ep.id); o != open_onboard_.end())
        {
            OnboardTrace &t = m_.onboardings[o->second];
            if (t.router == ev.router && t.address == 0)
                t.address = next_observation();
        }
        Actions acts;
        routers_[ev.router]->on_address_allocated(ep.id, *ep.ipv4, now_, acts);
        apply_router_actions(ev.router, acts);
    }

    // ---------------------------------------------------------------- reboots

    void Simulation::handle_reboot(const EvReboot &ev)
    {
        const std::uint32_t r = ev.router;
        if (down_[r])
            return;
        const std::size_t lost = routers_[r]->reboot(now_);
        m_.conservation.dropped[static_cast<std::size_t>(DropReason::RouterDown)] += lost;
        down_[r] = true;
        rebooted_.insert(r);
        const UnderlayAddr loc = routers_[r]->locator();
        for (std::uint32_t o = 0; o < routers_.size(); ++o)
        {
            if (o != r)
                routers_[o]->underlay_route_change(loc, false, now_);
        }
        // r forgot everything; trackers drop entries pointing at r
        std::erase_if(pulled_, [&](const auto &kv) {
            return kv.first >> 32 == r || (sc_.router.underlay_tracking && kv.second.locator == loc);
        });
        schedule(now_ + ev.down_for, EvRestart{r});
    }

    void Simulation::handle_restart(const EvRestart &ev)
    {
        const std::uint32_t r = ev.router;
        routers_[r]->restart(now_);
        down_[r] = false;
        const UnderlayAddr loc = routers_[r]->locator();
        for (std::uint32_t o = 0; o < routers_.size(); ++o)
        {
            if (o != r)
                routers_[o]->underlay_route_change(loc, true, now_);
        }
        if (routers_[r]->role() == RouterRole::Border && sc_.control_plane == ControlPlaneMode::Reactive)
        {
            std::vector<ControlOut> outs;
            rs_.subscribe(loc, outs);
            emit_control_list(kRoutingServer, outs);
        }
        schedule(now_ + sc_.topology.redetect_delay_us, EvRedetect{r});
    }

    void Simulation::handle_redetect(const EvRedetect &ev)
    {
        const std::uint32_t r = ev.router;
        if (down_[r])
            return;
        const std::vector<EndpointId> present = per_router_[r].items;
        for (EndpointId id : present)
        {
            const EndpointState &ep = endpoints_[id];
            Actions acts;
            routers_[r]->onboard(attach_info(ep), ep.port, now_, acts, 0);
            apply_router_actions(r, acts);
        }
    }

    // ---------------------------------------------------------------- presence

    void Simulation::schedule_arrival(EndpointId id, std::int64_t from_day)
    {
        const DiurnalProfile &d = sc_.diurnal;
        if (d.workdays == 0)
            return;
        std::int64_t day = from_day;
        while (day % 7 >= static_cast<std::int64_t>(d.workdays))
            ++day;
        Rng &rng = this->rng(RngRole::Presence);
        double hour = d.day_start_h + rng.normal(0, d.jitter_h);
        hour = std::clamp(hour, 0.0, std::max(0.0, d.day_end_h - 1));
        const SimTime at = std::max(now_, sc_.calendar(static_cast<double>(day) * kDay + hour * 3600));
        if (at > end_)
            return;
        schedule(at, EvPresence{id, true, day});
    }

    void Simulation::handle_presence(const EvPresence &ev)
    {
        if (ev.arrive)
        {
            attach(ev.endpoint, home_router_[ev.endpoint]);
            const DiurnalProfile &d = sc_.diurnal;
            double hour = d.day_end_h + rng(RngRole::Presence).normal(0, d.jitter_h);
            const double arrived_h = (static_cast<double>(now_) * sc_.timescale / 1e6 - ev.day * kDay) / 3600;
            hour = std::clamp(hour, arrived_h + 1, 23.99);
            schedule(sc_.calendar(static_cast<double>(ev.day) * kDay + hour * 3600), EvPresence{ev.endpoint, false, ev.day});
            return;
        }
        detach(ev.endpoint);
        schedule_arrival(ev.endpoint, ev.day + 1);
    }

    // ---------------------------------------------------------------- sampling

    void Simulation::take_sample()
    {
        for (std::uint32_t r = 0; r < routers_.size(); ++r)
        {
            const Router &rt = *routers_[r];
            m_.fib.push_back({now_, r, rt.fib_entries(now_)});
            const RouterCounters &c = rt.counters();
            RouterCounters &last = last_counters_[r];
            m_.drops.push_back({now_, r, c.acl_hits - last.acl_hits, c.acl_drops - last.acl_drops});
            last = c;
        }
        m_.control.push_back({now_, interval_counts_});
        interval_counts_.fill(0);
    }
}
