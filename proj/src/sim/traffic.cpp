#include "sda/sim/simulation.hpp"

#include <algorithm>
#include <cmath>

namespace sda
{
    namespace
    {
        constexpr std::uint64_t kTypeShift = 56;
        constexpr std::uint64_t kSlotMask = (std::uint64_t{1} << kTypeShift) - 1;

        std::uint64_t tag_of(std::uint64_t type, std::uint64_t slot) { return (type << kTypeShift) | slot; }

        bool usable(const Simulation &sim, EndpointId id)
        {
            return sim.is_registered(id) && sim.endpoint(id).ipv4.has_value();
        }

        /// Simulated microseconds until the next event of a Poisson process
        /// with `per_calendar_second` rate.
        SimTime poisson_gap(const Simulation &sim, Rng &rng, double per_calendar_second)
        {
            const double s = rng.exponential(1.0 / per_calendar_second);
            return std::max<SimTime>(1, sim.scenario().calendar(s));
        }

        // ------------------------------------------------------------ pairs

        class PairsGenerator final : public TrafficGenerator
        {
        public:
            PairsGenerator(const TrafficSpec &spec, std::size_t index) : spec_(spec), index_(index) {}

            void start(Simulation &sim) override
            {
                for (std::size_t i = 0; i < spec_.flows.size(); ++i)
                {
                    const FlowDecl &f = spec_.flows[i];
                    ends_.emplace_back(*sim.resolve_endpoint(f.src), *sim.resolve_endpoint(f.dst));
                    sim.schedule_tick(index_, sim.scenario().calendar(f.start_s), i);
                }
            }

            void on_tick(Simulation &sim, std::uint64_t tag) override
            {
                const FlowDecl &f = spec_.flows[tag];
                if (f.stop_s >= 0 && sim.now() >= sim.scenario().calendar(f.stop_s))
                    return;
                const auto [src, dst] = ends_[tag];
                sim.send(src, dst, Simulation::flow_id(index_, static_cast<std::uint32_t>(tag)), spec_.payload_bytes);
                sim.schedule_tick(index_, sim.now() + f.interval_us, tag);
            }

        private:
            TrafficSpec spec_;
            std::size_t index_;
            std::vector<std::pair<EndpointId, EndpointId>> ends_;
        };

        // ------------------------------------------------------------ handover

        /// Random moves between edges. For each move one sender on a third edge
        /// streams to the mover from shortly before the move until traffic is
        /// restored (plus a short tail) or the move times out.
        class HandoverGenerator final : public TrafficGenerator
        {
        public:
            HandoverGenerator(const TrafficSpec &spec, std::size_t index) : spec_(spec), index_(index) {}

            void start(Simulation &sim) override
            {
                const MobilityConfig &mob = sim.scenario().mobility;
                if (mob.moves_per_second <= 0 || sim.edge_count() < 2)
                    return;
                if (mob.mover_blocks.empty())
                {
                    for (const EndpointState &ep : sim.endpoints())
                        movers_.push_back(ep.id);
                }
                else
                {
                    for (const std::string &b : mob.mover_blocks)
                    {
                        const auto &members = sim.block_members(*sim.block_index(b));
                        movers_.insert(movers_.end(), members.begin(), members.end());
                    }
                }
                sim.schedule_tick(index_, sim.scenario().calendar(mob.start_s), tag_of(kPlan, 0));
            }

            void on_tick(Simulation &sim, std::uint64_t tag) override
            {
                const std::uint64_t type = tag >> kTypeShift;
                const std::uint64_t slot = tag & kSlotMask;
                if (type == kPlan)
                    plan(sim);
                else if (type == kPacket)
                    packet(sim, slot);
                else
                    execute_move(sim, slot);
            }

            void on_delivered(Simulation &, std::uint32_t flow, std::uint32_t router, EndpointId endpoint) override
            {
                if (flow >= active_.size())
                    return;
                Active &a = active_[flow];
                if (a.moved && endpoint == a.mover && router == a.new_router)
                    a.restored = true;
            }

        private:
            static constexpr std::uint64_t kPlan = 0;
            static constexpr std::uint64_t kPacket = 1;
            static constexpr std::uint64_t kMove = 2;

            struct Active
            {
                EndpointId mover = 0;
                EndpointId sender = 0;
                std::uint32_t new_router = 0;
                SimTime move_at = 0;
                bool moved = false;
                bool restored = false;
                bool done = false;
                unsigned tail_left = 0;
            };

            void plan(Simulation &sim)
            {
                Rng &rng = sim.rng(RngRole::Mobility);
                sim.schedule_tick(index_, sim.now() + poisson_gap(sim, rng, sim.scenario().mobility.moves_per_second),
                                  tag_of(kPlan, 0));
                if (movers_.empty())
                    return;

                const std::uint32_t edges = sim.edge_count();
                std::optional<EndpointId> mover;
                for (int attempt = 0; attempt < 64 && !mover; ++attempt)
                {
                    const EndpointId id = movers_[rng.index(movers_.size())];
                    const EndpointState &ep = sim.endpoint(id);
                    if (!busy_.contains(id) && ep.router >= 0 && static_cast<std::uint32_t>(ep.router) < edges &&
                        usable(sim, id))
                        mover = id;
                }
                if (!mover)
                    return;
                const auto old_router = static_cast<std::uint32_t>(sim.endpoint(*mover).router);
                std::uint32_t target = static_cast<std::uint32_t>(rng.index(edges - 1));
                if (target >= old_router)
                    ++target;

                const auto &present = sim.attached();
                std::optional<EndpointId> sender;
                for (int attempt = 0; attempt < 64 && !sender && !present.empty(); ++attempt)
                {
                    const EndpointId id = present[rng.index(present.size())];
                    const EndpointState &ep = sim.endpoint(id);
                    if (id == *mover || busy_.contains(id) || ep.router < 0)
                        continue;
                    const auto r = static_cast<std::uint32_t>(ep.router);
                    if (r >= edges || r == old_router || (edges > 2 && r == target))
                        continue;
                    if (ep.vn != sim.endpoint(*mover).vn || !usable(sim, id))
                        continue;
                    sender = id;
                }
                if (!sender)
                    return;

                busy_.insert(*mover);
                busy_.insert(*sender);
                Active a;
                a.mover = *mover;
                a.sender = *sender;
                a.new_router = target;
                // random phase between the sender's packets and the move
                a.move_at = sim.now() + spec_.lead_us + static_cast<SimTime>(rng.index(static_cast<std::uint64_t>(spec_.interval_us)));
                a.tail_left = spec_.tail_packets;
                const std::uint64_t slot = active_.size();
                active_.push_back(a);
                sim.schedule_tick(index_, a.move_at, tag_of(kMove, slot));
                packet(sim, slot);
            }

            void execute_move(Simulation &sim, std::uint64_t slot)
            {
                Active &a = active_[slot];
                if (a.done)
                    return;
                sim.move(a.mover, a.new_router, true, spec_.timeout_us);
                a.moved = true;
            }

            void packet(Simulation &sim, std::uint64_t slot)
            {
                Active &a = active_[slot];
                if (a.done)
                    return;
                if (a.restored)
                {
                    if (a.tail_left == 0)
                        return finish(a);
                    --a.tail_left;
                }
                if (sim.now() > a.move_at + spec_.timeout_us)
                    return finish(a);
                sim.send(a.sender, a.mover, Simulation::flow_id(index_, static_cast<std::uint32_t>(slot)),
                         spec_.payload_bytes);
                sim.schedule_tick(index_, sim.now() + spec_.interval_us, tag_of(kPacket, slot));
            }

            void finish(Active &a)
            {
                a.done = true;
                busy_.erase(a.mover);
                busy_.erase(a.sender);
            }

            TrafficSpec spec_;
            std::size_t index_;
            std::vector<EndpointId> movers_;
            std::unordered_set<EndpointId> busy_;
            std::vector<Active> active_;
        };

        // ------------------------------------------------------------ diurnal

        /// Short flows started by present endpoints, thinned outside working
        /// hours. Destinations are local, popular or uniform.
        class DiurnalGenerator final : public TrafficGenerator
        {
        public:
            DiurnalGenerator(const TrafficSpec &spec, std::size_t index) : spec_(spec), index_(index) {}

            void start(Simulation &sim) override
            {
                population_ = sim.endpoints().size();
                if (!spec_.popular_block.empty())
                    popular_ = sim.block_members(*sim.block_index(spec_.popular_block));
                if (population_ == 0 || spec_.flows_per_hour <= 0)
                    return;
                sim.schedule_tick(index_, next_arrival(sim), 0);
            }

            void on_tick(Simulation &sim, std::uint64_t tag) override
            {
                if (tag == 0)
                {
                    sim.schedule_tick(index_, next_arrival(sim), 0);
                    arrival(sim);
                    return;
                }
                Flow &f = flows_[tag - 1];
                sim.send(f.src, f.dst, Simulation::flow_id(index_, static_cast<std::uint32_t>(tag)),
                         spec_.payload_bytes);
                if (--f.left == 0)
                {
                    free_.push_back(tag - 1);
                    return;
                }
                sim.schedule_tick(index_, sim.now() + spec_.packet_gap_us, tag);
            }

        private:
            struct Flow
            {
                EndpointId src = 0;
                EndpointId dst = 0;
                unsigned left = 0;
            };

            SimTime next_arrival(Simulation &sim)
            {
                const double rate = static_cast<double>(population_) * spec_.flows_per_hour / 3600.0;
                return sim.now() + poisson_gap(sim, sim.generator_rng(index_), rate);
            }

            bool working_hours(const Simulation &sim) const
            {
                const DiurnalProfile &d = sim.scenario().diurnal;
                const double t = static_cast<double>(sim.now()) * sim.scenario().timescale / 1e6;
                const auto day = static_cast<std::int64_t>(t / 86400);
                const double hour = (t - static_cast<double>(day) * 86400) / 3600;
                return day % 7 < static_cast<std::int64_t>(d.workdays) && hour >= d.day_start_h && hour < d.day_end_h;
            }

            void arrival(Simulation &sim)
            {
                Rng &rng = sim.generator_rng(index_);
                const auto &present = sim.attached();
                if (present.empty())
                    return;
                if (!working_hours(sim) && !rng.chance(sim.scenario().diurnal.night_rate))
                    return;
                const EndpointId src = present[rng.index(present.size())];
                if (!usable(sim, src))
                    return;
                const EndpointState &s = sim.endpoint(src);

                std::optional<EndpointId> dst;
                const double u = rng.uniform();
                if (u < spec_.locality)
                {
                    const auto &local = sim.attached_at(static_cast<std::uint32_t>(s.router));
                    if (local.size() > 1)
                        dst = local[rng.index(local.size())];
                }
                else if (u < spec_.locality + spec_.popular && !popular_.empty())
                {
                    dst = popular_[rng.index(popular_.size())];
                }
                else
                {
                    dst = present[rng.index(present.size())];
                }
                if (!dst || *dst == src || !usable(sim, *dst) || sim.endpoint(*dst).vn != s.vn)
                    return;

                std::uint64_t slot;
                if (!free_.empty())
                {
                    slot = free_.back();
                    free_.pop_back();
                }
                else
                {
                    slot = flows_.size();
                    flows_.emplace_back();
                }
                flows_[slot] = {src, *dst, std::max(1u, spec_.packets_per_flow)};
                on_tick(sim, slot + 1);
            }

            TrafficSpec spec_;
            std::size_t index_;
            std::size_t population_ = 0;
            std::vector<EndpointId> popular_;
            std::vector<Flow> flows_;
            std::vector<std::uint64_t> free_;
        };

        // ------------------------------------------------------------ backoff

        /// Clients contact servers and stop trying a server after
        /// `give_up_after` consecutive denials, apart from rare exploration.
        class BackoffGenerator final : public TrafficGenerator
        {
        public:
            BackoffGenerator(const TrafficSpec &spec, std::size_t index) : spec_(spec), index_(index) {}

            void start(Simulation &sim) override
            {
                clients_ = sim.block_members(*sim.block_index(spec_.clients_block));
                for (const std::string &b : spec_.server_blocks)
                {
                    const auto &m = sim.block_members(*sim.block_index(b));
                    servers_.insert(servers_.end(), m.begin(), m.end());
                }
                if (clients_.empty() || servers_.empty() || spec_.attempts_per_second <= 0)
                    return;
                sim.schedule_tick(index_, next_attempt(sim), 0);
            }

            void on_tick(Simulation &sim, std::uint64_t) override
            {
                const SimTime next = next_attempt(sim);
                if (spec_.stop_s < 0 || next < sim.scenario().calendar(spec_.stop_s))
                    sim.schedule_tick(index_, next, 0);

                Rng &rng = sim.generator_rng(index_);
                const EndpointId client = clients_[rng.index(clients_.size())];
                if (!usable(sim, client))
                    return;
                std::optional<EndpointId> server;
                if (rng.chance(spec_.explore))
                {
                    server = servers_[rng.index(servers_.size())];
                }
                else
                {
                    for (int attempt = 0; attempt < 16 && !server; ++attempt)
                    {
                        const EndpointId s = servers_[rng.index(servers_.size())];
                        if (failures(client, s) < spec_.give_up_after)
                            server = s;
                    }
                }
                if (!server || !sim.endpoint(*server).ipv4)
                    return;
                const auto local = static_cast<std::uint32_t>(attempts_.size());
                attempts_.emplace_back(client, *server);
                sim.send(client, *server, Simulation::flow_id(index_, local), spec_.payload_bytes);
            }

            void on_delivered(Simulation &, std::uint32_t flow, std::uint32_t, EndpointId) override
            {
                if (flow < attempts_.size())
                    failures_.erase(key(attempts_[flow].first, attempts_[flow].second));
            }

            void on_dropped(Simulation &, std::uint32_t flow, DropReason reason) override
            {
                if (flow >= attempts_.size())
                    return;
                if (reason == DropReason::Policy || reason == DropReason::DefaultDeny)
                    ++failures_[key(attempts_[flow].first, attempts_[flow].second)];
            }

        private:
            static std::uint64_t key(EndpointId c, EndpointId s) { return (std::uint64_t{c} << 32) | s; }

            unsigned failures(EndpointId c, EndpointId s) const
            {
                auto it = failures_.find(key(c, s));
                return it == failures_.end() ? 0 : it->second;
            }

            SimTime next_attempt(Simulation &sim)
            {
                const double rate = static_cast<double>(clients_.size()) * spec_.attempts_per_second;
                return sim.now() + poisson_gap(sim, sim.generator_rng(index_), rate);
            }

            TrafficSpec spec_;
            std::size_t index_;
            std::vector<EndpointId> clients_;
            std::vector<EndpointId> servers_;
            std::vector<std::pair<EndpointId, EndpointId>> attempts_;
            std::unordered_map<std::uint64_t, unsigned> failures_;
        };

        // ------------------------------------------------------------ arp

        class ArpGenerator final : public TrafficGenerator
        {
        public:
            ArpGenerator(const TrafficSpec &spec, std::size_t index) : spec_(spec), index_(index) {}

            void start(Simulation &sim) override
            {
                if (spec_.arp_per_second > 0)
                    sim.schedule_tick(index_, sim.now() + poisson_gap(sim, sim.generator_rng(index_), spec_.arp_per_second), 0);
            }

            void on_tick(Simulation &sim, std::uint64_t) override
            {
                Rng &rng = sim.generator_rng(index_);
                const SimTime next = sim.now() + poisson_gap(sim, rng, spec_.arp_per_second);
                if (spec_.stop_s < 0 || next < sim.scenario().calendar(spec_.stop_s))
                    sim.schedule_tick(index_, next, 0);

                const auto &present = sim.attached();
                if (present.empty())
                    return;
                const EndpointId src = present[rng.index(present.size())];
                const EndpointState &s = sim.endpoint(src);
                if (!usable(sim, src) || !s.mac || static_cast<std::uint32_t>(s.router) >= sim.edge_count())
                    return;
                const std::uint32_t flow = Simulation::flow_id(index_, 0);

                const double u = rng.uniform();
                if (u < spec_.arp_broadcast)
                {
                    sim.send_broadcast(src, flow);
                    return;
                }
                if (u < spec_.arp_broadcast + spec_.arp_unknown)
                {
                    if (auto addr = sim.unknown_address(s.vn))
                        sim.send_arp(src, *addr, flow, ArpTarget::Unknown);
                    return;
                }
                const bool local = u < spec_.arp_broadcast + spec_.arp_unknown + spec_.arp_local;
                const auto &pool = local ? sim.attached_at(static_cast<std::uint32_t>(s.router)) : present;
                for (int attempt = 0; attempt < 16; ++attempt)
                {
                    const EndpointId t = pool[rng.index(pool.size())];
                    const EndpointState &d = sim.endpoint(t);
                    if (t == src || d.vn != s.vn || !d.mac || !usable(sim, t))
                        continue;
                    const bool same_router = d.router == s.router;
                    if (same_router != local)
                        continue;
                    sim.send_arp(src, *d.ipv4, flow, local ? ArpTarget::Local : ArpTarget::Remote);
                    return;
                }
            }

        private:
            TrafficSpec spec_;
            std::size_t index_;
        };
    }

    std::unique_ptr<TrafficGenerator> make_generator(const TrafficSpec &spec, std::size_t index)
    {
        switch (spec.kind)
        {
        case TrafficKind::Pairs:
            return std::make_unique<PairsGenerator>(spec, index);
        case TrafficKind::Handover:
            return std::make_unique<HandoverGenerator>(spec, index);
        case TrafficKind::Diurnal:
            return std::make_unique<DiurnalGenerator>(spec, index);
        case TrafficKind::Backoff:
            return std::make_unique<BackoffGenerator>(spec, index);
        case TrafficKind::Arp:
            return std::make_unique<ArpGenerator>(spec, index);
        }
        return nullptr;
    }
}
