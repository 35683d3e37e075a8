#include "sda/router/router.hpp"

#include <algorithm>

namespace sda
{
    const char *role_name(RouterRole r) noexcept
    {
        return r == RouterRole::Edge ? "edge" : "border";
    }

    const char *mode_name(ControlPlaneMode m) noexcept
    {
        return m == ControlPlaneMode::Reactive ? "reactive" : "proactive";
    }

    const char *phase_name(OnboardPhase p) noexcept
    {
        switch (p)
        {
        case OnboardPhase::Detected:
            return "detected";
        case OnboardPhase::Authenticating:
            return "authenticating";
        case OnboardPhase::RulesInstalled:
            return "rules_installed";
        case OnboardPhase::Addressed:
            return "addressed";
        case OnboardPhase::Registered:
            return "registered";
        case OnboardPhase::Quarantined:
            return "quarantined";
        }
        return "?";
    }

    const char *drop_reason_name(DropReason r) noexcept
    {
        switch (r)
        {
        case DropReason::NotOnboarded:
            return "not_onboarded";
        case DropReason::Policy:
            return "policy";
        case DropReason::DefaultDeny:
            return "default_deny";
        case DropReason::Negative:
            return "negative";
        case DropReason::NoRoute:
            return "no_route";
        case DropReason::Unknown:
            return "unknown";
        case DropReason::InTransit:
            return "in_transit";
        case DropReason::Ttl:
            return "ttl";
        case DropReason::LoopGuard:
            return "loop_guard";
        case DropReason::Unreachable:
            return "unreachable";
        case DropReason::RouterDown:
            return "router_down";
        case DropReason::UnsupportedBroadcast:
            return "unsupported_broadcast";
        case DropReason::ArpUnresolved:
            return "arp_unresolved";
        }
        return "?";
    }

    Router::Router(RouterConfig config) : cfg_(std::move(config)), cache_(cfg_.cache)
    {
        if (cfg_.locator.is_null())
            throw std::invalid_argument("router needs a locator");
    }

    // ---------------------------------------------------------------- helpers

    void Router::send_control(UnderlayAddr to, ControlBody body, CauseId cause, Actions &out)
    {
        ++counters_.control_out;
        out.push_back(ControlOut{to, ControlMessage{cfg_.locator, cause, std::move(body)}});
    }

    void Router::send_map_request(std::vector<MappingKey> keys, CauseId cause, Actions &out, bool want_l2)
    {
        send_control(cfg_.mapping_server, MapRequestBody{std::move(keys), want_l2}, cause, out);
    }

    void Router::transmit(const EncapPacket &pkt, Actions &out)
    {
        ++counters_.packets_fwd;
        out.push_back(SendPacket{pkt});
    }

    void Router::drop(PacketId id, std::uint32_t flow, DropReason why, Actions &out)
    {
        ++counters_.packets_dropped;
        out.push_back(DropPacket{id, flow, why});
    }

    const Router::VrfEntry *Router::vrf_find(const MappingKey &key) const
    {
        auto it = vrf_.find(key);
        return it == vrf_.end() ? nullptr : &it->second;
    }

    const Router::LocalEndpoint *Router::bound_endpoint(PortId port) const
    {
        auto p = ports_.find(port);
        if (p == ports_.end())
            return nullptr;
        auto e = endpoints_.find(p->second);
        return e == endpoints_.end() ? nullptr : &e->second;
    }

    bool Router::is_border(UnderlayAddr a) const
    {
        return std::find(cfg_.borders.begin(), cfg_.borders.end(), a) != cfg_.borders.end();
    }

    void Router::clear_tombstone(const MappingKey &key)
    {
        auto it = tombstoned_keys_.find(key);
        if (it == tombstoned_keys_.end())
            return;
        auto t = tombstones_.find(it->second);
        tombstoned_keys_.erase(it);
        if (t == tombstones_.end())
            return;
        std::erase(t->second.keys, key);
        if (t->second.keys.empty())
            tombstones_.erase(t);
    }

    void Router::set_phase(LocalEndpoint &ep, OnboardPhase phase, Actions &out)
    {
        ep.phase = phase;
        out.push_back(PhaseChange{ep.id, phase});
    }

    // ---------------------------------------------------------------- policy state

    void Router::install_rules(Vn vn, GroupId dst, const std::vector<ConnectivityRule> &rules)
    {
        const std::uint32_t v = vn.value();
        const std::uint16_t d = dst.value();
        acl_.erase(acl_.lower_bound({v, d, 0}), acl_.upper_bound({v, d, 0xFFFF}));
        for (const ConnectivityRule &r : rules)
        {
            if (r.vn == vn && r.dst_group == dst)
                acl_[{v, d, r.src_group.value()}] = r.action;
        }
    }

    void Router::retain_group(Vn vn, GroupId g, const std::vector<ConnectivityRule> &rules)
    {
        ++group_refs_[{vn.value(), g.value()}];
        // the newest authentication result carries the current rule set
        install_rules(vn, g, rules);
    }

    void Router::release_group(Vn vn, GroupId g)
    {
        auto it = group_refs_.find({vn.value(), g.value()});
        if (it == group_refs_.end())
            return;
        if (--it->second == 0)
        {
            group_refs_.erase(it);
            install_rules(vn, g, {});
        }
    }

    std::optional<Action> Router::acl_lookup(Vn vn, GroupId src, GroupId dst) const
    {
        auto it = acl_.find({vn.value(), dst.value(), src.value()});
        if (it == acl_.end())
            return std::nullopt;
        return it->second;
    }

    // ---------------------------------------------------------------- onboarding

    void Router::onboard(const AttachInfo &info, PortId port, SimTime now, Actions &out, CauseId cause)
    {
        if (down_)
            return;
        if (endpoints_.contains(info.endpoint_id))
            remove_local(info.endpoint_id, false, now, out);
        if (auto t = tombstones_.find(info.endpoint_id); t != tombstones_.end())
        {
            for (const MappingKey &k : t->second.keys)
                tombstoned_keys_.erase(k);
            tombstones_.erase(t);
        }
        // a different endpoint may still hold the port
        if (auto p = ports_.find(port); p != ports_.end())
            remove_local(p->second, true, now, out);

        LocalEndpoint ep;
        ep.id = info.endpoint_id;
        ep.port = port;
        ep.attach = info;
        ep.cause = cause;
        auto &stored = endpoints_.emplace(ep.id, std::move(ep)).first->second;
        ports_[port] = stored.id;
        set_phase(stored, OnboardPhase::Detected, out);
        send_control(cfg_.policy_server, AuthRequestBody{stored.id, info.auth_token}, cause, out);
        set_phase(stored, OnboardPhase::Authenticating, out);
    }

    void Router::on_auth_reply(const AuthReplyBody &reply, SimTime now, Actions &out)
    {
        auto it = endpoints_.find(reply.endpoint_id);
        if (it == endpoints_.end())
            return;
        LocalEndpoint &ep = it->second;

        if (reply.reauth)
        {
            if (!reply.success || !ep.rules_held || reply.result.group == ep.group)
                return;
            release_group(ep.vn, ep.group);
            ep.group = reply.result.group;
            retain_group(ep.vn, ep.group, reply.result.rules);
            MapRegisterBody reg{cfg_.locator, {}, ep.attach.mac, false};
            for (const OverlayAddr &a : ep.addrs)
            {
                MappingKey k{ep.vn, a};
                if (auto v = vrf_.find(k); v != vrf_.end())
                    v->second.group = ep.group;
                reg.records.push_back({k, ep.group});
            }
            if (ep.phase == OnboardPhase::Registered)
                send_control(cfg_.mapping_server, std::move(reg), ep.cause, out);
            return;
        }

        if (ep.phase != OnboardPhase::Authenticating)
            return;
        if (!reply.success)
        {
            set_phase(ep, OnboardPhase::Quarantined, out);
            return;
        }
        ep.vn = reply.result.vn;
        ep.group = reply.result.group;
        retain_group(ep.vn, ep.group, reply.result.rules);
        ep.rules_held = true;
        set_phase(ep, OnboardPhase::RulesInstalled, out);
        (void)now;
        out.push_back(RequestAddress{ep.id, ep.vn});
    }

    void Router::on_address_allocated(EndpointId id, const OverlayAddr &ipv4, SimTime now, Actions &out)
    {
        auto it = endpoints_.find(id);
        if (it == endpoints_.end() || it->second.phase != OnboardPhase::RulesInstalled)
            return;
        LocalEndpoint &ep = it->second;
        ep.addrs.clear();
        ep.addrs.push_back(ipv4);
        if (ep.attach.ipv6)
            ep.addrs.push_back(*ep.attach.ipv6);
        if (ep.attach.mac)
            ep.addrs.push_back(*ep.attach.mac);

        MapRegisterBody reg{cfg_.locator, {}, ep.attach.mac, false};
        for (const OverlayAddr &a : ep.addrs)
        {
            MappingKey k{ep.vn, a};
            vrf_[k] = VrfEntry{ep.port, ep.group, ep.id};
            cache_.erase(k);
            clear_tombstone(k);
            reg.records.push_back({k, ep.group});
        }
        set_phase(ep, OnboardPhase::Addressed, out);
        (void)now;
        send_control(cfg_.mapping_server, std::move(reg), ep.cause, out);
        set_phase(ep, OnboardPhase::Registered, out);
    }

    void Router::remove_local(EndpointId id, bool leave_tombstone, SimTime now, Actions &out)
    {
        auto it = endpoints_.find(id);
        if (it == endpoints_.end())
            return;
        LocalEndpoint &ep = it->second;
        if (auto p = ports_.find(ep.port); p != ports_.end() && p->second == id)
            ports_.erase(p);

        std::vector<MappingKey> keys;
        for (const OverlayAddr &a : ep.addrs)
        {
            MappingKey k{ep.vn, a};
            auto v = vrf_.find(k);
            if (v != vrf_.end() && v->second.endpoint == id)
            {
                vrf_.erase(v);
                keys.push_back(k);
            }
        }
        if (ep.rules_held)
            release_group(ep.vn, ep.group);

        if (leave_tombstone && ep.phase == OnboardPhase::Registered && !keys.empty())
        {
            Tombstone &t = tombstones_[id];
            t.expires = now + cfg_.departure_grace;
            for (const MappingKey &k : keys)
            {
                tombstoned_keys_[k] = id;
                t.keys.push_back(k);
            }
            out.push_back(ArmTimer{t.expires, id});
        }
        endpoints_.erase(it);
    }

    void Router::detach(EndpointId id, SimTime now, Actions &out)
    {
        auto it = endpoints_.find(id);
        if (it == endpoints_.end())
            return;
        const bool had_session = it->second.rules_held;
        remove_local(id, true, now, out);
        if (had_session)
            out.push_back(SessionEnded{id});
    }

    void Router::on_timer(std::uint64_t tag, SimTime now, Actions &out)
    {
        if (down_)
            return;
        auto id = static_cast<EndpointId>(tag);
        auto t = tombstones_.find(id);
        if (t == tombstones_.end() || t->second.expires > now)
            return;
        MapRegisterBody wd{cfg_.locator, {}, std::nullopt, true};
        for (const MappingKey &k : t->second.keys)
        {
            tombstoned_keys_.erase(k);
            wd.records.push_back({k, GroupId{}});
        }
        tombstones_.erase(t);
        if (!wd.records.empty())
            send_control(cfg_.mapping_server, std::move(wd), 0, out);
    }

    // ---------------------------------------------------------------- data plane

    void Router::handle_outbound(PortId port, const OverlayFrame &frame, SimTime now, Actions &out)
    {
        if (down_)
        {
            drop(frame.id, frame.flow, DropReason::RouterDown, out);
            return;
        }
        const LocalEndpoint *ep = bound_endpoint(port);
        if (!ep || ep->phase != OnboardPhase::Registered)
        {
            drop(frame.id, frame.flow, DropReason::NotOnboarded, out);
            return;
        }
        if (frame.kind == FrameKind::ArpRequest)
        {
            arp_request(port, *ep, frame, now, out);
            return;
        }
        if (frame.kind == FrameKind::Broadcast || frame.inner_dst.is_broadcast_mac())
        {
            // only ARP is converted to unicast; nothing is flooded into the underlay
            drop(frame.id, frame.flow, DropReason::UnsupportedBroadcast, out);
            return;
        }

        EncapPacket pkt;
        pkt.outer_src = cfg_.locator;
        pkt.vn = ep->vn;
        pkt.group = ep->group;
        pkt.inner_src = frame.inner_src;
        pkt.inner_dst = frame.inner_dst;
        pkt.payload_len = frame.payload_len;
        pkt.ttl = cfg_.initial_ttl;
        pkt.id = frame.id;
        pkt.flow = frame.flow;

        const MappingKey dst{ep->vn, frame.inner_dst};
        if (const VrfEntry *local = vrf_find(dst))
        {
            egress(pkt, *local, out);
            return;
        }
        route_overlay(pkt, dst, now, out);
    }

    void Router::route_overlay(const EncapPacket &pkt, const MappingKey &dst, SimTime now, Actions &out)
    {
        auto send_to = [&](UnderlayAddr loc) {
            EncapPacket p = pkt;
            p.outer_dst = loc;
            transmit(p, out);
        };

        if (cfg_.role == RouterRole::Border)
        {
            border_forward(pkt, dst, out);
            return;
        }
        if (cfg_.mode == ControlPlaneMode::Proactive)
        {
            auto m = proactive_fib_.longest_match(dst);
            if (m && m.value->locator != cfg_.locator)
                send_to(m.value->locator);
            else
                drop(pkt.id, pkt.flow, DropReason::NoRoute, out);
            return;
        }

        const MapCache::Timers &tm = cache_.timers();
        MapCacheEntry *e = cache_.lookup(dst, now);
        if (e && e->state == CacheState::Fresh)
        {
            send_to(e->locator);
            return;
        }
        if (e && e->state == CacheState::Negative)
        {
            const SimTime spacing = tm.negative_ttl / static_cast<SimTime>(tm.negative_retries + 1);
            if (e->retries_used < tm.negative_retries && now - e->requested_at >= spacing)
            {
                ++e->retries_used;
                e->requested_at = now;
                send_map_request({e->key}, 0, out);
            }
            drop(pkt.id, pkt.flow, DropReason::Negative, out);
            return;
        }
        if (e) // Resolving
        {
            if (now - e->requested_at >= tm.resolve_timeout)
            {
                e->requested_at = now;
                send_map_request({e->key}, e->cause, out);
            }
            if (e->stale_locator)
            {
                send_to(*e->stale_locator);
                return;
            }
        }
        else
        {
            cache_.mark_resolving(dst, now, std::nullopt);
            send_map_request({dst}, 0, out);
        }
        forward_via_border(pkt, out);
    }

    void Router::forward_via_border(const EncapPacket &pkt, Actions &out)
    {
        if (cfg_.default_border.is_null() || unreachable_.contains(cfg_.default_border))
        {
            drop(pkt.id, pkt.flow, DropReason::NoRoute, out);
            return;
        }
        EncapPacket p = pkt;
        p.outer_src = cfg_.locator;
        p.outer_dst = cfg_.default_border;
        transmit(p, out);
    }

    void Router::border_forward(const EncapPacket &pkt, const MappingKey &dst, Actions &out)
    {
        auto m = synced_.lookup(dst);
        if (m)
        {
            const UnderlayAddr loc = m.value->locator;
            if (loc == cfg_.locator)
            {
                drop(pkt.id, pkt.flow, DropReason::NoRoute, out);
                return;
            }
            if (cfg_.underlay_tracking && unreachable_.contains(loc))
            {
                drop(pkt.id, pkt.flow, DropReason::LoopGuard, out);
                return;
            }
            if (pkt.outer_dst.is_null())
            {
                EncapPacket p = pkt;
                p.outer_dst = loc;
                transmit(p, out);
                return;
            }
            auto re = reencapsulate(pkt, loc, cfg_.locator);
            if (!re)
                drop(pkt.id, pkt.flow, DropReason::Ttl, out);
            else
                transmit(*re, out);
            return;
        }
        if (external_.longest_match({Vn{}, dst.addr}))
        {
            ++counters_.external_pkts;
            out.push_back(ExternalExit{pkt.id, pkt.flow});
            return;
        }
        drop(pkt.id, pkt.flow, DropReason::NoRoute, out);
    }

    void Router::handle_inbound(const EncapPacket &pkt, SimTime now, Actions &out)
    {
        if (down_)
        {
            drop(pkt.id, pkt.flow, DropReason::RouterDown, out);
            return;
        }
        auto dec = decapsulate(pkt);
        if (!dec)
        {
            drop(pkt.id, pkt.flow, DropReason::Ttl, out);
            return;
        }
        const MappingKey dst{dec->vn, dec->inner_dst};
        if (const VrfEntry *local = vrf_find(dst))
        {
            egress(pkt, *local, out);
            return;
        }
        if (cfg_.role == RouterRole::Border)
        {
            border_forward(pkt, dst, out);
            return;
        }
        if (cfg_.mode == ControlPlaneMode::Proactive)
        {
            drop(pkt.id, pkt.flow, DropReason::Unknown, out);
            return;
        }
        edge_inbound_miss(pkt, dst, now, out);
    }

    void Router::egress(const EncapPacket &pkt, const VrfEntry &local, Actions &out)
    {
        ++counters_.acl_hits;
        auto rule = acl_lookup(pkt.vn, pkt.group, local.group);
        const Action action = rule.value_or(cfg_.default_action);
        if (action == Action::Deny)
        {
            ++counters_.acl_drops;
            drop(pkt.id, pkt.flow, rule ? DropReason::Policy : DropReason::DefaultDeny, out);
            return;
        }
        ++counters_.packets_delivered;
        out.push_back(DeliverLocal{local.port, local.endpoint, pkt.id, pkt.flow, pkt.group});
    }

    void Router::solicit_sender(UnderlayAddr sender, const MappingKey &key, CauseId cause, Actions &out)
    {
        ++counters_.solicits_sent;
        send_control(sender, SolicitUpdateBody{{key}}, cause, out);
    }

    void Router::edge_inbound_miss(const EncapPacket &pkt, const MappingKey &dst, SimTime now, Actions &out)
    {
        if (tombstoned_keys_.contains(dst))
        {
            // the endpoint left and its new location is not known yet
            drop(pkt.id, pkt.flow, DropReason::InTransit, out);
            return;
        }

        MapCacheEntry *e = cache_.lookup(dst, now);
        if (e && e->state == CacheState::Fresh && e->locator != cfg_.locator && !unreachable_.contains(e->locator))
        {
            auto re = reencapsulate(pkt, e->locator, cfg_.locator);
            if (!re)
                drop(pkt.id, pkt.flow, DropReason::Ttl, out);
            else
                transmit(*re, out);
            const UnderlayAddr sender = pkt.outer_src;
            if (!is_border(sender) && sender != e->locator &&
                std::find(e->solicited.begin(), e->solicited.end(), sender) == e->solicited.end())
            {
                e->solicited.push_back(sender);
                solicit_sender(sender, e->key, e->cause, out);
            }
            return;
        }

        if (cfg_.unknown_solicit)
        {
            drop(pkt.id, pkt.flow, DropReason::Unknown, out);
            const UnderlayAddr sender = pkt.outer_src;
            if (is_border(sender))
                return;
            auto [it, fresh] = solicit_holddown_.try_emplace({sender, dst}, now);
            if (!fresh)
            {
                if (now - it->second < cfg_.solicit_holddown)
                    return;
                it->second = now;
            }
            solicit_sender(sender, dst, 0, out);
            return;
        }

        // without the mitigation unknown traffic follows the default route,
        // which is what lets a stale border entry bounce it back here
        if (cfg_.default_border.is_null())
        {
            drop(pkt.id, pkt.flow, DropReason::NoRoute, out);
            return;
        }
        auto re = reencapsulate(pkt, cfg_.default_border, cfg_.locator);
        if (!re)
            drop(pkt.id, pkt.flow, DropReason::Ttl, out);
        else
            transmit(*re, out);
    }

    // ---------------------------------------------------------------- L2 gateway

    void Router::arp_request(PortId port, const LocalEndpoint &src, const OverlayFrame &frame, SimTime now,
                             Actions &out)
    {
        (void)now;
        const MappingKey target{src.vn, frame.arp_target};
        if (const VrfEntry *local = vrf_find(target))
        {
            ++counters_.packets_delivered;
            out.push_back(DeliverLocal{local->port, local->endpoint, frame.id, frame.flow, src.group});
            return;
        }
        ArpTransaction tx;
        tx.port = port;
        tx.frame = frame;
        tx.vn = src.vn;
        tx.group = src.group;
        arp_pending_[frame.id] = tx;
        send_map_request({target}, frame.id, out, true);
    }

    bool Router::arp_reply(const ControlMessage &msg, SimTime now, Actions &out)
    {
        auto it = arp_pending_.find(msg.cause);
        if (msg.cause == 0 || it == arp_pending_.end())
            return false;
        ArpTransaction &tx = it->second;

        if (msg.kind() == MsgKind::NegativeMapReply)
        {
            drop(tx.frame.id, tx.frame.flow, DropReason::ArpUnresolved, out);
            arp_pending_.erase(it);
            return true;
        }
        const auto &reply = msg.as<MapReplyBody>();
        if (!tx.awaiting_locator)
        {
            if (!reply.l2_binding)
            {
                drop(tx.frame.id, tx.frame.flow, DropReason::ArpUnresolved, out);
                arp_pending_.erase(it);
                return true;
            }
            tx.target_mac = *reply.l2_binding;
            tx.awaiting_locator = true;
            send_map_request({MappingKey{tx.vn, tx.target_mac}}, msg.cause, out);
            return true;
        }
        if (reply.entry.locator != cfg_.locator && !unreachable_.contains(reply.entry.locator))
        {
            cache_.install_fresh(reply.entry, now, 0);
            arp_send(tx, reply.entry.locator, out);
        }
        else
        {
            drop(tx.frame.id, tx.frame.flow, DropReason::ArpUnresolved, out);
        }
        arp_pending_.erase(it);
        return true;
    }

    void Router::arp_send(ArpTransaction &tx, UnderlayAddr locator, Actions &out)
    {
        EncapPacket pkt = encapsulate(tx.target_mac, tx.frame.inner_src, tx.vn, tx.group, locator, cfg_.locator,
                                      cfg_.initial_ttl);
        pkt.payload_len = tx.frame.payload_len;
        pkt.id = tx.frame.id;
        pkt.flow = tx.frame.flow;
        transmit(pkt, out);
    }

    // ---------------------------------------------------------------- control plane

    void Router::handle_control(const ControlMessage &msg, SimTime now, Actions &out)
    {
        if (down_)
            return;
        ++counters_.control_in;
        switch (msg.kind())
        {
        case MsgKind::MapReply:
            if (!arp_reply(msg, now, out))
                on_map_reply(msg.as<MapReplyBody>(), msg.cause, now);
            break;
        case MsgKind::NegativeMapReply:
            if (!arp_reply(msg, now, out))
                on_negative(msg.as<NegativeMapReplyBody>(), now);
            break;
        case MsgKind::SolicitUpdate:
            handle_solicit(msg.as<SolicitUpdateBody>().keys, now, out, msg.cause);
            break;
        case MsgKind::SubscribeUpdate:
            if (cfg_.role == RouterRole::Border)
                synced_.apply(msg.as<SubscribeUpdateBody>());
            break;
        case MsgKind::AuthReply:
            on_auth_reply(msg.as<AuthReplyBody>(), now, out);
            break;
        case MsgKind::RuleDownload:
            on_rule_download(msg.as<RuleDownloadBody>());
            break;
        case MsgKind::ProactivePush:
            on_push(msg.as<ProactivePushBody>());
            break;
        default:
            break;
        }
    }

    void Router::on_map_reply(const MapReplyBody &reply, CauseId cause, SimTime now)
    {
        MapCacheEntry *e = cache_.find_exact(reply.queried);
        if (!e || e->state == CacheState::Fresh)
            return; // nothing asked for it
        const UnderlayAddr loc = reply.entry.locator;
        if (loc == cfg_.locator)
        {
            cache_.erase(reply.queried);
            return;
        }
        if (unreachable_.contains(loc))
            return; // keep resolving; the default route still works
        const MappingKey queried = reply.queried;
        if (reply.entry.key != queried)
            cache_.erase(queried);
        cache_.install_fresh(reply.entry, now, cause);
        clear_tombstone(queried);
    }

    void Router::on_negative(const NegativeMapReplyBody &neg, SimTime now)
    {
        MapCacheEntry *e = cache_.find_exact(neg.key);
        if (!e || e->state == CacheState::Fresh)
            return;
        cache_.install_negative(neg.key, now, e->retries_used);
    }

    void Router::handle_solicit(const std::vector<MappingKey> &keys, SimTime now, Actions &out, CauseId cause)
    {
        if (cfg_.role == RouterRole::Border || cfg_.mode == ControlPlaneMode::Proactive)
            return;
        std::vector<MappingKey> pull;
        for (const MappingKey &k : keys)
        {
            MapCacheEntry *e = cache_.find_exact(k);
            if (e && e->state == CacheState::Resolving)
                continue; // one outstanding request per key
            if (tombstoned_keys_.contains(k))
            {
                cache_.mark_resolving(k, now, std::nullopt).cause = cause;
                pull.push_back(k);
                continue;
            }
            if (!e)
                continue;
            std::optional<UnderlayAddr> stale;
            if (e->state == CacheState::Fresh)
                stale = e->locator;
            cache_.mark_resolving(k, now, stale).cause = cause;
            pull.push_back(k);
        }
        if (!pull.empty())
            send_map_request(std::move(pull), cause, out);
    }

    void Router::on_rule_download(const RuleDownloadBody &body)
    {
        if (group_refs_.contains({body.vn.value(), body.dst_group.value()}))
            install_rules(body.vn, body.dst_group, body.rules);
    }

    void Router::on_push(const ProactivePushBody &push)
    {
        for (const MappingEntry &e : push.entries)
        {
            std::uint64_t &seen = proactive_versions_[e.key];
            if (e.version < seen)
                continue;
            seen = e.version;
            if (const MappingEntry *prev = proactive_fib_.find(e.key); prev && prev->locator != cfg_.locator)
                --proactive_remote_;
            if (push.withdrawn)
            {
                proactive_fib_.erase(e.key);
                continue;
            }
            proactive_fib_.insert_or_assign(e.key, e);
            if (e.locator != cfg_.locator)
                ++proactive_remote_;
        }
    }

    // ---------------------------------------------------------------- underlay and lifecycle

    void Router::underlay_route_change(UnderlayAddr peer, bool reachable, SimTime now)
    {
        (void)now;
        if (!cfg_.underlay_tracking || peer == cfg_.locator)
            return;
        if (reachable)
        {
            unreachable_.erase(peer);
            return;
        }
        unreachable_.insert(peer);
        cache_.erase_locator(peer);
    }

    std::size_t Router::reboot(SimTime now)
    {
        (void)now;
        const std::size_t lost = arp_pending_.size();
        down_ = true;
        endpoints_.clear();
        ports_.clear();
        vrf_.clear();
        acl_.clear();
        group_refs_.clear();
        cache_.clear();
        tombstones_.clear();
        tombstoned_keys_.clear();
        solicit_holddown_.clear();
        arp_pending_.clear();
        synced_.clear();
        proactive_fib_.clear();
        proactive_versions_.clear();
        proactive_remote_ = 0;
        return lost;
    }

    void Router::restart(SimTime now)
    {
        (void)now;
        down_ = false;
    }

    void Router::add_external_prefix(const OverlayAddr &prefix)
    {
        // external routes are VN-agnostic; stored under VN 0
        external_.insert_or_assign({Vn{}, prefix}, prefix);
    }

    // ---------------------------------------------------------------- inspection

    std::size_t Router::fib_entries(SimTime now) const
    {
        if (cfg_.role == RouterRole::Border)
            return synced_.size() + external_.size();
        if (cfg_.mode == ControlPlaneMode::Proactive)
            return proactive_remote_ + vrf_.size();
        return cache_.fresh_count(now) + vrf_.size();
    }

    std::vector<std::pair<Vn, GroupId>> Router::local_groups() const
    {
        std::vector<std::pair<Vn, GroupId>> v;
        for (const auto &[k, n] : group_refs_)
            v.emplace_back(Vn(k.first), GroupId(k.second));
        return v;
    }

    std::optional<GroupId> Router::local_group_of(const MappingKey &key) const
    {
        const VrfEntry *e = vrf_find(key);
        if (!e)
            return std::nullopt;
        return e->group;
    }

    std::optional<OnboardPhase> Router::phase_of(EndpointId id) const
    {
        auto it = endpoints_.find(id);
        if (it == endpoints_.end())
            return std::nullopt;
        return it->second.phase;
    }
}
