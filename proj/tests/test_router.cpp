#include "doctest.h"

#include "sda/router/router.hpp"
#include "support.hpp"

#include <algorithm>

using namespace sda;

namespace
{
    const UnderlayAddr kRs{0xC0000201};
    const UnderlayAddr kPs{0xC0000202};
    const UnderlayAddr kE1{0xAC100001};
    const UnderlayAddr kE2{0xAC100002};
    const UnderlayAddr kE3{0xAC100003};
    const UnderlayAddr kB1{0xAC1F0001};

    RouterConfig edge_config(UnderlayAddr self = kE1)
    {
        RouterConfig c;
        c.locator = self;
        c.mapping_server = kRs;
        c.policy_server = kPs;
        c.default_border = kB1;
        c.borders = {kB1};
        return c;
    }

    template <class T>
    std::vector<const T *> all(const Actions &a)
    {
        std::vector<const T *> v;
        for (const RouterAction &x : a)
        {
            if (auto *p = std::get_if<T>(&x))
                v.push_back(p);
        }
        return v;
    }

    const ControlOut *control(const Actions &a, MsgKind k)
    {
        for (const ControlOut *c : all<ControlOut>(a))
        {
            if (c->msg.kind() == k)
                return c;
        }
        return nullptr;
    }

    AuthReplyBody auth_ok(EndpointId id, std::uint32_t vn, std::uint16_t group, std::vector<ConnectivityRule> rules)
    {
        return AuthReplyBody{id, true, AuthResult{id, Vn(vn), GroupId(group), std::move(rules)}, false};
    }

    /// Runs the full onboarding exchange for one endpoint and returns its address.
    OverlayAddr onboard(Router &r, EndpointId id, PortId port, std::uint32_t vn, std::uint16_t group,
                        std::vector<ConnectivityRule> rules, SimTime now = 0)
    {
        Actions a;
        r.onboard({id, "t", OverlayAddr::mac(0x020000000000ull + id), std::nullopt}, port, now, a);
        a.clear();
        r.handle_control({kPs, 0, auth_ok(id, vn, group, std::move(rules))}, now, a);
        const OverlayAddr ip = test::v4(0x0A000000 + id);
        a.clear();
        r.on_address_allocated(id, ip, now, a);
        return ip;
    }

    EncapPacket packet_to(const OverlayAddr &dst, UnderlayAddr from, UnderlayAddr to, std::uint16_t group = 1,
                          std::uint32_t vn = 1)
    {
        EncapPacket p = encapsulate(dst, test::v4(0x0B000001), Vn(vn), GroupId(group), to, from);
        p.id = 1;
        return p;
    }
}

TEST_SUITE("router")
{
    TEST_CASE("onboarding runs authenticate, rules, address, register in that order")
    {
        Router r(edge_config());
        Actions a;
        r.onboard({7, "tok", OverlayAddr::mac(0x020000000007), std::nullopt}, 3, 0, a);
        const ControlOut *auth = control(a, MsgKind::AuthRequest);
        REQUIRE(auth);
        CHECK(auth->to == kPs);
        CHECK(all<RequestAddress>(a).empty());
        CHECK(*r.phase_of(7) == OnboardPhase::Authenticating);

        // traffic from a port that has not finished onboarding is dropped
        a.clear();
        r.handle_outbound(3, OverlayFrame{1, 0, FrameKind::Unicast, test::v4(1), test::v4(2), {}, 10}, 0, a);
        REQUIRE(all<DropPacket>(a).size() == 1);
        CHECK(all<DropPacket>(a)[0]->reason == DropReason::NotOnboarded);

        a.clear();
        r.handle_control({kPs, 0, auth_ok(7, 1, 5, {{Vn(1), GroupId(4), GroupId(5), Action::Allow}})}, 10, a);
        CHECK(*r.phase_of(7) == OnboardPhase::RulesInstalled);
        REQUIRE(all<RequestAddress>(a).size() == 1);
        CHECK_FALSE(control(a, MsgKind::MapRegister));
        CHECK(r.acl_rule_count() == 1);

        a.clear();
        r.on_address_allocated(7, test::v4(0x0A000007), 20, a);
        const ControlOut *reg = control(a, MsgKind::MapRegister);
        REQUIRE(reg);
        CHECK(reg->to == kRs);
        const auto &body = reg->msg.as<MapRegisterBody>();
        CHECK(body.locator == kE1);
        CHECK(body.records.size() == 2); // IPv4 + MAC
        CHECK(*r.phase_of(7) == OnboardPhase::Registered);

        // the phases were announced in order
        std::vector<OnboardPhase> seen;
        for (const PhaseChange *p : all<PhaseChange>(a))
            seen.push_back(p->phase);
        CHECK(seen == std::vector<OnboardPhase>{OnboardPhase::Addressed, OnboardPhase::Registered});
    }

    TEST_CASE("a failed authentication quarantines and never registers")
    {
        Router r(edge_config());
        Actions a;
        r.onboard({7, "bad", std::nullopt, std::nullopt}, 1, 0, a);
        a.clear();
        r.handle_control({kPs, 0, AuthReplyBody{7, false, {}, false}}, 1, a);
        CHECK(*r.phase_of(7) == OnboardPhase::Quarantined);
        CHECK(all<RequestAddress>(a).empty());
        a.clear();
        r.on_address_allocated(7, test::v4(1), 2, a);
        CHECK_FALSE(control(a, MsgKind::MapRegister));
        CHECK(r.acl_rule_count() == 0);
    }

    TEST_CASE("the ACL holds only rules towards local groups and is enforced on egress")
    {
        Router r(edge_config());
        const std::vector<ConnectivityRule> to5{{Vn(1), GroupId(4), GroupId(5), Action::Allow},
                                                {Vn(1), GroupId(6), GroupId(5), Action::Deny}};
        const OverlayAddr ip = onboard(r, 1, 1, 1, 5, to5);
        CHECK(r.acl_rule_count() == 2);
        CHECK(r.acl_lookup(Vn(1), GroupId(4), GroupId(5)) == Action::Allow);
        CHECK_FALSE(r.acl_lookup(Vn(1), GroupId(5), GroupId(4)));

        Actions a;
        r.handle_inbound(packet_to(ip, kE2, kE1, 4), 0, a);
        CHECK(all<DeliverLocal>(a).size() == 1);
        a.clear();
        r.handle_inbound(packet_to(ip, kE2, kE1, 6), 0, a);
        REQUIRE(all<DropPacket>(a).size() == 1);
        CHECK(all<DropPacket>(a)[0]->reason == DropReason::Policy);
        a.clear();
        r.handle_inbound(packet_to(ip, kE2, kE1, 9), 0, a);
        CHECK(all<DropPacket>(a)[0]->reason == DropReason::DefaultDeny);
        CHECK(r.counters().acl_hits == 3);
        CHECK(r.counters().acl_drops == 2);

        // the last endpoint of the group leaves: its rules go with it
        a.clear();
        r.detach(1, 0, a);
        CHECK(r.acl_rule_count() == 0);
        CHECK(all<SessionEnded>(a).size() == 1);
    }

    TEST_CASE("rule downloads replace the set only for groups present")
    {
        Router r(edge_config());
        onboard(r, 1, 1, 1, 5, {{Vn(1), GroupId(4), GroupId(5), Action::Allow}});
        Actions a;
        r.handle_control({kPs, 0, RuleDownloadBody{Vn(1), GroupId(5), {{Vn(1), GroupId(4), GroupId(5), Action::Deny}}, 2}},
                         0, a);
        CHECK(r.acl_lookup(Vn(1), GroupId(4), GroupId(5)) == Action::Deny);
        r.handle_control({kPs, 0, RuleDownloadBody{Vn(1), GroupId(8), {{Vn(1), GroupId(4), GroupId(8), Action::Allow}}, 3}},
                         0, a);
        CHECK_FALSE(r.acl_lookup(Vn(1), GroupId(4), GroupId(8)));
    }

    TEST_CASE("a cache miss asks the mapping server once and uses the default route meanwhile")
    {
        Router r(edge_config());
        onboard(r, 1, 1, 1, 5, {});
        const OverlayFrame f{1, 0, FrameKind::Unicast, test::v4(0x0A000001), test::v4(0x0A0000FF), {}, 64};
        Actions a;
        r.handle_outbound(1, f, 0, a);
        const ControlOut *req = control(a, MsgKind::MapRequest);
        REQUIRE(req);
        CHECK(req->to == kRs);
        REQUIRE(all<SendPacket>(a).size() == 1);
        CHECK(all<SendPacket>(a)[0]->pkt.outer_dst == kB1);
        CHECK(all<SendPacket>(a)[0]->pkt.group == GroupId(5));

        a.clear();
        r.handle_outbound(1, f, 10, a);
        CHECK_FALSE(control(a, MsgKind::MapRequest));
        CHECK(all<SendPacket>(a)[0]->pkt.outer_dst == kB1);

        const MappingKey k{Vn(1), test::v4(0x0A0000FF)};
        r.handle_control({kRs, 0, MapReplyBody{k, {k, kE2, GroupId(5), 0, 1}, std::nullopt}}, 20, a);
        a.clear();
        r.handle_outbound(1, f, 30, a);
        CHECK(all<SendPacket>(a)[0]->pkt.outer_dst == kE2);
        CHECK(r.fib_entries(30) == 3); // two local keys + one cached
    }

    TEST_CASE("stale traffic is re-forwarded and its sender solicited once")
    {
        Router r(edge_config());
        const MappingKey k{Vn(1), test::v4(0x0A0000FF)};
        Actions a;
        // learn the new location after a solicit from the routing server
        r.map_cache().mark_resolving(k, 0, std::nullopt);
        r.handle_control({kRs, 5, MapReplyBody{k, {k, kE3, GroupId(1), 0, 2}, std::nullopt}}, 0, a);

        for (int i = 0; i < 3; ++i)
        {
            a.clear();
            r.handle_inbound(packet_to(k.addr, kE2, kE1), 10 + i, a);
            REQUIRE(all<SendPacket>(a).size() == 1);
            CHECK(all<SendPacket>(a)[0]->pkt.outer_dst == kE3);
            CHECK(all<SendPacket>(a)[0]->pkt.ttl == kInitialTtl - 1);
            const ControlOut *sol = control(a, MsgKind::SolicitUpdate);
            CHECK(static_cast<bool>(sol) == (i == 0));
            if (sol)
            {
                CHECK(sol->to == kE2);
                CHECK(sol->msg.cause == 5);
            }
        }
        // borders keep a synced FIB and are never solicited
        a.clear();
        r.handle_inbound(packet_to(k.addr, kB1, kE1), 20, a);
        CHECK_FALSE(control(a, MsgKind::SolicitUpdate));
    }

    TEST_CASE("unknown inbound traffic is dropped and solicited with a holddown")
    {
        RouterConfig c = edge_config();
        c.solicit_holddown = 1000;
        Router r(c);
        const OverlayAddr dst = test::v4(0x0A0000FF);
        int solicits = 0;
        for (SimTime t : {0, 10, 999, 1000, 1500, 2000})
        {
            Actions a;
            r.handle_inbound(packet_to(dst, kE2, kE1), t, a);
            REQUIRE(all<DropPacket>(a).size() == 1);
            CHECK(all<DropPacket>(a)[0]->reason == DropReason::Unknown);
            solicits += control(a, MsgKind::SolicitUpdate) != nullptr;
        }
        CHECK(solicits == 3); // at 0, 1000, 2000
    }

    TEST_CASE("without the mitigation unknown traffic bounces to the default border")
    {
        RouterConfig c = edge_config();
        c.unknown_solicit = false;
        Router r(c);
        Actions a;
        r.handle_inbound(packet_to(test::v4(0x0A0000FF), kB1, kE1), 0, a);
        REQUIRE(all<SendPacket>(a).size() == 1);
        CHECK(all<SendPacket>(a)[0]->pkt.outer_dst == kB1);
    }

    TEST_CASE("a departed endpoint is tombstoned, then withdrawn after the grace period")
    {
        RouterConfig c = edge_config();
        c.departure_grace = 500;
        Router r(c);
        const OverlayAddr ip = onboard(r, 1, 1, 1, 5, {});
        Actions a;
        r.detach(1, 100, a);
        REQUIRE(all<ArmTimer>(a).size() == 1);
        CHECK(all<ArmTimer>(a)[0]->at == 600);

        a.clear();
        r.handle_inbound(packet_to(ip, kE2, kE1), 200, a);
        CHECK(all<DropPacket>(a)[0]->reason == DropReason::InTransit);

        a.clear();
        r.on_timer(1, 600, a);
        const ControlOut *wd = control(a, MsgKind::MapRegister);
        REQUIRE(wd);
        CHECK(wd->msg.as<MapRegisterBody>().withdraw);
        CHECK(wd->msg.as<MapRegisterBody>().records.size() == 2);
    }

    TEST_CASE("ARP becomes two unicast lookups and one unicast packet")
    {
        Router r(edge_config());
        onboard(r, 1, 1, 1, 5, {});
        const OverlayAddr target = test::v4(0x0A0000FF);
        const OverlayAddr target_mac = OverlayAddr::mac(0x0200000000FF);
        OverlayFrame f{9, 0, FrameKind::ArpRequest, OverlayAddr::mac(0x020000000001), OverlayAddr::broadcast_mac(),
                       target, 28};
        Actions a;
        r.handle_outbound(1, f, 0, a);
        const ControlOut *q1 = control(a, MsgKind::MapRequest);
        REQUIRE(q1);
        CHECK(q1->msg.as<MapRequestBody>().want_l2_binding);
        CHECK(all<SendPacket>(a).empty());
        CHECK(r.held_frames() == 1);

        const MappingKey ipk{Vn(1), target};
        a.clear();
        r.handle_control({kRs, 9, MapReplyBody{ipk, {ipk, kE2, GroupId(5), 0, 1}, target_mac}}, 1, a);
        const ControlOut *q2 = control(a, MsgKind::MapRequest);
        REQUIRE(q2);
        CHECK(q2->msg.as<MapRequestBody>().keys.at(0).addr == target_mac);

        const MappingKey mk{Vn(1), target_mac};
        a.clear();
        r.handle_control({kRs, 9, MapReplyBody{mk, {mk, kE2, GroupId(5), 0, 2}, std::nullopt}}, 2, a);
        REQUIRE(all<SendPacket>(a).size() == 1);
        CHECK(all<SendPacket>(a)[0]->pkt.outer_dst == kE2);
        CHECK_FALSE(all<SendPacket>(a)[0]->pkt.inner_dst.is_broadcast_mac());
        CHECK(r.held_frames() == 0);

        // other broadcasts are never flooded
        a.clear();
        r.handle_outbound(1, OverlayFrame{10, 0, FrameKind::Broadcast, f.inner_src, OverlayAddr::broadcast_mac(), {}, 64}, 3,
                          a);
        CHECK(all<DropPacket>(a)[0]->reason == DropReason::UnsupportedBroadcast);
    }

    TEST_CASE("proactive edges route from pushes and drop unknown inbound traffic")
    {
        RouterConfig c = edge_config();
        c.mode = ControlPlaneMode::Proactive;
        Router r(c);
        onboard(r, 1, 1, 1, 5, {});
        const MappingKey k{Vn(1), test::v4(0x0A0000FF)};
        Actions a;
        r.handle_control({UnderlayAddr{9}, 0, ProactivePushBody{{{k, kE2, GroupId(5), 0, 4}}, false}}, 0, a);
        CHECK(r.fib_entries(0) == 3);
        // an older version never overrides a newer one
        r.handle_control({UnderlayAddr{9}, 0, ProactivePushBody{{{k, kE3, GroupId(5), 0, 3}}, false}}, 0, a);
        CHECK(r.proactive_fib().find(k)->locator == kE2);

        a.clear();
        r.handle_outbound(1, OverlayFrame{1, 0, FrameKind::Unicast, test::v4(0x0A000001), k.addr, {}, 64}, 0, a);
        CHECK(all<SendPacket>(a)[0]->pkt.outer_dst == kE2);
        CHECK_FALSE(control(a, MsgKind::MapRequest));

        a.clear();
        r.handle_inbound(packet_to(test::v4(0x0A0000EE), kE2, kE1), 0, a);
        CHECK(all<DropPacket>(a)[0]->reason == DropReason::Unknown);
        a.clear();
        r.handle_control({kRs, 0, SolicitUpdateBody{{k}}}, 0, a);
        CHECK(a.empty());
    }

    TEST_CASE("reboot forgets everything and ignores input until restart")
    {
        Router r(edge_config());
        onboard(r, 1, 1, 1, 5, {{Vn(1), GroupId(5), GroupId(5), Action::Allow}});
        CHECK(r.fib_entries(0) == 2);
        r.reboot(0);
        CHECK(r.is_down());
        CHECK(r.fib_entries(0) == 0);
        CHECK(r.acl_rule_count() == 0);
        Actions a;
        r.onboard({2, "t", std::nullopt, std::nullopt}, 1, 0, a);
        CHECK(a.empty());
        r.restart(1);
        r.onboard({2, "t", std::nullopt, std::nullopt}, 1, 1, a);
        CHECK(control(a, MsgKind::AuthRequest));
    }

    TEST_CASE("borders forward from the synced FIB, refuse unreachable locators and exit external prefixes")
    {
        RouterConfig c = edge_config(kB1);
        c.role = RouterRole::Border;
        c.default_border = {};
        Router b(c);
        b.add_external_prefix(test::v4(0x08000000, 8));
        const MappingKey k{Vn(1), test::v4(0x0A000005)};
        Actions a;
        b.handle_control({kRs, 0, SubscribeUpdateBody{{k, kE2, GroupId(1), 0, 1}, false}}, 0, a);
        CHECK(b.fib_entries(0) == 2);

        b.handle_inbound(packet_to(k.addr, kE1, kB1), 0, a);
        CHECK(all<SendPacket>(a).back()->pkt.outer_dst == kE2);

        a.clear();
        b.handle_inbound(packet_to(test::v4(0x08080808), kE1, kB1), 0, a);
        CHECK(all<ExternalExit>(a).size() == 1);

        a.clear();
        b.underlay_route_change(kE2, false, 0);
        b.handle_inbound(packet_to(k.addr, kE1, kB1), 0, a);
        CHECK(all<DropPacket>(a)[0]->reason == DropReason::LoopGuard);
    }
}
