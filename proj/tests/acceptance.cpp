// End-to-end acceptance checks. One line per criterion; exit status is the
// number of failed criteria.

#include "sda/cli/presets.hpp"
#include "sda/cli/report.hpp"
#include "sda/routing/routing_server.hpp"
#include "sda/sim/rng.hpp"
#include "sda/sim/simulation.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace sda;

namespace
{
    int failures = 0;

    void verdict(const char *id, bool pass, const std::string &what, const std::string &detail)
    {
        std::cout << (pass ? "[PASS] " : "[FAIL] ") << id << ' ' << what << ": " << detail << std::endl;
        if (!pass)
            ++failures;
    }

    Scenario preset(const std::string &name)
    {
        LoadResult r = load_preset(name);
        if (!r.ok())
        {
            std::string msg = "preset " + name + " invalid:";
            for (const auto &e : r.errors)
                msg += " " + e.to_string();
            throw std::runtime_error(msg);
        }
        return *r.scenario;
    }

    MetricsSeries run(const Scenario &sc, const std::function<void(Simulation &)> &inspect = {})
    {
        const auto t0 = std::chrono::steady_clock::now();
        Simulation sim(sc);
        MetricsSeries m = sim.run();
        if (inspect)
            inspect(sim);
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::cerr << "  ran " << sc.name << " (" << mode_name(sc.control_plane) << ") in " << s << " s, " << m.events
                  << " events" << (m.aborted ? ", ABORTED: " + m.abort_reason : "") << "\n";
        return m;
    }

    std::string fmt(const char *f, double a)
    {
        char buf[128];
        std::snprintf(buf, sizeof buf, f, a);
        return buf;
    }

    std::string fmt(const char *f, double a, double b)
    {
        char buf[160];
        std::snprintf(buf, sizeof buf, f, a, b);
        return buf;
    }

    // ------------------------------------------------------------ AC1, AC2

    void handover_and_signaling(MetricsSeries &reactive_out, MetricsSeries &proactive_out)
    {
        Scenario sc = preset("warehouse");
        sc.control_plane = ControlPlaneMode::Reactive;
        reactive_out = run(sc);
        sc.control_plane = ControlPlaneMode::Proactive;
        proactive_out = run(sc);
        const MetricsSeries &re = reactive_out;
        const MetricsSeries &pro = proactive_out;

        const HandoverStats hr = handover_stats(re);
        const HandoverStats hp = handover_stats(pro);
        const double ratio = hr.mean_us > 0 ? hp.mean_us / hr.mean_us : 0;
        std::ostringstream d;
        d << "reactive mean " << fmt("%.3f", hr.mean_us / 1000) << " ms over " << hr.count << " moves, proactive mean "
          << fmt("%.3f", hp.mean_us / 1000) << " ms over " << hp.count << " moves, ratio " << fmt("%.2f", ratio)
          << ", variance " << fmt("%.3g vs %.3g", hp.variance, hr.variance) << " us^2";
        verdict("AC1", !re.aborted && !pro.aborted && hr.count > 0 && hp.count > 0 && ratio >= 5 &&
                           hp.variance > hr.variance,
                "handover delay ratio >= 5 and proactive variance higher", d.str());

        // per-move message audit; moves whose timeout window ends after the run are excluded
        const SimTime horizon = re.duration - sc.traffic[0].timeout_us;
        std::size_t checked_re = 0, bad_re = 0, with_stale = 0;
        for (const MoveRecord &mv : re.moves)
        {
            if (mv.detach >= horizon)
                continue;
            ++checked_re;
            const auto got = mv.signaling[static_cast<std::size_t>(MsgKind::MapRegister)] +
                             mv.signaling[static_cast<std::size_t>(MsgKind::SolicitUpdate)];
            if (got != 2 + mv.stale_senders.size())
                ++bad_re;
            with_stale += !mv.stale_senders.empty();
        }
        std::size_t checked_pro = 0, bad_pro = 0;
        for (const MoveRecord &mv : pro.moves)
        {
            if (mv.detach >= horizon)
                continue;
            ++checked_pro;
            if (mv.signaling[static_cast<std::size_t>(MsgKind::ProactivePush)] != sc.topology.edge_count)
                ++bad_pro;
        }
        std::ostringstream d2;
        d2 << "reactive " << checked_re - bad_re << "/" << checked_re << " moves = 2 + stale senders (" << with_stale
           << " with stale senders), proactive " << checked_pro - bad_pro << "/" << checked_pro << " moves = "
           << sc.topology.edge_count << " pushes";
        verdict("AC2", checked_re > 0 && checked_pro > 0 && bad_re == 0 && bad_pro == 0,
                "per-move signaling counts exact", d2.str());
    }

    // ------------------------------------------------------------ AC3

    void fib_reduction()
    {
        const Scenario b = preset("campus-b");
        const Scenario a = preset("campus-a");
        const FibStats fb = fib_stats(run(b), b.diurnal);
        const FibStats fa = fib_stats(run(a), a.diurnal);

        std::vector<std::pair<double, double>> sweep; // locality -> reduction
        for (double locality : {0.0, 0.3, 0.6})
        {
            Scenario v = b;
            v.name = "campus-b-locality";
            v.traffic[0].locality = locality;
            sweep.emplace_back(locality, fib_stats(run(v), v.diurnal).reduction);
        }
        bool monotone = true;
        for (std::size_t i = 1; i < sweep.size(); ++i)
            monotone = monotone && sweep[i].second > sweep[i - 1].second;

        std::ostringstream d;
        d << "campus-b " << fmt("%.1f%%", 100 * fb.reduction) << " (border day " << fmt("%.1f", fb.border_day)
          << " > night " << fmt("%.1f", fb.border_night) << "), campus-a " << fmt("%.1f%%", 100 * fa.reduction)
          << ", locality sweep";
        for (const auto &[l, r] : sweep)
            d << fmt(" %.1f->%.1f%%", l, 100 * r);
        verdict("AC3",
                fb.reduction >= 0.70 && fb.border_day > fb.border_night && fa.reduction < fb.reduction && monotone,
                "FIB reduction >= 70%, day > night, monotone in locality", d.str());
    }

    // ------------------------------------------------------------ AC4

    OverlayAddr random_v4(Rng &rng, unsigned len)
    {
        return OverlayAddr::ipv4(static_cast<std::uint32_t>(rng.next()), len).truncated(len);
    }

    double median_visits(std::size_t entries, Rng &rng)
    {
        const UnderlayAddr loc(0x0A000001);
        RoutingServer rs(UnderlayAddr(0xC0000201));
        std::vector<ControlOut> out;
        std::vector<OverlayAddr> stored;
        while (rs.entry_count() < entries)
        {
            MappingEntry e;
            e.key = {Vn(1), random_v4(rng, 32)};
            e.locator = loc;
            rs.register_mapping(e, loc, 0, out);
            stored.push_back(e.key.addr);
            out.clear();
        }
        std::vector<unsigned> visits;
        for (int i = 0; i < 1001; ++i)
        {
            const OverlayAddr q = i % 2 ? stored[rng.index(stored.size())] : random_v4(rng, 32);
            rs.resolve({Vn(1), q});
            visits.push_back(rs.query_stats().node_visits);
        }
        std::nth_element(visits.begin(), visits.begin() + 500, visits.end());
        return visits[500];
    }

    void routing_server_flatness()
    {
        Rng rng(derive_seed(2024, 4));
        const double small = median_visits(10, rng);
        const double large = median_visits(10000, rng);

        // LPM against a linear scan on randomized stores
        std::size_t mismatches = 0, queries = 0;
        for (int store = 0; store < 1000; ++store)
        {
            RoutingServer rs(UnderlayAddr(0xC0000201));
            std::vector<ControlOut> out;
            std::map<MappingKey, UnderlayAddr> truth;
            const std::size_t n = 1 + rng.index(40);
            for (std::size_t i = 0; i < n; ++i)
            {
                // few distinct top bits so prefixes nest
                const auto base = static_cast<std::uint32_t>(rng.index(4)) << 30 |
                                  static_cast<std::uint32_t>(rng.next() & 0x3FFFFFFF);
                const unsigned len = static_cast<unsigned>(rng.index(33));
                MappingEntry e;
                e.key = {Vn(1 + rng.index(2)), OverlayAddr::ipv4(base, len).truncated(len)};
                e.locator = UnderlayAddr(0x0A000001 + static_cast<std::uint32_t>(rng.index(8)));
                rs.register_mapping(e, e.locator, 0, out);
                truth[e.key] = e.locator;
            }
            for (int q = 0; q < 20; ++q)
            {
                const Vn vn(1 + rng.index(2));
                const auto addr = static_cast<std::uint32_t>(rng.index(4)) << 30 |
                                  static_cast<std::uint32_t>(rng.next() & 0x3FFFFFFF);
                const OverlayAddr host = OverlayAddr::ipv4(addr);
                const MappingKey *best = nullptr;
                for (const auto &[k, l] : truth)
                {
                    if (k.vn == vn && k.addr.contains(host) && (!best || k.addr.prefix_len() > best->addr.prefix_len()))
                        best = &k;
                }
                const auto got = rs.resolve({vn, host});
                ++queries;
                if (const auto *reply = std::get_if<MapReplyBody>(&got))
                {
                    if (!best || reply->entry.key != *best || reply->entry.locator != truth[*best])
                        ++mismatches;
                }
                else if (best)
                {
                    ++mismatches;
                }
            }
        }
        std::ostringstream d;
        d << "median visits " << small << " at 10 entries, " << large << " at 10000; " << mismatches << "/" << queries
          << " LPM mismatches over 1000 stores";
        verdict("AC4", small <= 33 && large <= 33 && std::abs(large - small) <= 33 && mismatches == 0,
                "routing-server visits bounded and LPM equals linear scan", d.str());
    }

    // ------------------------------------------------------------ AC5

    void loop_containment()
    {
        const Scenario on = preset("reboot");
        const SimTime bound = 2 * (on.topology.link_delay_us + on.topology.control_delay_us);
        const MetricsSeries m_on = run(on);

        // every endpoint behind the rebooted router receives a flow in this preset
        SimTime worst = 0;
        std::size_t open = 0;
        for (const LossWindow &w : m_on.loops.loss_windows)
        {
            if (!w.first_delivery)
            {
                ++open;
                continue;
            }
            worst = std::max(worst, *w.first_delivery - w.registered);
        }

        Scenario off = on;
        off.name = "reboot-unmitigated";
        off.router.underlay_tracking = false;
        off.router.unknown_solicit = false;
        const MetricsSeries m_off = run(off);
        const auto ttl_drops = m_off.conservation.dropped[static_cast<std::size_t>(DropReason::Ttl)];

        std::ostringstream d;
        d << "mitigated: max crossings " << m_on.loops.max_crossings << ", " << m_on.loops.loss_windows.size()
          << " loss windows, worst " << worst << " us (bound " << bound << " us), " << open << " unclosed; unmitigated: "
          << m_off.loops.looping_packets << " looping packets, max hops " << m_off.loops.max_hops << " (TTL "
          << off.router.initial_ttl << "), " << ttl_drops << " TTL drops, in flight at end "
          << m_off.conservation.in_flight;
        const bool mitigated_ok = m_on.loops.max_crossings <= 2 && !m_on.loops.loss_windows.empty() && open == 0 &&
                                  worst <= bound && m_on.conservation.balanced();
        const bool unmitigated_ok = m_off.loops.looping_packets > 0 && m_off.loops.max_hops <= off.router.initial_ttl &&
                                    ttl_drops > 0 && m_off.conservation.balanced();
        verdict("AC5", mitigated_ok && unmitigated_ok, "reboot loop contained, unmitigated loop ends by TTL", d.str());
    }

    // ------------------------------------------------------------ AC6

    void egress_economy()
    {
        const Scenario sc = preset("acl");
        std::size_t edges_ok = 0, egress_total = 0, ingress_total = 0;
        const MetricsSeries m = run(sc, [&](Simulation &sim) {
            std::vector<ConnectivityRule> rules;
            sim.policy_server().for_each_rule([&](const ConnectivityRule &r) { rules.push_back(r); });
            for (std::uint32_t i = 0; i < sim.edge_count(); ++i)
            {
                const Router &r = sim.router(i);
                std::set<std::pair<Vn, GroupId>> local;
                for (const auto &g : r.local_groups())
                    local.insert(g);
                std::size_t ingress = 0;
                for (const ConnectivityRule &rule : rules)
                    ingress += local.contains({rule.vn, rule.src_group});
                egress_total += r.acl_rule_count();
                ingress_total += ingress;
                edges_ok += r.acl_rule_count() < ingress;
            }
        });
        const SimTime t = m.duration;
        const double early = drop_permille(m, 0, t / 10 + 1);
        const double steady = drop_permille(m, t / 2, t + 1);
        std::ostringstream d;
        d << "drop permille " << fmt("%.2f", early) << " in the first tenth, " << fmt("%.3f", steady)
          << " in the second half; egress rules " << egress_total << " vs ingress-equivalent " << ingress_total
          << " over " << sc.topology.edge_count << " edges (" << edges_ok << " edges strictly smaller)";
        verdict("AC6", steady < 2 && early > steady && edges_ok == sc.topology.edge_count,
                "steady ACL drops < 2 permille and egress stores fewer rules", d.str());
    }

    // ------------------------------------------------------------ AC7

    void l2_conversion()
    {
        const MetricsSeries m = run(preset("arp"));
        std::size_t remote = 0, exact = 0, resolved = 0;
        for (const ArpRecord &a : m.arps)
        {
            if (a.target != ArpTarget::Remote)
                continue;
            ++remote;
            exact += a.lookups == 2;
            resolved += a.delivered;
        }
        std::ostringstream d;
        d << m.underlay_broadcasts << " underlay broadcasts, " << exact << "/" << remote
          << " remote resolutions with exactly 2 lookups, " << resolved << " answered";
        verdict("AC7", m.underlay_broadcasts == 0 && remote > 0 && exact == remote && resolved == remote,
                "no underlay broadcast and 2 lookups per remote ARP", d.str());
    }

    // ------------------------------------------------------------ AC8

    void determinism(const MetricsSeries &warehouse_reactive, const MetricsSeries &warehouse_proactive)
    {
        std::vector<std::string> differing;
        std::size_t compared = 0;
        for (const std::string &name : preset_names())
        {
            Scenario sc = preset(name);
            if (name == "warehouse")
            {
                for (const MetricsSeries *first : {&warehouse_reactive, &warehouse_proactive})
                {
                    sc.control_plane = first->mode;
                    ++compared;
                    if (render_csvs(*first) != render_csvs(run(sc)))
                        differing.push_back(name + "/" + mode_name(sc.control_plane));
                }
                continue;
            }
            ++compared;
            const CsvSet a = render_csvs(run(sc));
            const CsvSet b = render_csvs(run(sc));
            if (a != b)
                differing.push_back(name);
        }
        std::string d = std::to_string(compared - differing.size()) + "/" + std::to_string(compared) +
                        " preset runs byte-identical";
        for (const std::string &n : differing)
            d += ", differs: " + n;
        verdict("AC8", differing.empty(), "same seed gives identical CSVs", d);
    }

    // ------------------------------------------------------------ AC9

    void onboarding_order()
    {
        std::size_t complete = 0, ordered = 0, violations = 0;
        for (std::uint64_t seed : {13, 14, 15})
        {
            Scenario sc = preset("onboarding");
            sc.seed = seed;
            const MetricsSeries m = run(sc);
            for (const OnboardTrace &t : m.onboardings)
            {
                // partial traces (rejected credentials, or interrupted by a move) must still be ordered
                if (t.address != 0 && !(t.auth_request < t.address))
                    ++violations;
                if (t.registration != 0 && (t.address == 0 || !(t.address < t.registration)))
                    ++violations;
                if (t.registration == 0)
                    continue;
                ++complete;
                ordered += t.auth_request < t.address && t.address < t.registration;
            }
        }
        std::ostringstream d;
        d << ordered << "/" << complete << " completed onboardings ordered auth < address < registration, "
          << violations << " violations in partial traces";
        verdict("AC9", complete >= 1000 && ordered == complete && violations == 0,
                "onboarding order in every trace", d.str());
    }
}

int main()
{
    try
    {
        MetricsSeries warehouse_reactive, warehouse_proactive;
        handover_and_signaling(warehouse_reactive, warehouse_proactive);
        fib_reduction();
        routing_server_flatness();
        loop_containment();
        egress_economy();
        l2_conversion();
        determinism(warehouse_reactive, warehouse_proactive);
        onboarding_order();
    }
    catch (const std::exception &e)
    {
        std::cout << "[FAIL] acceptance run aborted: " << e.what() << std::endl;
        return 100;
    }
    std::cout << (failures == 0 ? "all acceptance criteria passed" : std::to_string(failures) + " criteria failed")
              << std::endl;
    return failures;
}
