#include "doctest.h"

#include "sda/cli/presets.hpp"
#include "sda/cli/report.hpp"
#include "sda/cli/scenario_file.hpp"
#include "sda/sim/event_queue.hpp"

#include <algorithm>

using namespace sda;
using nlohmann::json;

namespace
{
    json base()
    {
        return json::parse(*preset_text("minimal"));
    }

    bool has_issue(const LoadResult &r, const std::string &where, const std::string &fragment)
    {
        return std::any_of(r.errors.begin(), r.errors.end(), [&](const ScenarioIssue &e) {
            return e.where == where && e.message.find(fragment) != std::string::npos;
        });
    }
}

TEST_SUITE("scenario")
{
    TEST_CASE("every bundled preset loads and validates")
    {
        REQUIRE_FALSE(preset_names().empty());
        for (const std::string &name : preset_names())
        {
            CAPTURE(name);
            LoadResult r = load_preset(name);
            for (const ScenarioIssue &e : r.errors)
                MESSAGE(e.to_string());
            CHECK(r.ok());
        }
        CHECK_FALSE(preset_text("no-such-preset"));
    }

    TEST_CASE("resolved scenarios survive a round trip")
    {
        for (const std::string &name : preset_names())
        {
            CAPTURE(name);
            const Scenario sc = *load_preset(name).scenario;
            const json once = scenario_to_json(sc);
            LoadResult again = parse_scenario(once);
            REQUIRE(again.ok());
            CHECK(scenario_to_json(*again.scenario) == once);
        }
    }

    TEST_CASE("a rule naming an undeclared group is rejected with its location")
    {
        json j = base();
        j["policy"]["rules"][0]["dst"] = "contractors";
        LoadResult r = parse_scenario(j);
        CHECK_FALSE(r.ok());
        CHECK(has_issue(r, "policy.rules[0].dst", "undeclared group 'contractors'"));

        j = base();
        j["policy"]["rules"][0]["src"] = 999;
        r = parse_scenario(j);
        CHECK(has_issue(r, "policy.rules[0].src", "group 999 is not declared"));
    }

    TEST_CASE("topology sizes are checked")
    {
        json j = base();
        j["topology"]["edge_count"] = 0;
        CHECK(has_issue(parse_scenario(j), "topology.edge_count", "at least 1"));
        j = base();
        j["topology"]["border_count"] = 0;
        CHECK(has_issue(parse_scenario(j), "topology.border_count", "at least 1"));
        j = base();
        j["topology"]["edge_count"] = -3;
        CHECK(has_issue(parse_scenario(j), "topology.edge_count", "non-negative integer"));
    }

    TEST_CASE("unknown fields, wrong types and missing control plane")
    {
        json j = base();
        j["topology"]["edges"] = 4;
        CHECK(has_issue(parse_scenario(j), "topology.edges", "unknown field"));

        j = base();
        j["duration_s"] = "ten";
        CHECK(has_issue(parse_scenario(j), "duration_s", "expected a number"));

        j = base();
        j["control_plane"] = "hybrid";
        CHECK(has_issue(parse_scenario(j), "control_plane", "expected one of"));

        j = base();
        j.erase("control_plane");
        CHECK(has_issue(parse_scenario(j), "control_plane", "missing"));

        CHECK_FALSE(load_scenario_text("{ not json").ok());
        CHECK_FALSE(load_scenario_file("/nonexistent/scenario.json").ok());
    }

    TEST_CASE("cross references and capacities")
    {
        json j = base();
        j["endpoints"][0]["count"] = 300; // a /24 leases 253
        CHECK(has_issue(parse_scenario(j), "vns[0].pool", "253 leases"));

        j = base();
        j["traffic"][0]["flows"][0]["dst"] = "host:5";
        CHECK(has_issue(parse_scenario(j), "traffic[0].flows[0].dst", "out of range"));

        j = base();
        j["endpoints"][0]["placement"] = "edge";
        j["endpoints"][0]["index"] = 4;
        CHECK(has_issue(parse_scenario(j), "endpoints[0].index", "no edge with index 4"));

        j = base();
        j["reboots"] = json::array({{{"router", "edge-9"}, {"at_s", 1}, {"down_s", 1}}});
        CHECK(has_issue(parse_scenario(j), "reboots[0].router", "unknown router 'edge-9'"));

        j = base();
        j["mobility"] = {{"moves_per_second", 5}};
        CHECK(has_issue(parse_scenario(j), "mobility.moves_per_second", "handover"));

        j = base();
        j["vns"][0]["id"] = 1 << 24;
        CHECK_FALSE(parse_scenario(j).ok());
    }

    TEST_CASE("every error is reported, not just the first")
    {
        // semantic checks
        json j = base();
        j["topology"]["edge_count"] = 0;
        j["sampling_interval_s"] = -1;
        j["duration_s"] = 0;
        CHECK(parse_scenario(j).errors.size() == 3);

        // reading and name resolution
        j = base();
        j["policy"]["rules"][0]["dst"] = "nobody";
        j["policy"]["rules"][0]["src"] = "nobody";
        j["topology"]["edges"] = 1;
        CHECK(parse_scenario(j).errors.size() == 3);
    }
}

TEST_SUITE("event-queue")
{
    TEST_CASE("events pop in time order, ties first-in first-out")
    {
        EventQueue<int> q;
        q.push(30, 1);
        q.push(10, 2);
        q.push(30, 3);
        q.push(10, 4);
        q.push(20, 5);
        std::vector<int> order;
        SimTime last = 0;
        while (auto e = q.pop())
        {
            CHECK(e->time >= last);
            last = e->time;
            order.push_back(e->payload);
        }
        CHECK(order == std::vector<int>{2, 4, 5, 1, 3});
    }

    TEST_CASE("random interleavings keep stable time order")
    {
        EventQueue<std::pair<SimTime, int>> q;
        std::vector<std::pair<SimTime, int>> ref;
        std::uint64_t s = 12345;
        int n = 0;
        for (int round = 0; round < 50; ++round)
        {
            for (int i = 0; i < 40; ++i)
            {
                s = s * 6364136223846793005ull + 1442695040888963407ull;
                const SimTime t = static_cast<SimTime>((s >> 33) % 50) + round * 10;
                q.push(t, {t, n});
                ref.emplace_back(t, n++);
            }
            for (int i = 0; i < 25 && !q.empty(); ++i)
            {
                auto e = q.pop();
                // the smallest (time, insertion) among what is pending
                auto it = std::min_element(ref.begin(), ref.end());
                REQUIRE(e->payload == *it);
                ref.erase(it);
            }
        }
        CHECK(q.size() == ref.size());
    }

    TEST_CASE("the pending bound throws instead of growing")
    {
        EventQueue<int> q(3);
        q.push(1, 1);
        q.push(2, 2);
        q.push(3, 3);
        CHECK_THROWS_AS(q.push(4, 4), std::length_error);
        q.pop();
        CHECK_NOTHROW(q.push(4, 4));
    }
}

TEST_SUITE("report")
{
    TEST_CASE("CSV headers and rows")
    {
        MetricsSeries m;
        m.mode = ControlPlaneMode::Proactive;
        m.routers = {{"edge-0", RouterRole::Edge}, {"border-0", RouterRole::Border}};
        m.fib = {{1000, 0, 3}, {1000, 1, 7}};
        m.handovers = {{4, 100, 350}};
        ControlSample c;
        c.time = 1000;
        c.counts[static_cast<std::size_t>(MsgKind::MapRegister)] = 2;
        m.control = {c};
        m.drops = {{1000, 0, 10, 1}};
        const CsvSet csv = render_csvs(m);
        CHECK(csv.fib == "time_us,router_id,role,fib_entries\n1000,edge-0,edge,3\n1000,border-0,border,7\n");
        CHECK(csv.handover == "endpoint_id,detach_us,restore_us,delay_us,mode\n4,100,350,250,proactive\n");
        CHECK(csv.control.rfind("time_us,msg_kind,count\n", 0) == 0);
        CHECK(csv.control.find("1000,MapRegister,2\n") != std::string::npos);
        CHECK(std::count(csv.control.begin(), csv.control.end(), '\n') == 1 + static_cast<long>(kMsgKindCount));
        CHECK(csv.drops == "time_us,router_id,acl_hits,acl_drops\n1000,edge-0,10,1\n");
    }

    TEST_CASE("handover statistics by hand")
    {
        MetricsSeries m;
        for (SimTime d : {10, 20, 30, 40, 100})
            m.handovers.push_back({0, 0, d});
        const HandoverStats s = handover_stats(m);
        CHECK(s.count == 5);
        CHECK(s.mean_us == doctest::Approx(40));
        // sum of squared deviations 900+400+100+0+3600 over n-1
        CHECK(s.variance == doctest::Approx(5000.0 / 4));
        CHECK(s.p50_us == 30);
        CHECK(s.p90_us == 100);
        CHECK(s.max_us == 100);
    }

    TEST_CASE("FIB reduction and working hours")
    {
        DiurnalProfile p;
        CHECK(working_hours(p, 10 * 3600));
        CHECK_FALSE(working_hours(p, 20 * 3600));
        CHECK_FALSE(working_hours(p, 5 * 86400 + 10 * 3600)); // day 5 is a weekend day

        MetricsSeries m;
        m.timescale = 1;
        m.routers = {{"edge-0", RouterRole::Edge}, {"border-0", RouterRole::Border}};
        m.fib = {{10 * 3600 * kMicrosPerSecond, 0, 20}, {10 * 3600 * kMicrosPerSecond, 1, 100},
                 {20 * 3600 * kMicrosPerSecond, 0, 10}, {20 * 3600 * kMicrosPerSecond, 1, 60}};
        const FibStats f = fib_stats(m, p);
        CHECK(f.avg_edge == doctest::Approx(15));
        CHECK(f.avg_border == doctest::Approx(80));
        CHECK(f.reduction == doctest::Approx(1 - 15.0 / 80));
        CHECK(f.border_day == doctest::Approx(100));
        CHECK(f.border_night == doctest::Approx(60));
    }
}
