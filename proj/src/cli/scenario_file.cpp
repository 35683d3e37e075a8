#include "sda/cli/scenario_file.hpp"

#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

namespace sda
{
    using nlohmann::json;

    namespace
    {
        std::string join(const std::string &where, const std::string &key)
        {
            return where.empty() ? key : where + "." + key;
        }

        std::string item(const std::string &where, std::size_t i)
        {
            return where + "[" + std::to_string(i) + "]";
        }

        template <class E>
        using Choices = std::initializer_list<std::pair<const char *, E>>;

        /// Field readers that record type errors instead of throwing.
        class Reader
        {
        public:
            std::vector<ScenarioIssue> errors;
            std::map<std::string, std::uint32_t> vn_names;
            std::map<std::string, std::uint16_t> group_names;

            void error(std::string where, std::string message)
            {
                errors.push_back({std::move(where), std::move(message)});
            }

            bool is_object(const json &j, const std::string &where)
            {
                if (j.is_object())
                    return true;
                error(where, "expected an object");
                return false;
            }

            void allowed(const json &obj, const std::string &where, std::initializer_list<const char *> keys)
            {
                for (const auto &[k, v] : obj.items())
                {
                    bool known = false;
                    for (const char *a : keys)
                        known = known || k == a;
                    if (!known)
                        error(join(where, k), "unknown field");
                }
            }

            const json *field(const json &obj, const char *key)
            {
                auto it = obj.find(key);
                return it == obj.end() ? nullptr : &*it;
            }

            void number(const json &obj, const std::string &where, const char *key, double &out)
            {
                if (const json *v = field(obj, key))
                {
                    if (v->is_number())
                        out = v->get<double>();
                    else
                        error(join(where, key), "expected a number");
                }
            }

            template <class U>
            void uint(const json &obj, const std::string &where, const char *key, U &out)
            {
                const json *v = field(obj, key);
                if (!v)
                    return;
                // values built in code arrive as signed integers even when non-negative
                const bool natural = v->is_number_unsigned() || (v->is_number_integer() && v->get<std::int64_t>() >= 0);
                if (natural && v->get<std::uint64_t>() <= std::numeric_limits<U>::max())
                    out = static_cast<U>(v->get<std::uint64_t>());
                else if (natural)
                    error(join(where, key), "value too large");
                else
                    error(join(where, key), "expected a non-negative integer");
            }

            void sint(const json &obj, const std::string &where, const char *key, std::int64_t &out)
            {
                const json *v = field(obj, key);
                if (!v)
                    return;
                if (v->is_number_integer() &&
                    (!v->is_number_unsigned() ||
                     v->get<std::uint64_t>() <= static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())))
                    out = v->get<std::int64_t>();
                else
                    error(join(where, key), "expected an integer");
            }

            void boolean(const json &obj, const std::string &where, const char *key, bool &out)
            {
                if (const json *v = field(obj, key))
                {
                    if (v->is_boolean())
                        out = v->get<bool>();
                    else
                        error(join(where, key), "expected true or false");
                }
            }

            void string(const json &obj, const std::string &where, const char *key, std::string &out)
            {
                if (const json *v = field(obj, key))
                {
                    if (v->is_string())
                        out = v->get<std::string>();
                    else
                        error(join(where, key), "expected a string");
                }
            }

            void strings(const json &obj, const std::string &where, const char *key, std::vector<std::string> &out)
            {
                const json *v = field(obj, key);
                if (!v)
                    return;
                if (!v->is_array())
                    return error(join(where, key), "expected a list of strings");
                out.clear();
                for (std::size_t i = 0; i < v->size(); ++i)
                {
                    if ((*v)[i].is_string())
                        out.push_back((*v)[i].get<std::string>());
                    else
                        error(item(join(where, key), i), "expected a string");
                }
            }

            template <class E>
            void choice(const json &obj, const std::string &where, const char *key, E &out, Choices<E> choices)
            {
                const json *v = field(obj, key);
                if (!v)
                    return;
                std::string options;
                for (const auto &[name, value] : choices)
                {
                    if (v->is_string() && v->get<std::string>() == name)
                    {
                        out = value;
                        return;
                    }
                    options += options.empty() ? name : std::string(", ") + name;
                }
                error(join(where, key), "expected one of: " + options);
            }

            /// A VN given by id or by declared name.
            void vn_ref(const json &obj, const std::string &where, const char *key, std::uint32_t &out)
            {
                ref(obj, where, key, out, vn_names, "VN");
            }

            void group_ref(const json &obj, const std::string &where, const char *key, std::uint16_t &out)
            {
                ref(obj, where, key, out, group_names, "group");
            }

            /// Calls fn(element, where) for each element of an array field.
            template <class Fn>
            void each(const json &obj, const std::string &where, const char *key, Fn &&fn)
            {
                const json *v = field(obj, key);
                if (!v)
                    return;
                const std::string w = join(where, key);
                if (!v->is_array())
                    return error(w, "expected a list");
                for (std::size_t i = 0; i < v->size(); ++i)
                {
                    if (is_object((*v)[i], item(w, i)))
                        fn((*v)[i], item(w, i));
                }
            }

        private:
            template <class T>
            void ref(const json &obj, const std::string &where, const char *key, T &out,
                     const std::map<std::string, T> &names, const char *what)
            {
                const json *v = field(obj, key);
                if (!v)
                    return;
                if (v->is_string())
                {
                    auto it = names.find(v->get<std::string>());
                    if (it == names.end())
                        error(join(where, key), std::string("undeclared ") + what + " '" + v->get<std::string>() + "'");
                    else
                        out = it->second;
                    return;
                }
                uint(obj, where, key, out);
            }
        };

        const Choices<Action> kActions = {{"allow", Action::Allow}, {"deny", Action::Deny}};

        void read_topology(Reader &r, const json &j, TopologyConfig &t)
        {
            const std::string w = "topology";
            if (!r.is_object(j, w))
                return;
            r.allowed(j, w,
                      {"edge_count", "border_count", "link_delay_us", "control_delay_us", "auth_rtt_us", "dhcp_delay_us",
                       "processing_delays", "redetect_delay_us", "external_prefixes"});
            r.uint(j, w, "edge_count", t.edge_count);
            r.uint(j, w, "border_count", t.border_count);
            r.sint(j, w, "link_delay_us", t.link_delay_us);
            r.sint(j, w, "control_delay_us", t.control_delay_us);
            r.sint(j, w, "auth_rtt_us", t.auth_rtt_us);
            r.sint(j, w, "dhcp_delay_us", t.dhcp_delay_us);
            r.sint(j, w, "redetect_delay_us", t.redetect_delay_us);
            if (auto it = j.find("processing_delays"); it != j.end())
            {
                const std::string pw = join(w, "processing_delays");
                if (r.is_object(*it, pw))
                {
                    r.allowed(*it, pw, {"edge_us", "border_us"});
                    r.sint(*it, pw, "edge_us", t.edge_processing_us);
                    r.sint(*it, pw, "border_us", t.border_processing_us);
                }
            }
            r.strings(j, w, "external_prefixes", t.external_prefixes);
        }

        void read_router(Reader &r, const json &j, RouterParams &p)
        {
            const std::string w = "router";
            if (!r.is_object(j, w))
                return;
            r.allowed(j, w,
                      {"map_cache_ttl_s", "negative_ttl_s", "negative_retries", "resolve_timeout_us",
                       "departure_grace_s", "solicit_holddown_us", "underlay_tracking", "unknown_solicit",
                       "initial_ttl"});
            r.number(j, w, "map_cache_ttl_s", p.map_cache_ttl_s);
            r.number(j, w, "negative_ttl_s", p.negative_ttl_s);
            r.uint(j, w, "negative_retries", p.negative_retries);
            r.sint(j, w, "resolve_timeout_us", p.resolve_timeout_us);
            r.number(j, w, "departure_grace_s", p.departure_grace_s);
            r.sint(j, w, "solicit_holddown_us", p.solicit_holddown_us);
            r.boolean(j, w, "underlay_tracking", p.underlay_tracking);
            r.boolean(j, w, "unknown_solicit", p.unknown_solicit);
            r.uint(j, w, "initial_ttl", p.initial_ttl);
        }

        void read_rule(Reader &r, const json &j, const std::string &w, RuleDecl &rule)
        {
            r.vn_ref(j, w, "vn", rule.vn);
            r.group_ref(j, w, "src", rule.src);
            r.group_ref(j, w, "dst", rule.dst);
            r.choice(j, w, "action", rule.action, kActions);
        }

        void read_policy(Reader &r, const json &j, PolicyConfig &p)
        {
            const std::string w = "policy";
            if (!r.is_object(j, w))
                return;
            r.allowed(j, w, {"default_action", "rules", "updates", "reassignments"});
            r.choice(j, w, "default_action", p.default_action, kActions);
            r.each(j, w, "rules", [&](const json &e, const std::string &ew) {
                r.allowed(e, ew, {"vn", "src", "dst", "action"});
                RuleDecl rule;
                read_rule(r, e, ew, rule);
                p.rules.push_back(rule);
            });
            r.each(j, w, "updates", [&](const json &e, const std::string &ew) {
                r.allowed(e, ew, {"at_s", "op", "vn", "src", "dst", "action"});
                PolicyUpdateDecl u;
                r.number(e, ew, "at_s", u.at_s);
                r.choice(e, ew, "op", u.op,
                         {{"add", MatrixChange::Op::Add},
                          {"remove", MatrixChange::Op::Remove},
                          {"flip", MatrixChange::Op::Flip}});
                read_rule(r, e, ew, u.rule);
                p.updates.push_back(u);
            });
            r.each(j, w, "reassignments", [&](const json &e, const std::string &ew) {
                r.allowed(e, ew, {"at_s", "endpoint", "group"});
                ReassignDecl d;
                r.number(e, ew, "at_s", d.at_s);
                r.string(e, ew, "endpoint", d.endpoint);
                r.group_ref(e, ew, "group", d.group);
                p.reassignments.push_back(d);
            });
        }

        void read_traffic(Reader &r, const json &e, const std::string &w, TrafficSpec &t)
        {
            r.allowed(e, w,
                      {"kind", "payload_bytes", "flows", "interval_us", "lead_us", "timeout_us", "tail_packets",
                       "flows_per_hour", "packets_per_flow", "packet_gap_us", "locality", "popular", "popular_block",
                       "clients_block", "server_blocks", "attempts_per_second", "give_up_after", "explore",
                       "arp_per_second", "arp_local", "arp_unknown", "arp_broadcast", "stop_s"});
            if (!e.contains("kind"))
                r.error(join(w, "kind"), "missing");
            r.choice(e, w, "kind", t.kind,
                     {{"pairs", TrafficKind::Pairs},
                      {"handover", TrafficKind::Handover},
                      {"diurnal", TrafficKind::Diurnal},
                      {"backoff", TrafficKind::Backoff},
                      {"arp", TrafficKind::Arp}});
            r.uint(e, w, "payload_bytes", t.payload_bytes);
            r.each(e, w, "flows", [&](const json &f, const std::string &fw) {
                r.allowed(f, fw, {"src", "dst", "interval_us", "start_s", "stop_s"});
                FlowDecl d;
                r.string(f, fw, "src", d.src);
                r.string(f, fw, "dst", d.dst);
                r.sint(f, fw, "interval_us", d.interval_us);
                r.number(f, fw, "start_s", d.start_s);
                r.number(f, fw, "stop_s", d.stop_s);
                t.flows.push_back(d);
            });
            r.sint(e, w, "interval_us", t.interval_us);
            r.sint(e, w, "lead_us", t.lead_us);
            r.sint(e, w, "timeout_us", t.timeout_us);
            r.uint(e, w, "tail_packets", t.tail_packets);
            r.number(e, w, "flows_per_hour", t.flows_per_hour);
            r.uint(e, w, "packets_per_flow", t.packets_per_flow);
            r.sint(e, w, "packet_gap_us", t.packet_gap_us);
            r.number(e, w, "locality", t.locality);
            r.number(e, w, "popular", t.popular);
            r.string(e, w, "popular_block", t.popular_block);
            r.string(e, w, "clients_block", t.clients_block);
            r.strings(e, w, "server_blocks", t.server_blocks);
            r.number(e, w, "attempts_per_second", t.attempts_per_second);
            r.uint(e, w, "give_up_after", t.give_up_after);
            r.number(e, w, "explore", t.explore);
            r.number(e, w, "arp_per_second", t.arp_per_second);
            r.number(e, w, "arp_local", t.arp_local);
            r.number(e, w, "arp_unknown", t.arp_unknown);
            r.number(e, w, "arp_broadcast", t.arp_broadcast);
            r.number(e, w, "stop_s", t.stop_s);
        }

        // ------------------------------------------------------------ semantic checks

        class Checker
        {
        public:
            explicit Checker(const Scenario &sc) : sc_(sc)
            {
                for (const VnDecl &v : sc.vns)
                    vns_.insert(v.id);
                for (const GroupDecl &g : sc.groups)
                    groups_.insert(g.id);
                for (const EndpointBlock &b : sc.endpoints)
                    blocks_[b.name] = b.count;
            }

            std::vector<ScenarioIssue> run()
            {
                top();
                topology();
                router();
                declarations();
                endpoints();
                policy();
                diurnal();
                traffic();
                mobility();
                reboots();
                return std::move(errors_);
            }

        private:
            void error(std::string where, std::string message) { errors_.push_back({std::move(where), std::move(message)}); }

            void positive(double v, const std::string &where)
            {
                if (!(v > 0))
                    error(where, "must be positive");
            }

            void non_negative(double v, const std::string &where)
            {
                if (!(v >= 0))
                    error(where, "must not be negative");
            }

            void fraction(double v, const std::string &where)
            {
                if (!(v >= 0 && v <= 1))
                    error(where, "must lie in [0, 1]");
            }

            void vn(std::uint32_t id, const std::string &where)
            {
                if (!vns_.contains(id))
                    error(where, "VN " + std::to_string(id) + " is not declared");
            }

            void group(std::uint16_t id, const std::string &where)
            {
                if (!groups_.contains(id))
                    error(where, "group " + std::to_string(id) + " is not declared");
            }

            void block(const std::string &name, const std::string &where)
            {
                if (!blocks_.contains(name))
                    error(where, "unknown endpoint block '" + name + "'");
            }

            void endpoint_ref(const std::string &ref, const std::string &where)
            {
                const auto colon = ref.rfind(':');
                auto it = colon == std::string::npos ? blocks_.end() : blocks_.find(ref.substr(0, colon));
                if (it == blocks_.end())
                    return error(where, "expected '<block>:<index>' naming a declared block, got '" + ref + "'");
                const std::string idx = ref.substr(colon + 1);
                if (idx.empty() || idx.find_first_not_of("0123456789") != std::string::npos || idx.size() > 9 ||
                    std::stoul(idx) >= it->second)
                    error(where, "index out of range in '" + ref + "'");
            }

            void top()
            {
                positive(sc_.duration_s, "duration_s");
                positive(sc_.sampling_interval_s, "sampling_interval_s");
                positive(sc_.timescale, "timescale");
                if (sc_.max_pending_events == 0)
                    error("max_pending_events", "must be positive");
                if (sc_.duration_s > 0 && sc_.timescale > 0 && sc_.duration_s / sc_.timescale > 1e12)
                    error("duration_s", "simulated span too long");
            }

            void topology()
            {
                const TopologyConfig &t = sc_.topology;
                if (t.edge_count == 0)
                    error("topology.edge_count", "must be at least 1");
                if (t.border_count == 0)
                    error("topology.border_count", "must be at least 1");
                if (t.edge_count > 60000)
                    error("topology.edge_count", "at most 60000 edges are supported");
                if (t.border_count > 60000)
                    error("topology.border_count", "at most 60000 borders are supported");
                non_negative(static_cast<double>(t.link_delay_us), "topology.link_delay_us");
                non_negative(static_cast<double>(t.control_delay_us), "topology.control_delay_us");
                non_negative(static_cast<double>(t.auth_rtt_us), "topology.auth_rtt_us");
                non_negative(static_cast<double>(t.dhcp_delay_us), "topology.dhcp_delay_us");
                non_negative(static_cast<double>(t.redetect_delay_us), "topology.redetect_delay_us");
                non_negative(static_cast<double>(t.edge_processing_us), "topology.processing_delays.edge_us");
                non_negative(static_cast<double>(t.border_processing_us), "topology.processing_delays.border_us");
                for (std::size_t i = 0; i < t.external_prefixes.size(); ++i)
                {
                    try
                    {
                        OverlayAddr::parse(t.external_prefixes[i]);
                    }
                    catch (const std::exception &e)
                    {
                        error(item("topology.external_prefixes", i), e.what());
                    }
                }
            }

            void router()
            {
                const RouterParams &p = sc_.router;
                positive(p.map_cache_ttl_s, "router.map_cache_ttl_s");
                positive(p.negative_ttl_s, "router.negative_ttl_s");
                positive(static_cast<double>(p.resolve_timeout_us), "router.resolve_timeout_us");
                non_negative(p.departure_grace_s, "router.departure_grace_s");
                non_negative(static_cast<double>(p.solicit_holddown_us), "router.solicit_holddown_us");
                if (p.initial_ttl < 2 || p.initial_ttl > 255)
                    error("router.initial_ttl", "must lie in [2, 255]");
            }

            void declarations()
            {
                std::set<std::uint32_t> seen_vn;
                std::set<std::string> names;
                for (std::size_t i = 0; i < sc_.vns.size(); ++i)
                {
                    const VnDecl &v = sc_.vns[i];
                    const std::string w = item("vns", i);
                    if (v.id >= Vn::kLimit)
                        error(w + ".id", "VN ids are 24-bit");
                    if (!seen_vn.insert(v.id).second)
                        error(w + ".id", "duplicate VN " + std::to_string(v.id));
                    if (!v.name.empty() && !names.insert(v.name).second)
                        error(w + ".name", "duplicate VN name '" + v.name + "'");
                    try
                    {
                        const OverlayAddr pool = OverlayAddr::parse(v.pool);
                        if (pool.family() != AddrFamily::IPv4)
                            error(w + ".pool", "must be an IPv4 prefix");
                        else if (pool.prefix_len() > 29 || pool.prefix_len() < 8)
                            error(w + ".pool", "prefix length must lie in [8, 29]");
                    }
                    catch (const std::exception &e)
                    {
                        error(w + ".pool", e.what());
                    }
                }
                if (sc_.vns.empty())
                    error("vns", "at least one VN must be declared");

                std::set<std::uint16_t> seen_group;
                names.clear();
                for (std::size_t i = 0; i < sc_.groups.size(); ++i)
                {
                    const GroupDecl &g = sc_.groups[i];
                    const std::string w = item("groups", i);
                    if (!seen_group.insert(g.id).second)
                        error(w + ".id", "duplicate group " + std::to_string(g.id));
                    if (!g.name.empty() && !names.insert(g.name).second)
                        error(w + ".name", "duplicate group name '" + g.name + "'");
                }
            }

            void endpoints()
            {
                std::set<std::string> names;
                std::map<std::uint32_t, std::uint64_t> demand;
                for (std::size_t i = 0; i < sc_.endpoints.size(); ++i)
                {
                    const EndpointBlock &b = sc_.endpoints[i];
                    const std::string w = item("endpoints", i);
                    if (b.name.empty() || b.name.find(':') != std::string::npos)
                        error(w + ".name", "must be non-empty and must not contain ':'");
                    else if (!names.insert(b.name).second)
                        error(w + ".name", "duplicate block name '" + b.name + "'");
                    if (b.count == 0)
                        error(w + ".count", "must be positive");
                    vn(b.vn, w + ".vn");
                    group(b.group, w + ".group");
                    if (b.placement == Placement::Edge && b.index >= sc_.topology.edge_count)
                        error(w + ".index", "no edge with index " + std::to_string(b.index));
                    if (b.placement == Placement::Border && b.index >= sc_.topology.border_count)
                        error(w + ".index", "no border with index " + std::to_string(b.index));
                    demand[b.vn] += b.count;
                }
                for (std::size_t i = 0; i < sc_.vns.size(); ++i)
                {
                    const VnDecl &v = sc_.vns[i];
                    try
                    {
                        const OverlayAddr pool = OverlayAddr::parse(v.pool);
                        if (pool.family() != AddrFamily::IPv4 || pool.prefix_len() > 29)
                            continue;
                        const std::uint64_t capacity = (std::uint64_t{1} << (32 - pool.prefix_len())) - 3;
                        if (demand[v.id] > capacity)
                            error(item("vns", i) + ".pool", "pool " + v.pool + " holds " + std::to_string(capacity) + " leases but VN " +
                                             std::to_string(v.id) + " has " + std::to_string(demand[v.id]) +
                                             " endpoints");
                    }
                    catch (const std::exception &)
                    {
                    }
                }
                if (sc_.endpoints.empty())
                    error("endpoints", "at least one endpoint block is required");
            }

            void rule(const RuleDecl &r, const std::string &w)
            {
                vn(r.vn, w + ".vn");
                group(r.src, w + ".src");
                group(r.dst, w + ".dst");
            }

            void policy()
            {
                std::set<std::tuple<std::uint32_t, std::uint16_t, std::uint16_t>> seen;
                for (std::size_t i = 0; i < sc_.policy.rules.size(); ++i)
                {
                    const RuleDecl &r = sc_.policy.rules[i];
                    const std::string w = item("policy.rules", i);
                    rule(r, w);
                    if (!seen.insert({r.vn, r.src, r.dst}).second)
                        error(w, "duplicate rule for this (vn, src, dst)");
                }
                for (std::size_t i = 0; i < sc_.policy.updates.size(); ++i)
                {
                    const std::string w = item("policy.updates", i);
                    non_negative(sc_.policy.updates[i].at_s, w + ".at_s");
                    rule(sc_.policy.updates[i].rule, w);
                }
                for (std::size_t i = 0; i < sc_.policy.reassignments.size(); ++i)
                {
                    const ReassignDecl &d = sc_.policy.reassignments[i];
                    const std::string w = item("policy.reassignments", i);
                    non_negative(d.at_s, w + ".at_s");
                    endpoint_ref(d.endpoint, w + ".endpoint");
                    group(d.group, w + ".group");
                }
            }

            void diurnal()
            {
                const DiurnalProfile &d = sc_.diurnal;
                if (!(d.day_start_h >= 0 && d.day_start_h < d.day_end_h && d.day_end_h <= 24))
                    error("diurnal", "need 0 <= day_start_h < day_end_h <= 24");
                if (d.workdays > 7)
                    error("diurnal.workdays", "at most 7");
                non_negative(d.jitter_h, "diurnal.jitter_h");
                fraction(d.night_rate, "diurnal.night_rate");
            }

            void traffic()
            {
                for (std::size_t i = 0; i < sc_.traffic.size(); ++i)
                {
                    const TrafficSpec &t = sc_.traffic[i];
                    const std::string w = item("traffic", i);
                    switch (t.kind)
                    {
                    case TrafficKind::Pairs:
                        for (std::size_t f = 0; f < t.flows.size(); ++f)
                        {
                            const std::string fw = item(w + ".flows", f);
                            endpoint_ref(t.flows[f].src, fw + ".src");
                            endpoint_ref(t.flows[f].dst, fw + ".dst");
                            positive(static_cast<double>(t.flows[f].interval_us), fw + ".interval_us");
                            non_negative(t.flows[f].start_s, fw + ".start_s");
                        }
                        break;
                    case TrafficKind::Handover:
                        positive(static_cast<double>(t.interval_us), w + ".interval_us");
                        positive(static_cast<double>(t.timeout_us), w + ".timeout_us");
                        non_negative(static_cast<double>(t.lead_us), w + ".lead_us");
                        if (sc_.topology.edge_count < 2)
                            error(w, "handover traffic needs at least 2 edges");
                        break;
                    case TrafficKind::Diurnal:
                        non_negative(t.flows_per_hour, w + ".flows_per_hour");
                        fraction(t.locality, w + ".locality");
                        fraction(t.popular, w + ".popular");
                        if (t.locality + t.popular > 1)
                            error(w, "locality + popular must not exceed 1");
                        if (t.packets_per_flow == 0)
                            error(w + ".packets_per_flow", "must be positive");
                        non_negative(static_cast<double>(t.packet_gap_us), w + ".packet_gap_us");
                        if (!t.popular_block.empty())
                            block(t.popular_block, w + ".popular_block");
                        else if (t.popular > 0)
                            error(w + ".popular_block", "required when popular > 0");
                        break;
                    case TrafficKind::Backoff:
                        block(t.clients_block, w + ".clients_block");
                        if (t.server_blocks.empty())
                            error(w + ".server_blocks", "at least one block is required");
                        for (std::size_t s = 0; s < t.server_blocks.size(); ++s)
                            block(t.server_blocks[s], item(w + ".server_blocks", s));
                        non_negative(t.attempts_per_second, w + ".attempts_per_second");
                        if (t.give_up_after == 0)
                            error(w + ".give_up_after", "must be positive");
                        fraction(t.explore, w + ".explore");
                        break;
                    case TrafficKind::Arp:
                        non_negative(t.arp_per_second, w + ".arp_per_second");
                        fraction(t.arp_local, w + ".arp_local");
                        fraction(t.arp_unknown, w + ".arp_unknown");
                        fraction(t.arp_broadcast, w + ".arp_broadcast");
                        if (t.arp_local + t.arp_unknown + t.arp_broadcast > 1)
                            error(w, "arp_local + arp_unknown + arp_broadcast must not exceed 1");
                        break;
                    }
                }
            }

            void mobility()
            {
                const MobilityConfig &m = sc_.mobility;
                non_negative(m.moves_per_second, "mobility.moves_per_second");
                non_negative(m.start_s, "mobility.start_s");
                non_negative(static_cast<double>(m.reattach_delay_us), "mobility.reattach_delay_us");
                for (std::size_t i = 0; i < m.mover_blocks.size(); ++i)
                    block(m.mover_blocks[i], item("mobility.mover_blocks", i));
                if (m.moves_per_second > 0)
                {
                    bool driver = false;
                    for (const TrafficSpec &t : sc_.traffic)
                        driver = driver || t.kind == TrafficKind::Handover;
                    if (!driver)
                        error("mobility.moves_per_second", "moves are driven by a traffic entry of kind 'handover'");
                }
            }

            void reboots()
            {
                for (std::size_t i = 0; i < sc_.reboots.size(); ++i)
                {
                    const RebootDecl &rb = sc_.reboots[i];
                    const std::string w = item("reboots", i);
                    bool ok = false;
                    for (const auto &[prefix, count] :
                         {std::pair{std::string("edge-"), sc_.topology.edge_count},
                          std::pair{std::string("border-"), sc_.topology.border_count}})
                    {
                        if (rb.router.rfind(prefix, 0) != 0)
                            continue;
                        const std::string n = rb.router.substr(prefix.size());
                        ok = !n.empty() && n.size() < 7 && n.find_first_not_of("0123456789") == std::string::npos &&
                             std::stoul(n) < count && std::to_string(std::stoul(n)) == n;
                    }
                    if (!ok)
                        error(w + ".router", "unknown router '" + rb.router + "'");
                    non_negative(rb.at_s, w + ".at_s");
                    positive(rb.down_s, w + ".down_s");
                }
            }

            const Scenario &sc_;
            std::set<std::uint32_t> vns_;
            std::set<std::uint16_t> groups_;
            std::map<std::string, unsigned> blocks_;
            std::vector<ScenarioIssue> errors_;
        };

        const char *kind_name(TrafficKind k)
        {
            switch (k)
            {
            case TrafficKind::Pairs:
                return "pairs";
            case TrafficKind::Handover:
                return "handover";
            case TrafficKind::Diurnal:
                return "diurnal";
            case TrafficKind::Backoff:
                return "backoff";
            case TrafficKind::Arp:
                return "arp";
            }
            return "?";
        }

        const char *op_name(MatrixChange::Op op)
        {
            switch (op)
            {
            case MatrixChange::Op::Add:
                return "add";
            case MatrixChange::Op::Remove:
                return "remove";
            case MatrixChange::Op::Flip:
                return "flip";
            }
            return "?";
        }

        const char *placement_name(Placement p)
        {
            switch (p)
            {
            case Placement::Spread:
                return "spread";
            case Placement::Edge:
                return "edge";
            case Placement::Border:
                return "border";
            }
            return "?";
        }

        json rule_json(const RuleDecl &r)
        {
            return {{"vn", r.vn}, {"src", r.src}, {"dst", r.dst}, {"action", action_name(r.action)}};
        }
    }

    LoadResult parse_scenario(const json &doc)
    {
        Reader r;
        LoadResult out;
        if (!doc.is_object())
        {
            out.errors.push_back({"", "scenario must be a JSON object"});
            return out;
        }
        Scenario sc;
        r.allowed(doc, "",
                  {"name", "seed", "control_plane", "duration_s", "sampling_interval_s", "timescale",
                   "max_pending_events", "topology", "router", "vns", "groups", "endpoints", "policy", "diurnal",
                   "traffic", "mobility", "reboots"});
        r.string(doc, "", "name", sc.name);
        r.uint(doc, "", "seed", sc.seed);
        if (!doc.contains("control_plane"))
            r.error("control_plane", "missing; choose reactive or proactive");
        r.choice(doc, "", "control_plane", sc.control_plane,
                 {{"reactive", ControlPlaneMode::Reactive}, {"proactive", ControlPlaneMode::Proactive}});
        r.number(doc, "", "duration_s", sc.duration_s);
        r.number(doc, "", "sampling_interval_s", sc.sampling_interval_s);
        r.number(doc, "", "timescale", sc.timescale);
        r.uint(doc, "", "max_pending_events", sc.max_pending_events);

        if (auto it = doc.find("topology"); it != doc.end())
            read_topology(r, *it, sc.topology);
        if (auto it = doc.find("router"); it != doc.end())
            read_router(r, *it, sc.router);

        r.each(doc, "", "vns", [&](const json &e, const std::string &w) {
            r.allowed(e, w, {"id", "name", "pool"});
            VnDecl v;
            r.uint(e, w, "id", v.id);
            r.string(e, w, "name", v.name);
            r.string(e, w, "pool", v.pool);
            if (!e.contains("pool"))
                r.error(w + ".pool", "missing");
            if (!v.name.empty())
                r.vn_names[v.name] = v.id;
            sc.vns.push_back(v);
        });
        r.each(doc, "", "groups", [&](const json &e, const std::string &w) {
            r.allowed(e, w, {"id", "name"});
            GroupDecl g;
            r.uint(e, w, "id", g.id);
            r.string(e, w, "name", g.name);
            if (!g.name.empty())
                r.group_names[g.name] = g.id;
            sc.groups.push_back(g);
        });
        r.each(doc, "", "endpoints", [&](const json &e, const std::string &w) {
            r.allowed(e, w,
                      {"name", "count", "vn", "group", "placement", "index", "ipv6", "mac", "presence",
                       "bad_credentials"});
            EndpointBlock b;
            r.string(e, w, "name", b.name);
            r.uint(e, w, "count", b.count);
            r.vn_ref(e, w, "vn", b.vn);
            r.group_ref(e, w, "group", b.group);
            r.choice(e, w, "placement", b.placement,
                     {{"spread", Placement::Spread}, {"edge", Placement::Edge}, {"border", Placement::Border}});
            r.uint(e, w, "index", b.index);
            r.boolean(e, w, "ipv6", b.ipv6);
            r.boolean(e, w, "mac", b.mac);
            r.choice(e, w, "presence", b.presence, {{"always", Presence::Always}, {"diurnal", Presence::Diurnal}});
            r.boolean(e, w, "bad_credentials", b.bad_credentials);
            sc.endpoints.push_back(b);
        });
        if (auto it = doc.find("policy"); it != doc.end())
            read_policy(r, *it, sc.policy);
        if (auto it = doc.find("diurnal"); it != doc.end())
        {
            const json &j = *it;
            if (r.is_object(j, "diurnal"))
            {
                r.allowed(j, "diurnal", {"day_start_h", "day_end_h", "workdays", "jitter_h", "night_rate"});
                r.number(j, "diurnal", "day_start_h", sc.diurnal.day_start_h);
                r.number(j, "diurnal", "day_end_h", sc.diurnal.day_end_h);
                r.uint(j, "diurnal", "workdays", sc.diurnal.workdays);
                r.number(j, "diurnal", "jitter_h", sc.diurnal.jitter_h);
                r.number(j, "diurnal", "night_rate", sc.diurnal.night_rate);
            }
        }
        r.each(doc, "", "traffic", [&](const json &e, const std::string &w) {
            TrafficSpec t;
            read_traffic(r, e, w, t);
            sc.traffic.push_back(std::move(t));
        });
        if (auto it = doc.find("mobility"); it != doc.end())
        {
            const json &j = *it;
            if (r.is_object(j, "mobility"))
            {
                r.allowed(j, "mobility", {"moves_per_second", "start_s", "reattach_delay_us", "mover_blocks"});
                r.number(j, "mobility", "moves_per_second", sc.mobility.moves_per_second);
                r.number(j, "mobility", "start_s", sc.mobility.start_s);
                r.sint(j, "mobility", "reattach_delay_us", sc.mobility.reattach_delay_us);
                r.strings(j, "mobility", "mover_blocks", sc.mobility.mover_blocks);
            }
        }
        r.each(doc, "", "reboots", [&](const json &e, const std::string &w) {
            r.allowed(e, w, {"router", "at_s", "down_s"});
            RebootDecl d;
            r.string(e, w, "router", d.router);
            r.number(e, w, "at_s", d.at_s);
            r.number(e, w, "down_s", d.down_s);
            sc.reboots.push_back(d);
        });

        out.errors = std::move(r.errors);
        if (out.errors.empty())
            out.errors = validate_scenario(sc);
        if (out.errors.empty())
            out.scenario = std::move(sc);
        return out;
    }

    LoadResult load_scenario_text(const std::string &text)
    {
        json doc;
        try
        {
            doc = json::parse(text);
        }
        catch (const json::parse_error &e)
        {
            LoadResult out;
            out.errors.push_back({"", std::string("malformed JSON: ") + e.what()});
            return out;
        }
        return parse_scenario(doc);
    }

    LoadResult load_scenario_file(const std::string &path)
    {
        std::ifstream in(path);
        if (!in)
        {
            LoadResult out;
            out.errors.push_back({path, "cannot open file"});
            return out;
        }
        std::stringstream ss;
        ss << in.rdbuf();
        return load_scenario_text(ss.str());
    }

    std::vector<ScenarioIssue> validate_scenario(const Scenario &sc)
    {
        return Checker(sc).run();
    }

    json scenario_to_json(const Scenario &sc)
    {
        const TopologyConfig &t = sc.topology;
        const RouterParams &p = sc.router;
        json j;
        j["name"] = sc.name;
        j["seed"] = sc.seed;
        j["control_plane"] = mode_name(sc.control_plane);
        j["duration_s"] = sc.duration_s;
        j["sampling_interval_s"] = sc.sampling_interval_s;
        j["timescale"] = sc.timescale;
        j["max_pending_events"] = sc.max_pending_events;
        j["topology"] = {{"edge_count", t.edge_count},
                         {"border_count", t.border_count},
                         {"link_delay_us", t.link_delay_us},
                         {"control_delay_us", t.control_delay_us},
                         {"auth_rtt_us", t.auth_rtt_us},
                         {"dhcp_delay_us", t.dhcp_delay_us},
                         {"processing_delays", {{"edge_us", t.edge_processing_us}, {"border_us", t.border_processing_us}}},
                         {"redetect_delay_us", t.redetect_delay_us},
                         {"external_prefixes", t.external_prefixes}};
        j["router"] = {{"map_cache_ttl_s", p.map_cache_ttl_s},
                       {"negative_ttl_s", p.negative_ttl_s},
                       {"negative_retries", p.negative_retries},
                       {"resolve_timeout_us", p.resolve_timeout_us},
                       {"departure_grace_s", p.departure_grace_s},
                       {"solicit_holddown_us", p.solicit_holddown_us},
                       {"underlay_tracking", p.underlay_tracking},
                       {"unknown_solicit", p.unknown_solicit},
                       {"initial_ttl", p.initial_ttl}};
        j["vns"] = json::array();
        for (const VnDecl &v : sc.vns)
            j["vns"].push_back({{"id", v.id}, {"name", v.name}, {"pool", v.pool}});
        j["groups"] = json::array();
        for (const GroupDecl &g : sc.groups)
            j["groups"].push_back({{"id", g.id}, {"name", g.name}});
        j["endpoints"] = json::array();
        for (const EndpointBlock &b : sc.endpoints)
        {
            j["endpoints"].push_back({{"name", b.name},
                                      {"count", b.count},
                                      {"vn", b.vn},
                                      {"group", b.group},
                                      {"placement", placement_name(b.placement)},
                                      {"index", b.index},
                                      {"ipv6", b.ipv6},
                                      {"mac", b.mac},
                                      {"presence", b.presence == Presence::Always ? "always" : "diurnal"},
                                      {"bad_credentials", b.bad_credentials}});
        }
        json pol;
        pol["default_action"] = action_name(sc.policy.default_action);
        pol["rules"] = json::array();
        for (const RuleDecl &r : sc.policy.rules)
            pol["rules"].push_back(rule_json(r));
        pol["updates"] = json::array();
        for (const PolicyUpdateDecl &u : sc.policy.updates)
        {
            json e = rule_json(u.rule);
            e["at_s"] = u.at_s;
            e["op"] = op_name(u.op);
            pol["updates"].push_back(e);
        }
        pol["reassignments"] = json::array();
        for (const ReassignDecl &d : sc.policy.reassignments)
            pol["reassignments"].push_back({{"at_s", d.at_s}, {"endpoint", d.endpoint}, {"group", d.group}});
        j["policy"] = pol;
        const DiurnalProfile &d = sc.diurnal;
        j["diurnal"] = {{"day_start_h", d.day_start_h},
                        {"day_end_h", d.day_end_h},
                        {"workdays", d.workdays},
                        {"jitter_h", d.jitter_h},
                        {"night_rate", d.night_rate}};
        j["traffic"] = json::array();
        for (const TrafficSpec &tr : sc.traffic)
        {
            json e;
            e["kind"] = kind_name(tr.kind);
            e["payload_bytes"] = tr.payload_bytes;
            switch (tr.kind)
            {
            case TrafficKind::Pairs:
                e["flows"] = json::array();
                for (const FlowDecl &f : tr.flows)
                {
                    e["flows"].push_back({{"src", f.src},
                                          {"dst", f.dst},
                                          {"interval_us", f.interval_us},
                                          {"start_s", f.start_s},
                                          {"stop_s", f.stop_s}});
                }
                break;
            case TrafficKind::Handover:
                e["interval_us"] = tr.interval_us;
                e["lead_us"] = tr.lead_us;
                e["timeout_us"] = tr.timeout_us;
                e["tail_packets"] = tr.tail_packets;
                break;
            case TrafficKind::Diurnal:
                e["flows_per_hour"] = tr.flows_per_hour;
                e["packets_per_flow"] = tr.packets_per_flow;
                e["packet_gap_us"] = tr.packet_gap_us;
                e["locality"] = tr.locality;
                e["popular"] = tr.popular;
                e["popular_block"] = tr.popular_block;
                break;
            case TrafficKind::Backoff:
                e["clients_block"] = tr.clients_block;
                e["server_blocks"] = tr.server_blocks;
                e["attempts_per_second"] = tr.attempts_per_second;
                e["give_up_after"] = tr.give_up_after;
                e["explore"] = tr.explore;
                e["stop_s"] = tr.stop_s;
                break;
            case TrafficKind::Arp:
                e["arp_per_second"] = tr.arp_per_second;
                e["arp_local"] = tr.arp_local;
                e["arp_unknown"] = tr.arp_unknown;
                e["arp_broadcast"] = tr.arp_broadcast;
                e["stop_s"] = tr.stop_s;
                break;
            }
            j["traffic"].push_back(e);
        }
        j["mobility"] = {{"moves_per_second", sc.mobility.moves_per_second},
                         {"start_s", sc.mobility.start_s},
                         {"reattach_delay_us", sc.mobility.reattach_delay_us},
                         {"mover_blocks", sc.mobility.mover_blocks}};
        j["reboots"] = json::array();
        for (const RebootDecl &rb : sc.reboots)
            j["reboots"].push_back({{"router", rb.router}, {"at_s", rb.at_s}, {"down_s", rb.down_s}});
        return j;
    }
}
