#include "sda/cli/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace sda
{
    CsvSet render_csvs(const MetricsSeries &m)
    {
        CsvSet out;
        std::ostringstream fib, ho, ctl, drops;

        fib << "time_us,router_id,role,fib_entries\n";
        for (const FibSample &s : m.fib)
        {
            const RouterInfo &r = m.routers[s.router];
            fib << s.time << ',' << r.name << ',' << role_name(r.role) << ',' << s.entries << '\n';
        }

        ho << "endpoint_id,detach_us,restore_us,delay_us,mode\n";
        for (const HandoverSample &h : m.handovers)
            ho << h.endpoint << ',' << h.detach << ',' << h.restore << ',' << h.delay() << ',' << mode_name(m.mode) << '\n';

        ctl << "time_us,msg_kind,count\n";
        for (const ControlSample &c : m.control)
        {
            for (std::size_t k = 0; k < kMsgKindCount; ++k)
                ctl << c.time << ',' << msg_kind_name(static_cast<MsgKind>(k)) << ',' << c.counts[k] << '\n';
        }

        drops << "time_us,router_id,acl_hits,acl_drops\n";
        for (const DropSample &d : m.drops)
            drops << d.time << ',' << m.routers[d.router].name << ',' << d.acl_hits << ',' << d.acl_drops << '\n';

        out.fib = fib.str();
        out.handover = ho.str();
        out.control = ctl.str();
        out.drops = drops.str();
        return out;
    }

    void write_csvs(const MetricsSeries &m, const CsvSet &csv, const std::string &dir)
    {
        namespace fs = std::filesystem;
        fs::create_directories(dir);
        auto put = [&](const char *name, const std::string &body) {
            std::ofstream f(fs::path(dir) / name, std::ios::binary);
            if (!f)
                throw std::runtime_error("cannot write " + (fs::path(dir) / name).string());
            f << body;
        };
        put("fib.csv", csv.fib);
        put("handover.csv", csv.handover);
        put("control.csv", csv.control);
        put("drops.csv", csv.drops);
        const fs::path marker = fs::path(dir) / "PARTIAL";
        if (m.aborted)
            put("PARTIAL", "run aborted: " + m.abort_reason + "\n");
        else if (fs::exists(marker))
            fs::remove(marker);
    }

    HandoverStats handover_stats(const MetricsSeries &m)
    {
        HandoverStats s;
        s.timeouts = m.handover_timeouts;
        s.count = m.handovers.size();
        if (s.count == 0)
            return s;
        std::vector<double> d;
        d.reserve(s.count);
        for (const HandoverSample &h : m.handovers)
            d.push_back(static_cast<double>(h.delay()));
        double sum = 0;
        for (double v : d)
            sum += v;
        s.mean_us = sum / static_cast<double>(d.size());
        double sq = 0;
        for (double v : d)
            sq += (v - s.mean_us) * (v - s.mean_us);
        s.variance = d.size() > 1 ? sq / static_cast<double>(d.size() - 1) : 0;
        std::sort(d.begin(), d.end());
        auto rank = [&](double q) {
            const auto i = static_cast<std::size_t>(std::ceil(q * static_cast<double>(d.size())));
            return d[std::clamp<std::size_t>(i, 1, d.size()) - 1];
        };
        s.p50_us = rank(0.5);
        s.p90_us = rank(0.9);
        s.p99_us = rank(0.99);
        s.max_us = d.back();
        return s;
    }

    bool working_hours(const DiurnalProfile &p, double t)
    {
        const auto day = static_cast<std::int64_t>(std::floor(t / 86400));
        const double hour = (t - static_cast<double>(day) * 86400) / 3600;
        return day % 7 < static_cast<std::int64_t>(p.workdays) && hour >= p.day_start_h && hour < p.day_end_h;
    }

    FibStats fib_stats(const MetricsSeries &m, const DiurnalProfile &profile)
    {
        FibStats s;
        double edge_sum = 0, border_sum = 0, day_sum = 0, night_sum = 0;
        std::size_t edges = 0, borders = 0;
        for (const FibSample &f : m.fib)
        {
            const auto v = static_cast<double>(f.entries);
            if (m.routers[f.router].role == RouterRole::Edge)
            {
                edge_sum += v;
                ++edges;
                continue;
            }
            border_sum += v;
            ++borders;
            if (working_hours(profile, static_cast<double>(f.time) * m.timescale / 1e6))
            {
                day_sum += v;
                ++s.day_samples;
            }
            else
            {
                night_sum += v;
                ++s.night_samples;
            }
        }
        s.avg_edge = edges ? edge_sum / static_cast<double>(edges) : 0;
        s.avg_border = borders ? border_sum / static_cast<double>(borders) : 0;
        s.reduction = s.avg_border > 0 ? 1 - s.avg_edge / s.avg_border : 0;
        s.border_day = s.day_samples ? day_sum / static_cast<double>(s.day_samples) : 0;
        s.border_night = s.night_samples ? night_sum / static_cast<double>(s.night_samples) : 0;
        return s;
    }

    double drop_permille(const MetricsSeries &m, SimTime from, SimTime to)
    {
        std::uint64_t hits = 0, drops = 0;
        for (const DropSample &d : m.drops)
        {
            if (d.time < from || d.time >= to)
                continue;
            hits += d.acl_hits;
            drops += d.acl_drops;
        }
        return hits ? 1000.0 * static_cast<double>(drops) / static_cast<double>(hits) : 0;
    }

    Summary summarize(const MetricsSeries &m, const Scenario &sc)
    {
        Summary s;
        s.scenario = m.scenario;
        s.mode = m.mode;
        s.handover = handover_stats(m);
        s.fib = fib_stats(m, sc.diurnal);
        for (const DropSample &d : m.drops)
        {
            s.acl_hits += d.acl_hits;
            s.acl_drops += d.acl_drops;
        }
        s.drop_permille = s.acl_hits ? 1000.0 * static_cast<double>(s.acl_drops) / static_cast<double>(s.acl_hits) : 0;
        s.steady_drop_permille = drop_permille(m, m.duration / 2, m.duration + 1);
        s.messages = m.control_total;
        s.conservation = m.conservation;
        s.events = m.events;
        s.aborted = m.aborted;
        s.abort_reason = m.abort_reason;
        return s;
    }

    void print_summary(std::ostream &os, const Summary &s)
    {
        auto ms = [](double us) { return us / 1000.0; };
        os << std::fixed << std::setprecision(3);
        os << "scenario " << s.scenario << " (" << mode_name(s.mode) << ")\n";
        if (s.aborted)
            os << "  ABORTED: " << s.abort_reason << "\n";
        os << "  events processed     " << s.events << "\n";
        const HandoverStats &h = s.handover;
        if (h.count > 0 || h.timeouts > 0)
        {
            os << "  handovers            " << h.count << " restored, " << h.timeouts << " timed out\n";
            if (h.count > 0)
            {
                os << "  handover delay ms    mean " << ms(h.mean_us) << "  p50 " << ms(h.p50_us) << "  p90 "
                   << ms(h.p90_us) << "  p99 " << ms(h.p99_us) << "  max " << ms(h.max_us) << "  stddev "
                   << ms(std::sqrt(h.variance)) << "\n";
            }
        }
        const FibStats &f = s.fib;
        os << std::setprecision(1);
        os << "  FIB entries          edge avg " << f.avg_edge << ", border avg " << f.avg_border << ", reduction "
           << 100 * f.reduction << "%\n";
        if (f.day_samples > 0 && f.night_samples > 0)
            os << "  border FIB           day avg " << f.border_day << ", night avg " << f.border_night << "\n";
        os << std::setprecision(3);
        os << "  ACL                  " << s.acl_hits << " evaluations, " << s.acl_drops << " drops, "
           << s.drop_permille << " permille (second half " << s.steady_drop_permille << ")\n";
        os << "  control messages    ";
        for (std::size_t k = 0; k < kMsgKindCount; ++k)
        {
            if (s.messages[k] > 0)
                os << ' ' << msg_kind_name(static_cast<MsgKind>(k)) << '=' << s.messages[k];
        }
        os << "\n";
        const Conservation &c = s.conservation;
        os << "  packets              injected " << c.injected << ", delivered " << c.delivered << ", external "
           << c.external << ", dropped " << c.dropped_total() << ", in flight " << c.in_flight << ", held " << c.held
           << (c.balanced() ? "" : "  (UNBALANCED)") << "\n";
        if (c.dropped_total() > 0)
        {
            os << "  drops by reason     ";
            for (std::size_t r = 0; r < kDropReasonCount; ++r)
            {
                if (c.dropped[r] > 0)
                    os << ' ' << drop_reason_name(static_cast<DropReason>(r)) << '=' << c.dropped[r];
            }
            os << "\n";
        }
        os.unsetf(std::ios::fixed);
    }
}
