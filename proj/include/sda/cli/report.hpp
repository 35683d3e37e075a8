#pragma once

#include "sda/sim/metrics.hpp"
#include "sda/sim/scenario.hpp"

#include <iosfwd>
#include <string>

namespace sda
{
    /// The four CSV exports, rendered in memory.
    struct CsvSet
    {
        std::string fib;
        std::string handover;
        std::string control;
        std::string drops;

        friend bool operator==(const CsvSet &, const CsvSet &) = default;
    };

    CsvSet render_csvs(const MetricsSeries &m);

    /// Writes fib.csv, handover.csv, control.csv and drops.csv into dir
    /// (created if needed). An aborted run also gets a PARTIAL marker file.
    void write_csvs(const MetricsSeries &m, const CsvSet &csv, const std::string &dir);

    struct HandoverStats
    {
        std::size_t count = 0;
        std::uint64_t timeouts = 0;
        double mean_us = 0;
        /// Unbiased sample variance, µs².
        double variance = 0;
        double p50_us = 0;
        double p90_us = 0;
        double p99_us = 0;
        double max_us = 0;
    };

    struct FibStats
    {
        double avg_edge = 0;
        double avg_border = 0;
        /// 1 - avg_edge / avg_border, 0 when there is nothing at the borders.
        double reduction = 0;
        double border_day = 0;
        double border_night = 0;
        std::size_t day_samples = 0;
        std::size_t night_samples = 0;
    };

    struct Summary
    {
        std::string scenario;
        ControlPlaneMode mode = ControlPlaneMode::Reactive;
        HandoverStats handover;
        FibStats fib;
        std::uint64_t acl_hits = 0;
        std::uint64_t acl_drops = 0;
        double drop_permille = 0;
        /// Over the second half of the run only.
        double steady_drop_permille = 0;
        KindCounts messages{};
        Conservation conservation;
        std::uint64_t events = 0;
        bool aborted = false;
        std::string abort_reason;
    };

    HandoverStats handover_stats(const MetricsSeries &m);
    FibStats fib_stats(const MetricsSeries &m, const DiurnalProfile &profile);
    /// ACL drops per thousand evaluations over samples with from <= time < to.
    double drop_permille(const MetricsSeries &m, SimTime from, SimTime to);
    bool working_hours(const DiurnalProfile &profile, double calendar_seconds);

    Summary summarize(const MetricsSeries &m, const Scenario &sc);
    void print_summary(std::ostream &os, const Summary &s);
}
