#include "sda/cli/presets.hpp"
#include "sda/cli/report.hpp"
#include "sda/cli/scenario_file.hpp"
#include "sda/sim/simulation.hpp"

#include "CLI11.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <thread>

namespace
{
    using namespace sda;

    /// A path to a scenario file, or the name of a bundled preset.
    LoadResult load_any(const std::string &ref)
    {
        if (std::filesystem::is_regular_file(ref))
            return load_scenario_file(ref);
        if (preset_text(ref))
            return load_preset(ref);
        LoadResult out;
        out.errors.push_back({ref, "neither a readable file nor a preset name"});
        return out;
    }

    void report_errors(const std::vector<ScenarioIssue> &errors)
    {
        std::cerr << "scenario rejected (" << errors.size() << (errors.size() == 1 ? " error" : " errors") << "):\n";
        for (const ScenarioIssue &e : errors)
            std::cerr << "  " << e.to_string() << "\n";
    }

    struct RunOptions
    {
        std::string scenario;
        std::string out_dir;
        std::optional<std::uint64_t> seed;
        std::string mode;
        std::optional<double> timescale;
        bool validate_only = false;
    };

    struct ModeRun
    {
        Scenario scenario;
        MetricsSeries metrics;
        double wall_s = 0;
    };

    int run_command(const RunOptions &opt)
    {
        LoadResult loaded = load_any(opt.scenario);
        if (!loaded.ok())
        {
            report_errors(loaded.errors);
            return 2;
        }
        Scenario base = *loaded.scenario;
        if (opt.seed)
            base.seed = *opt.seed;
        if (opt.timescale)
            base.timescale = *opt.timescale;

        std::vector<ModeRun> runs;
        auto with_mode = [&](ControlPlaneMode m) {
            ModeRun r;
            r.scenario = base;
            r.scenario.control_plane = m;
            runs.push_back(std::move(r));
        };
        if (opt.mode.empty())
            with_mode(base.control_plane);
        else if (opt.mode == "reactive")
            with_mode(ControlPlaneMode::Reactive);
        else if (opt.mode == "proactive")
            with_mode(ControlPlaneMode::Proactive);
        else
        {
            with_mode(ControlPlaneMode::Reactive);
            with_mode(ControlPlaneMode::Proactive);
        }

        for (const ModeRun &r : runs)
        {
            auto issues = validate_scenario(r.scenario);
            if (!issues.empty())
            {
                report_errors(issues);
                return 2;
            }
        }
        if (opt.validate_only)
        {
            std::cout << "scenario " << base.name << " is valid\n";
            return 0;
        }

        std::string out_dir = opt.out_dir;
        if (out_dir.empty())
        {
            const char *env = std::getenv("SDA_OUT_DIR");
            out_dir = env && *env ? env : "out/" + base.name;
        }

        // independent runs, one thread each
        std::vector<std::thread> threads;
        for (ModeRun &r : runs)
        {
            threads.emplace_back([&r] {
                const auto t0 = std::chrono::steady_clock::now();
                Simulation sim(r.scenario);
                r.metrics = sim.run();
                r.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            });
        }
        for (auto &t : threads)
            t.join();

        int status = 0;
        for (const ModeRun &r : runs)
        {
            const std::string dir =
                runs.size() > 1 ? (std::filesystem::path(out_dir) / mode_name(r.scenario.control_plane)).string() : out_dir;
            write_csvs(r.metrics, render_csvs(r.metrics), dir);
            print_summary(std::cout, summarize(r.metrics, r.scenario));
            std::cout << "  wall time            " << r.wall_s << " s\n";
            std::cout << "  CSVs                 " << dir << (r.metrics.aborted ? " (partial)" : "") << "\n";
            if (r.metrics.aborted)
                status = 1;
        }
        if (runs.size() == 2)
        {
            const HandoverStats re = handover_stats(runs[0].metrics);
            const HandoverStats pro = handover_stats(runs[1].metrics);
            if (re.count > 0 && pro.count > 0 && re.mean_us > 0)
                std::cout << "proactive/reactive mean handover delay ratio " << pro.mean_us / re.mean_us << "\n";
        }
        return status;
    }
}

int main(int argc, char **argv)
{
    CLI::App app{"Discrete-event simulator of a software-defined enterprise access fabric"};
    app.require_subcommand(1);

    RunOptions run_opt;
    std::uint64_t seed = 0;
    double timescale = 0;
    auto *run = app.add_subcommand("run", "Run a scenario file or bundled preset and export CSVs");
    run->add_option("scenario", run_opt.scenario, "Scenario file path or preset name")->required();
    run->add_option("-o,--out", run_opt.out_dir, "Output directory (default: $SDA_OUT_DIR or out/<name>)");
    auto *seed_opt = run->add_option("-s,--seed", seed, "Override the scenario seed");
    run->add_option("-m,--mode", run_opt.mode, "Control plane: reactive, proactive or both")
        ->check(CLI::IsMember({"reactive", "proactive", "both"}));
    auto *ts_opt = run->add_option("-t,--timescale", timescale, "Calendar seconds per simulated second")
                       ->check(CLI::PositiveNumber);
    run->add_flag("--validate-only", run_opt.validate_only, "Validate with overrides applied, then stop");

    std::string validate_ref;
    bool echo = true;
    auto *validate = app.add_subcommand("validate", "Check a scenario and print it with defaults filled in");
    validate->add_option("scenario", validate_ref, "Scenario file path or preset name")->required();
    validate->add_flag("!--no-echo", echo, "Do not print the resolved scenario");

    std::string show;
    auto *presets = app.add_subcommand("presets", "List bundled presets, or print one");
    presets->add_option("name", show, "Preset to print");

    CLI11_PARSE(app, argc, argv);

    try
    {
        if (*run)
        {
            if (*seed_opt)
                run_opt.seed = seed;
            if (*ts_opt)
                run_opt.timescale = timescale;
            return run_command(run_opt);
        }
        if (*validate)
        {
            LoadResult r = load_any(validate_ref);
            if (!r.ok())
            {
                report_errors(r.errors);
                return 2;
            }
            std::cout << "ok: " << r.scenario->name << "\n";
            if (echo)
                std::cout << scenario_to_json(*r.scenario).dump(2) << "\n";
            return 0;
        }
        if (*presets)
        {
            if (!show.empty())
            {
                auto text = preset_text(show);
                if (!text)
                {
                    std::cerr << "no such preset: " << show << "\n";
                    return 2;
                }
                std::cout << *text;
                return 0;
            }
            for (const std::string &name : preset_names())
            {
                LoadResult r = load_preset(name);
                if (!r.ok())
                {
                    std::cout << name << "  (invalid)\n";
                    continue;
                }
                const Scenario &sc = *r.scenario;
                unsigned endpoints = 0;
                for (const EndpointBlock &b : sc.endpoints)
                    endpoints += b.count;
                std::cout << name << "  " << sc.topology.border_count << " borders, " << sc.topology.edge_count
                          << " edges, " << endpoints << " endpoints, " << sc.duration_s << " s, "
                          << mode_name(sc.control_plane) << "\n";
            }
            return 0;
        }
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
