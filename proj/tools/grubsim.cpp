// grubsim: sweeps, dynamic demo, single simulations and scenario tools.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "grubsim/experiments.hpp"

namespace {

using namespace grubsim;

enum Exit { kOk = 0, kIo = 1, kUsage = 2, kInvariant = 3, kGeneration = 4 };

int exit_code(ErrorKind k)
{
    switch (k) {
    case ErrorKind::Io: return kIo;
    case ErrorKind::Config: return kUsage;
    case ErrorKind::Invariant:
    case ErrorKind::LedgerCorruption: return kInvariant;
    case ErrorKind::Generation: return kGeneration;
    }
    return kUsage;
}

/// One machine-parsable line: error kind=<kind> message="<text>".
void report(const std::string& kind, std::string msg)
{
    std::string esc;
    for (char c : msg) {
        if (c == '\n')
            esc += " | ";
        else if (c == '"' || c == '\\')
            esc += std::string("\\") + c;
        else
            esc += c;
    }
    std::cerr << "error kind=" << kind << " message=\"" << esc << "\"\n";
}

bool parse_on_off(const std::string& s, const char* flag)
{
    if (s == "on" || s == "true" || s == "1")
        return true;
    if (s == "off" || s == "false" || s == "0")
        return false;
    fail(ErrorKind::Config, std::string("--") + flag + ": expected on or off, got '" + s + "'");
}

std::string join_path(const std::string& dir, const std::string& file)
{
    if (dir.empty() || file.empty() || std::filesystem::path(file).is_absolute())
        return file;
    return (std::filesystem::path(dir) / file).string();
}

struct Globals {
    std::optional<std::uint64_t> seed;
    bool debug_asserts = false;
    std::string out_dir;
    unsigned jobs = 0;
};

Json metrics_json(const RunMetrics& m)
{
    Json j;
    j["jobs_total"] = m.jobs_total;
    j["jobs_missed"] = m.jobs_missed;
    j["jobs_unfinished"] = m.jobs_unfinished;
    j["miss_ratio"] = csv_number(m.miss_ratio());
    j["temp_migrations"] = m.temp_migrations;
    j["perm_migrations"] = m.perm_migrations;
    j["gedf_migrations"] = m.gedf_migrations;
    j["migrations_per_job"] = csv_number(m.migrations_per_job());
    j["rejections"] = m.rejections;
    j["lb_deferred"] = m.lb_deferred;
    j["lb_aborts"] = m.lb_aborts;
    j["postponements"] = m.postponements;
    j["server_deadline_misses"] = m.server_deadline_misses;
    return j;
}

void emit(const std::string& path, const std::string& text)
{
    if (path.empty() || path == "-")
        std::cout << text;
    else
        write_text_file(path, text);
}

int cmd_sweep(const Globals& g, const std::string& file)
{
    SweepSpec spec = sweep_spec_from_json(load_json_file(file));
    if (g.seed)
        spec.seed = *g.seed;
    if (!g.out_dir.empty())
        spec.out_dir = g.out_dir;
    if (g.jobs)
        spec.jobs = g.jobs;
    spec.debug_asserts = spec.debug_asserts || g.debug_asserts;
    auto r = run_sweep(spec);
    for (const auto& pt : r.points)
        if (pt.absent)
            std::cerr << "warning: point " << pt.util.to_string() << " absent: " << pt.warning << "\n";
    for (auto k : kSweepMetrics)
        std::cout << sweep_csv_path(spec, k) << "\n";
    return kOk;
}

int cmd_dynamic(const Globals& g, const std::string& file)
{
    DynamicConfig cfg = dynamic_config_from_json(load_json_file(file));
    if (g.seed)
        cfg.scenario.seed = *g.seed;
    if (!g.out_dir.empty())
        cfg.out_dir = g.out_dir;
    cfg.debug_asserts = cfg.debug_asserts || g.debug_asserts;
    auto r = run_dynamic_demo(cfg);
    std::cout << "mean_ema_gap balancing_off=" << csv_number(r.off.mean_gap)
              << " balancing_on=" << csv_number(r.on.mean_gap) << "\n";
    return kOk;
}

int cmd_simulate(const Globals& g, const std::string& file, const std::string& policy_name,
                 const std::string& migration, const std::string& balancing, const std::string& trace_path,
                 const std::string& out_path, std::optional<Tick> horizon)
{
    Scenario sc = scenario_from_json(load_json_file(file), "");
    auto policy = parse_policy(policy_name, parse_on_off(migration, "migration"), parse_on_off(balancing, "balancing"));
    if (!policy)
        fail(ErrorKind::Config, "--policy: unknown policy '" + policy_name + "' (expected ff, bf, wf, gpar, gseq)");
    if (g.seed)
        sc.seed = *g.seed;
    RunOptions opt;
    opt.debug_asserts = g.debug_asserts;
    opt.horizon = horizon;
    std::ofstream trace;
    if (!trace_path.empty()) {
        std::string p = join_path(g.out_dir, trace_path);
        trace.open(p, std::ios::binary);
        if (!trace)
            fail(ErrorKind::Io, "cannot write " + p);
        opt.trace = &trace;
    }
    auto r = run_simulation(sc, *policy, opt);
    Json j;
    j["policy"] = policy->name();
    j["seed"] = sc.seed;
    j["horizon"] = opt.horizon.value_or(sc.horizon());
    j["metrics"] = metrics_json(r.metrics);
    emit(join_path(g.out_dir, out_path), dump_json(j));
    return kOk;
}

int cmd_generate(const Globals& g, const std::string& file, const std::string& out_path)
{
    ScenarioConfig cfg = scenario_config_from_json(load_json_file(file), "");
    if (g.seed)
        cfg.seed = *g.seed;
    Scenario sc = generate_scenario_retrying(cfg);
    emit(join_path(g.out_dir, out_path), dump_json(to_json(sc)));
    return kOk;
}

int cmd_validate(const std::string& file)
{
    Scenario sc = scenario_from_json(load_json_file(file), "");
    auto utils = sc.static_utilizations();
    bool ff = partition(utils, sc.cores(), Heuristic::FirstFit).has_value();
    bool bf = partition(utils, sc.cores(), Heuristic::BestFit).has_value();
    bool wf = partition(utils, sc.cores(), Heuristic::WorstFit).has_value();
    bool gedf = global_edf_admission_test(utils, sc.cores());
    std::cout << "ok tasks=" << sc.tasks.size() << " m=" << sc.cores() << " total_util=" << csv_number(sc.total_static_util().to_double())
              << " ff=" << ff << " bf=" << bf << " wf=" << wf << " gedf_test=" << gedf << "\n";
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Partitioned GRUB simulator with temporary migration and load balancing"};
    app.require_subcommand(1);
    app.fallthrough(); // global flags may follow the subcommand
    Globals g;
    std::uint64_t seed = 0;
    auto* seed_opt = app.add_option("--seed", seed, "Override the master seed");
    app.add_flag("--debug-asserts", g.debug_asserts, "Check every invariant after every instant");
    app.add_option("--out-dir", g.out_dir, "Directory for output files");
    app.add_option("--jobs", g.jobs, "Parallel simulations (0: hardware threads)");

    std::string file;
    auto* sweep = app.add_subcommand("sweep", "Utilization sweep; writes one CSV per metric and a log");
    sweep->add_option("spec", file, "Sweep spec (JSON)")->required();
    auto* dynamic = app.add_subcommand("dynamic", "Task insertion/removal demo, balancing on and off");
    dynamic->add_option("config", file, "Dynamic demo config (JSON)")->required();

    std::string policy = "wf", migration = "on", balancing = "off", trace, out;
    std::optional<Tick> horizon;
    auto* simulate = app.add_subcommand("simulate", "Run one scenario under one policy");
    simulate->add_option("scenario", file, "Scenario file (JSON)")->required();
    simulate->add_option("--policy", policy, "ff, bf, wf, gpar or gseq");
    simulate->add_option("--migration", migration, "Temporary migration: on or off");
    simulate->add_option("--balancing", balancing, "Load balancing: on or off");
    simulate->add_option("--trace", trace, "Write the event trace (NDJSON) here");
    simulate->add_option("--out", out, "Write metrics (JSON) here instead of stdout");
    simulate->add_option("--horizon", horizon, "Override the scenario horizon");

    auto* generate = app.add_subcommand("generate", "Generate a scenario from a generator config");
    generate->add_option("config", file, "Generator config (JSON)")->required();
    generate->add_option("--out", out, "Scenario output file (default stdout)");

    auto* validate = app.add_subcommand("validate", "Parse and check a scenario file");
    validate->add_option("scenario", file, "Scenario file (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        report("usage", e.what());
        return kUsage;
    }
    if (*seed_opt)
        g.seed = seed;

    try {
        if (*sweep)
            return cmd_sweep(g, file);
        if (*dynamic)
            return cmd_dynamic(g, file);
        if (*simulate)
            return cmd_simulate(g, file, policy, migration, balancing, trace, out, horizon);
        if (*generate)
            return cmd_generate(g, file, out);
        if (*validate)
            return cmd_validate(file);
    } catch (const SimError& e) {
        report(to_string(e.kind()), e.what());
        return exit_code(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        report("io", e.what());
        return kIo;
    } catch (const std::exception& e) {
        report("internal", e.what());
        return kInvariant;
    }
    return kUsage;
}
