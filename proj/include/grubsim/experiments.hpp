#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "grubsim/engine.hpp"
#include "grubsim/scenario_io.hpp"

namespace grubsim {

/// Numeric CSV cell: 9 significant digits.
inline std::string csv_number(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

struct Estimate {
    double mean = 0.0;
    double ci = 0.0; // 95% normal-approximation half-width
};

/// Mean and 1.96 s / sqrt(N) with the sample standard deviation.
inline Estimate estimate(const std::vector<double>& xs)
{
    Estimate e;
    if (xs.empty())
        return e;
    double sum = 0.0;
    for (double x : xs)
        sum += x;
    e.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs)
            ss += (x - e.mean) * (x - e.mean);
        double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
        e.ci = 1.96 * sd / std::sqrt(static_cast<double>(xs.size()));
    }
    return e;
}

/// Runs `fn(i)` for i in [0, count) on `workers` threads. Failures are
/// reported for the lowest failing index so the outcome does not depend on
/// thread timing.
template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn fn)
{
    if (workers == 0)
        workers = std::max(1u, std::thread::hardware_concurrency());
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(count, 1)));
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto body = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (workers <= 1) {
        body();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w)
            pool.emplace_back(body);
        for (auto& t : pool)
            t.join();
    }
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}

// ---- sweeps ------------------------------------------------------------

struct SweepSpec {
    std::string name = "sweep";
    std::vector<Bandwidth> grid;
    std::uint32_t scenarios = 100;
    ScenarioConfig scenario; // n, m, execution model, horizon ...; target_util and seed are per point
    std::vector<Policy> policies;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    bool debug_asserts = false;
    unsigned jobs = 0; // 0: hardware threads
};

enum class SweepMetric { Migrations, TaskMigrations, MissRatio };

inline const char* metric_suffix(SweepMetric m)
{
    switch (m) {
    case SweepMetric::Migrations: return "migrations";
    case SweepMetric::TaskMigrations: return "task_migrations";
    case SweepMetric::MissRatio: return "miss_ratio";
    }
    return "?";
}

inline constexpr SweepMetric kSweepMetrics[] = {SweepMetric::Migrations, SweepMetric::TaskMigrations,
                                                SweepMetric::MissRatio};

inline double metric_value(const RunMetrics& m, SweepMetric k)
{
    switch (k) {
    case SweepMetric::Migrations: return m.migrations_per_job();
    case SweepMetric::TaskMigrations: return m.task_migrations_per_job();
    case SweepMetric::MissRatio: return m.miss_ratio();
    }
    return 0.0;
}

struct SweepPoint {
    Bandwidth util;
    bool absent = false;
    std::string warning;
    std::vector<std::uint64_t> scenario_seeds;
    std::vector<std::uint64_t> attempts; // discarded attempts per scenario
    // [policy][scenario]
    std::vector<std::vector<RunMetrics>> runs;

    std::vector<double> values(std::size_t policy, SweepMetric k) const
    {
        std::vector<double> out;
        for (const auto& m : runs.at(policy))
            out.push_back(metric_value(m, k));
        return out;
    }

    Estimate stat(std::size_t policy, SweepMetric k) const { return estimate(values(policy, k)); }
};

struct SweepResult {
    std::vector<std::string> policy_names;
    std::vector<SweepPoint> points;

    std::size_t policy_index(const std::string& name) const
    {
        for (std::size_t i = 0; i < policy_names.size(); ++i)
            if (policy_names[i] == name)
                return i;
        fail(ErrorKind::Config, "no policy named " + name + " in sweep");
    }
};

/// Master seed of scenario k at utilization u. Keyed by the utilization
/// value, not its grid position, so sub-grids reuse the same task sets.
inline std::uint64_t sweep_scenario_seed(std::uint64_t master, const Bandwidth& u, std::uint32_t k)
{
    auto micro = static_cast<std::uint64_t>((u.value() * Rational(kUtilDenominator)).round());
    return derive_seed(derive_seed(master, micro), k);
}

/// Every policy runs on the same accepted scenarios of each grid point.
inline SweepResult run_sweep_in_memory(const SweepSpec& spec)
{
    if (spec.grid.empty())
        fail(ErrorKind::Config, "sweep grid is empty");
    if (spec.scenarios == 0)
        fail(ErrorKind::Config, "sweep needs at least one scenario per point");
    if (spec.policies.empty())
        fail(ErrorKind::Config, "sweep needs at least one policy");
    SweepResult res;
    for (const auto& p : spec.policies)
        res.policy_names.push_back(p.name());
    res.points.resize(spec.grid.size());

    // generation first: a failure marks the whole point absent
    std::vector<std::vector<Scenario>> scenarios(spec.grid.size());
    for (std::size_t g = 0; g < spec.grid.size(); ++g) {
        auto& pt = res.points[g];
        pt.util = spec.grid[g];
        pt.runs.assign(spec.policies.size(), std::vector<RunMetrics>(spec.scenarios));
        try {
            for (std::uint32_t k = 0; k < spec.scenarios; ++k) {
                ScenarioConfig cfg = spec.scenario;
                cfg.target_util = spec.grid[g];
                cfg.seed = sweep_scenario_seed(spec.seed, spec.grid[g], k);
                scenarios[g].push_back(generate_scenario_retrying(cfg));
                pt.scenario_seeds.push_back(scenarios[g].back().seed);
                pt.attempts.push_back(scenarios[g].back().attempt);
            }
        } catch (const SimError& e) {
            if (e.kind() != ErrorKind::Generation && e.kind() != ErrorKind::Config)
                throw;
            pt.absent = true;
            pt.warning = e.what();
            pt.runs.assign(spec.policies.size(), {});
            scenarios[g].clear();
        }
    }

    std::vector<std::pair<std::size_t, std::uint32_t>> work;
    for (std::size_t g = 0; g < spec.grid.size(); ++g)
        for (std::uint32_t k = 0; k < scenarios[g].size(); ++k)
            work.emplace_back(g, k);
    RunOptions opt;
    opt.debug_asserts = spec.debug_asserts;
    parallel_for(work.size(), spec.jobs, [&](std::size_t i) {
        auto [g, k] = work[i];
        for (std::size_t p = 0; p < spec.policies.size(); ++p)
            res.points[g].runs[p][k] = run_simulation(scenarios[g][k], spec.policies[p], opt).metrics;
    });
    return res;
}

/// One CSV per metric: total_util, one mean column per policy, then one CI
/// column per policy. Absent points carry NA cells.
inline std::string sweep_csv(const SweepResult& r, SweepMetric k)
{
    std::string out = "total_util";
    for (const auto& n : r.policy_names)
        out += "," + n;
    for (const auto& n : r.policy_names)
        out += "," + n + "_ci";
    out += "\n";
    for (const auto& pt : r.points) {
        out += csv_number(pt.util.to_double());
        std::vector<Estimate> est;
        for (std::size_t p = 0; p < r.policy_names.size(); ++p)
            est.push_back(pt.absent ? Estimate{} : pt.stat(p, k));
        for (const auto& e : est)
            out += "," + (pt.absent ? std::string("NA") : csv_number(e.mean));
        for (const auto& e : est)
            out += "," + (pt.absent ? std::string("NA") : csv_number(e.ci));
        out += "\n";
    }
    return out;
}

inline std::string sweep_log(const SweepSpec& spec, const SweepResult& r)
{
    std::string out = "sweep " + spec.name + " seed=" + std::to_string(spec.seed) +
                      " scenarios=" + std::to_string(spec.scenarios) + " m=" + std::to_string(spec.scenario.m) +
                      " n=" + std::to_string(spec.scenario.n) + " horizon=" + std::to_string(spec.scenario.horizon) +
                      "\n";
    for (const auto& pt : r.points) {
        out += "util=" + pt.util.to_string();
        if (pt.absent) {
            out += " ABSENT warning=\"" + pt.warning + "\"\n";
            continue;
        }
        std::uint64_t discards = 0;
        for (auto a : pt.attempts)
            discards += a;
        out += " scenarios=" + std::to_string(pt.runs.empty() ? 0 : pt.runs[0].size()) +
               " discards=" + std::to_string(discards) + "\n";
        for (std::size_t p = 0; p < r.policy_names.size(); ++p) {
            std::uint64_t jobs = 0, missed = 0, temp = 0, perm = 0, gedf = 0, srv = 0, unfinished = 0;
            for (const auto& m : pt.runs[p]) {
                jobs += m.jobs_total;
                missed += m.jobs_missed;
                temp += m.temp_migrations;
                perm += m.perm_migrations;
                gedf += m.gedf_migrations;
                srv += m.server_deadline_misses;
                unfinished += m.jobs_unfinished;
            }
            out += "  " + r.policy_names[p] + " jobs=" + std::to_string(jobs) + " missed=" + std::to_string(missed) +
                   " unfinished=" + std::to_string(unfinished) + " temp_migrations=" + std::to_string(temp) +
                   " perm_migrations=" + std::to_string(perm) + " gedf_migrations=" + std::to_string(gedf) +
                   " server_deadline_misses=" + std::to_string(srv) + "\n";
        }
    }
    return out;
}

inline std::string sweep_csv_path(const SweepSpec& spec, SweepMetric k)
{
    return (std::filesystem::path(spec.out_dir) / (spec.name + "_" + metric_suffix(k) + ".csv")).string();
}

/// Writes <name>_migrations.csv, <name>_task_migrations.csv,
/// <name>_miss_ratio.csv and <name>.log into spec.out_dir.
inline SweepResult run_sweep(const SweepSpec& spec)
{
    SweepResult r = run_sweep_in_memory(spec);
    std::filesystem::create_directories(spec.out_dir);
    for (auto k : kSweepMetrics)
        write_text_file(sweep_csv_path(spec, k), sweep_csv(r, k));
    write_text_file((std::filesystem::path(spec.out_dir) / (spec.name + ".log")).string(), sweep_log(spec, r));
    return r;
}

// ---- dynamic demo ------------------------------------------------------

struct DynamicConfig {
    std::string name = "dynamic";
    ScenarioConfig scenario; // base task set plus the inserted task
    Heuristic heuristic = Heuristic::WorstFit;
    BalancerConfig balancing; // enabled is overridden per run
    MigrationConfig migration;
    double ema_alpha = 1.0 / 200.0;
    Tick miss_window = 500;
    Tick sample_stride = 1;
    Tick gap_from = 2500;
    Tick gap_to = 6000;
    std::string out_dir = ".";
    bool debug_asserts = false;

    DynamicConfig()
    {
        scenario.n = 12;
        scenario.m = 2;
        scenario.target_util = Bandwidth(6, 5);
        scenario.exec_min = 2;
        scenario.exec_max = 10;
        scenario.horizon = 10'000;
        scenario.seed = 4;
        scenario.dynamic_tasks = {{Bandwidth(3, 10), 2000, 6000, 3.0}};
    }
};

struct DynamicRun {
    bool balancing = false;
    RunResult result;
    double mean_gap = 0.0; // time average of |EMA core0 - EMA core1| over [gap_from, gap_to]
};

struct DynamicResult {
    Scenario scenario;
    DynamicRun off;
    DynamicRun on;
};

/// Time average over [from, to] of the absolute EMA difference of the
/// first two cores.
inline double mean_ema_gap(const CoreSeries& s, Tick from, Tick to)
{
    if (s.active_ema.size() < 2)
        fail(ErrorKind::Config, "EMA gap needs at least two cores");
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < s.time.size(); ++i) {
        if (s.time[i] < from || s.time[i] > to)
            continue;
        sum += std::abs(s.active_ema[0][i] - s.active_ema[1][i]);
        ++count;
    }
    if (count == 0)
        fail(ErrorKind::Config, "EMA gap window holds no samples");
    return sum / static_cast<double>(count);
}

inline DynamicResult run_dynamic_in_memory(const DynamicConfig& cfg)
{
    DynamicResult out;
    out.scenario = generate_scenario_retrying(cfg.scenario);
    RunOptions opt;
    opt.sample_stride = cfg.sample_stride;
    opt.ema_alpha = cfg.ema_alpha;
    opt.miss_window_ticks = cfg.miss_window;
    opt.debug_asserts = cfg.debug_asserts;
    for (bool bal : {false, true}) {
        PartitionedPolicy p;
        p.heuristic = cfg.heuristic;
        p.migration = cfg.migration;
        p.balancing = cfg.balancing;
        p.balancing.enabled = bal;
        DynamicRun& run = bal ? out.on : out.off;
        run.balancing = bal;
        run.result = run_simulation(out.scenario, Policy{p, {}}, opt);
        run.mean_gap = mean_ema_gap(run.result.series, cfg.gap_from, cfg.gap_to);
    }
    return out;
}

inline std::string dynamic_csv(const DynamicConfig& cfg, const DynamicResult& r, const DynamicRun& run, bool ema)
{
    const auto& s = run.result.series;
    std::string out;
    out += "# name=" + cfg.name + " policy=" + to_string(cfg.heuristic) +
           " balancing=" + (run.balancing ? "on" : "off") + " seed=" + std::to_string(r.scenario.seed) + "\n";
    out += "# metric=" + std::string(ema ? "active_utilization_ema" : "miss_ratio") +
           " ema_alpha=" + csv_number(cfg.ema_alpha) + " miss_window=" + std::to_string(cfg.miss_window) + "\n";
    std::string rejected;
    for (auto t : run.result.rejected_tasks)
        rejected += (rejected.empty() ? "" : ";") + std::to_string(t);
    out += "# rejected_tasks=" + (rejected.empty() ? std::string("none") : rejected) +
           " perm_migrations=" + std::to_string(run.result.metrics.perm_migrations) +
           " temp_migrations=" + std::to_string(run.result.metrics.temp_migrations) +
           " mean_ema_gap=" + csv_number(run.mean_gap) + "\n";
    out += "time";
    for (std::size_t c = 0; c < s.active_ema.size(); ++c)
        out += ",core" + std::to_string(c);
    out += "\n";
    const auto& cols = ema ? s.active_ema : s.miss_ratio;
    for (std::size_t i = 0; i < s.time.size(); ++i) {
        out += std::to_string(s.time[i]);
        for (const auto& col : cols)
            out += "," + csv_number(col[i]);
        out += "\n";
    }
    return out;
}

inline std::string dynamic_csv_path(const DynamicConfig& cfg, bool balancing, bool ema)
{
    std::string f = cfg.name + (balancing ? "_balancing_on_" : "_balancing_off_") + (ema ? "active_ema" : "miss_ratio") +
                    ".csv";
    return (std::filesystem::path(cfg.out_dir) / f).string();
}

/// Two runs differing only in the balancing flag; per run one CSV of the
/// active-utilization EMA and one of the windowed miss ratio, per core.
inline DynamicResult run_dynamic_demo(const DynamicConfig& cfg)
{
    DynamicResult r = run_dynamic_in_memory(cfg);
    std::filesystem::create_directories(cfg.out_dir);
    for (const DynamicRun* run : {&r.off, &r.on})
        for (bool ema : {true, false})
            write_text_file(dynamic_csv_path(cfg, run->balancing, ema), dynamic_csv(cfg, r, *run, ema));
    return r;
}

// ---- JSON specs --------------------------------------------------------

inline Policy policy_from_json(const Json& j, const std::string& path)
{
    if (j.is_string()) {
        auto p = parse_policy(j.get<std::string>());
        if (!p)
            fail(ErrorKind::Config, "field '" + path + "': unknown policy '" + j.get<std::string>() + "'");
        return *p;
    }
    JsonReader r(j, path);
    std::string name = r.string("name");
    auto p = parse_policy(name, r.boolean("migration", true), r.boolean("balancing", false));
    if (!p)
        r.error("name", "unknown policy '" + name + "'");
    p->label = r.string("label", "");
    if (auto* pp = std::get_if<PartitionedPolicy>(&p->kind)) {
        pp->balancing.window_size = static_cast<std::uint32_t>(r.integer("window_size", pp->balancing.window_size));
        if (r.has("miss_threshold"))
            pp->balancing.miss_threshold = r.rational("miss_threshold");
        if (r.has("deferred_timeout"))
            pp->balancing.deferred_timeout = r.integer("deferred_timeout");
        if (r.has("epsilon"))
            pp->migration.epsilon = r.rational("epsilon");
        if (pp->balancing.window_size == 0)
            r.error("window_size", "must be >= 1");
        if (pp->migration.epsilon.sign() < 0)
            r.error("epsilon", "must be >= 0");
    }
    r.finish();
    return *p;
}

inline std::vector<Bandwidth> grid_from_json(const JsonReader& r)
{
    const Json& g = r.raw("grid");
    std::vector<Bandwidth> out;
    if (g.is_array()) {
        for (std::size_t i = 0; i < g.size(); ++i) {
            Json wrap = {{"v", g[i]}};
            JsonReader e(wrap, r.element("grid", i));
            out.push_back(e.bandwidth("v"));
        }
    } else {
        JsonReader e = r.object("grid");
        Rational from = e.rational("from"), to = e.rational("to"), step = e.rational("step");
        e.finish();
        if (step.sign() <= 0)
            e.error("step", "must be positive");
        if (to < from)
            e.error("to", "must be >= from");
        for (Rational u = from; u <= to; u += step)
            out.emplace_back(u);
    }
    if (out.empty())
        r.error("grid", "must not be empty");
    for (const auto& u : out)
        if (u.is_zero())
            r.error("grid", "utilizations must be positive");
    return out;
}

inline SweepSpec sweep_spec_from_json(const Json& j)
{
    JsonReader r(j, "");
    check_schema_version(r);
    SweepSpec s;
    s.name = r.string("name", s.name);
    s.grid = grid_from_json(r);
    s.scenarios = static_cast<std::uint32_t>(r.integer("scenarios", s.scenarios));
    if (s.scenarios == 0)
        r.error("scenarios", "must be >= 1");
    s.seed = r.unsigned_integer("seed", s.seed);
    s.out_dir = r.string("out_dir", s.out_dir);
    s.debug_asserts = r.boolean("debug_asserts", false);
    s.jobs = static_cast<unsigned>(r.integer("jobs", 0));
    if (r.has("scenario")) {
        JsonReader c = r.object("scenario");
        read_scenario_config_fields(c, s.scenario);
        c.finish();
    }
    const Json& pols = r.array("policies");
    for (std::size_t i = 0; i < pols.size(); ++i)
        s.policies.push_back(policy_from_json(pols[i], r.element("policies", i)));
    if (s.policies.empty())
        r.error("policies", "must not be empty");
    r.finish();
    return s;
}

inline DynamicConfig dynamic_config_from_json(const Json& j)
{
    JsonReader r(j, "");
    check_schema_version(r);
    DynamicConfig c;
    c.name = r.string("name", c.name);
    if (r.has("heuristic")) {
        auto h = parse_heuristic(r.string("heuristic"));
        if (!h)
            r.error("heuristic", "expected ff, bf or wf");
        c.heuristic = *h;
    }
    c.balancing.window_size = static_cast<std::uint32_t>(r.integer("window_size", c.balancing.window_size));
    if (r.has("miss_threshold"))
        c.balancing.miss_threshold = r.rational("miss_threshold");
    if (r.has("deferred_timeout"))
        c.balancing.deferred_timeout = r.integer("deferred_timeout");
    c.migration.enabled = r.boolean("migration", true);
    if (r.has("epsilon"))
        c.migration.epsilon = r.rational("epsilon");
    if (r.has("ema_alpha"))
        c.ema_alpha = r.rational("ema_alpha").to_double();
    c.miss_window = r.integer("miss_window", c.miss_window);
    c.sample_stride = r.integer("sample_stride", c.sample_stride);
    c.gap_from = r.integer("gap_from", c.gap_from);
    c.gap_to = r.integer("gap_to", c.gap_to);
    c.out_dir = r.string("out_dir", c.out_dir);
    c.debug_asserts = r.boolean("debug_asserts", false);
    if (r.has("scenario")) {
        JsonReader s = r.object("scenario");
        read_scenario_config_fields(s, c.scenario);
        s.finish();
    }
    if (!(c.ema_alpha > 0.0 && c.ema_alpha <= 1.0))
        r.error("ema_alpha", "must be in (0, 1]");
    if (c.sample_stride <= 0)
        r.error("sample_stride", "must be positive");
    if (c.miss_window <= 0)
        r.error("miss_window", "must be positive");
    if (c.gap_to < c.gap_from)
        r.error("gap_to", "must be >= gap_from");
    if (c.scenario.m < 2)
        r.error("scenario.m", "the dynamic demo compares two cores");
    r.finish();
    return c;
}

} // namespace grubsim
