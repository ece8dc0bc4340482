#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "grubsim/workload.hpp"

namespace grubsim {

inline constexpr int kScenarioSchemaVersion = 1;

/// A task that enters at `insert_at` through the allocation strategy and
/// leaves at `remove_at`.
struct DynamicTaskSpec {
    Bandwidth util;
    Tick insert_at = 0;
    std::optional<Tick> remove_at;
    double overrun = 0.0; // > 1: every job overruns, demand Unif{B+1..overrun*B}
};

struct ScenarioConfig {
    std::uint32_t n = 25;
    std::uint32_t m = 4;
    Bandwidth target_util{1, 2};
    ExecKind exec_kind = ExecKind::TwoLevelUniform;
    double pm = 0.75;
    Bandwidth migrating_util{1, 10};
    std::uint64_t seed = 1;
    Tick horizon = 100'000;
    TaskKind arrival = TaskKind::Periodic;
    double sporadic_jitter = 0.2;
    double weibull_shape = 2.0;
    std::vector<DynamicTaskSpec> dynamic_tasks;
    std::uint64_t max_discards = 10'000;
    bool global_admission_filter = true; // also discard sets failing the global-EDF test
    Tick exec_min = kExecRangeMin; // bounds of the (minexec, maxexec) draws
    Tick exec_max = kExecRangeMax;
};

struct Scenario {
    ScenarioConfig config;
    std::uint64_t seed = 0;    // seed of the accepted attempt; drives job streams
    std::uint64_t attempt = 0; // number of discarded attempts before this one
    std::vector<TaskSpec> tasks;

    std::uint32_t cores() const { return config.m; }
    Tick horizon() const { return config.horizon; }

    std::vector<Bandwidth> static_utilizations() const
    {
        std::vector<Bandwidth> out;
        for (const auto& t : tasks)
            if (!t.dynamic)
                out.push_back(t.utilization());
        return out;
    }

    Rational total_static_util() const
    {
        Rational s;
        for (const auto& t : tasks)
            if (!t.dynamic)
                s += t.utilization().value();
        return s;
    }
};

/// Seed of the job stream (execution demands, sporadic jitter) of one task.
inline std::uint64_t job_stream_seed(std::uint64_t scenario_seed, TaskId task)
{
    return derive_seed(scenario_seed, 0xA11CE00000000000ULL + task);
}

/// Builds one task from a server utilization: execution range, model,
/// budget, and periods.
inline TaskSpec make_generated_task(TaskId id, const Bandwidth& u, const ScenarioConfig& cfg, Rng& rng)
{
    auto [lo, hi] = gen_exec_range(rng, cfg.exec_min, cfg.exec_max);
    ExecModel model = cfg.exec_kind == ExecKind::Weibull
                          ? make_weibull_model(lo, hi, cfg.pm, cfg.weibull_shape)
                          : make_two_level_model(lo, hi, two_level_budget(lo, hi, cfg.pm), cfg.pm);
    Tick b = derive_budget(model);
    auto derived = derive_periods(b, u);
    TaskSpec t;
    t.id = id;
    t.period = derived.period;
    t.budget = derived.budget;
    t.kind = cfg.arrival;
    t.exec = model;
    t.migrating_util = cfg.migrating_util;
    t.sporadic_jitter = cfg.sporadic_jitter;
    return t;
}

/// True when FF, BF and WF all partition the set and, unless disabled, the
/// global-EDF test passes.
inline bool scenario_filters_pass(const std::vector<Bandwidth>& utils, std::uint32_t m, bool global_test = true)
{
    for (auto h : {Heuristic::FirstFit, Heuristic::BestFit, Heuristic::WorstFit})
        if (!partition(utils, m, h))
            return false;
    return !global_test || global_edf_admission_test(utils, m);
}

/// One generation attempt with the given attempt seed. Returns nothing when
/// the set is discarded by the partitioning or schedulability filters.
inline std::optional<Scenario> generate_scenario(const ScenarioConfig& cfg, std::uint64_t attempt_seed)
{
    if (cfg.n == 0 || cfg.m == 0)
        fail(ErrorKind::Config, "scenario needs n >= 1 and m >= 1");
    if (cfg.target_util.is_zero() || cfg.target_util.value() > Rational(static_cast<std::int64_t>(cfg.m)))
        fail(ErrorKind::Config, "scenario target utilization must be in (0, m]");
    Rng rng(attempt_seed);
    auto utils = uunifast_discard(cfg.n, cfg.target_util, rng);
    Scenario sc;
    sc.config = cfg;
    sc.seed = attempt_seed;
    for (TaskId i = 0; i < cfg.n; ++i)
        sc.tasks.push_back(make_generated_task(i, utils[i], cfg, rng));
    for (const auto& d : cfg.dynamic_tasks) {
        auto t = make_generated_task(static_cast<TaskId>(sc.tasks.size()), d.util, cfg, rng);
        t.dynamic = true;
        if (d.overrun > 1.0) {
            auto top = static_cast<Tick>(std::llround(d.overrun * static_cast<double>(t.budget)));
            t.exec = make_two_level_model(t.budget, std::max(top, t.budget + 1), t.budget, 0.0);
        }
        t.arrival_time = d.insert_at;
        t.departure_time = d.remove_at;
        sc.tasks.push_back(t);
    }
    if (!scenario_filters_pass(sc.static_utilizations(), cfg.m, cfg.global_admission_filter))
        return std::nullopt;
    return sc;
}

/// Seed of generation attempt k. The master seed is mixed before the xor so
/// that (seed, k) pairs of different masters do not collide.
inline std::uint64_t attempt_seed(std::uint64_t seed, std::uint64_t k) { return derive_seed(mix64(seed), k); }

/// Retries attempts attempt_seed(cfg.seed, k), k = 0, 1, ... until one is
/// accepted. Gives up after cfg.max_discards consecutive discards.
inline Scenario generate_scenario_retrying(const ScenarioConfig& cfg)
{
    for (std::uint64_t k = 0; k <= cfg.max_discards; ++k) {
        if (auto sc = generate_scenario(cfg, attempt_seed(cfg.seed, k))) {
            sc->attempt = k;
            return *sc;
        }
    }
    fail(ErrorKind::Generation, "scenario generation: " + std::to_string(cfg.max_discards) +
                                    " consecutive discards at target utilization " +
                                    cfg.target_util.to_string());
}

} // namespace grubsim
