#pragma once

#include <string>
#include <string_view>
#include <variant>

#include "grubsim/global_engine.hpp"
#include "grubsim/partitioned.hpp"

namespace grubsim {

struct GlobalPolicy {
    ReclaimMode mode = ReclaimMode::Parallel;
};

/// Scheduling policy of one run.
struct Policy {
    std::variant<PartitionedPolicy, GlobalPolicy> kind;
    std::string label; // column name in CSVs; derived when empty

    static Policy partitioned(Heuristic h, bool migration = true, bool balancing = false)
    {
        PartitionedPolicy p;
        p.heuristic = h;
        p.migration.enabled = migration;
        p.balancing.enabled = balancing;
        return {p, {}};
    }

    static Policy global(ReclaimMode mode) { return {GlobalPolicy{mode}, {}}; }

    bool is_global() const { return std::holds_alternative<GlobalPolicy>(kind); }

    std::string name() const
    {
        if (!label.empty())
            return label;
        if (const auto* g = std::get_if<GlobalPolicy>(&kind))
            return to_string(g->mode);
        const auto& p = std::get<PartitionedPolicy>(kind);
        std::string s = to_string(p.heuristic);
        if (!p.migration.enabled)
            s += "-nomig";
        if (p.balancing.enabled)
            s += "-lb";
        return s;
    }
};

/// Parses a policy name: ff, bf, wf, gpar, gseq (also g-par / g-seq).
inline std::optional<Policy> parse_policy(std::string_view name, bool migration = true, bool balancing = false)
{
    if (name == "gpar" || name == "g-par")
        return Policy::global(ReclaimMode::Parallel);
    if (name == "gseq" || name == "g-seq")
        return Policy::global(ReclaimMode::Sequential);
    if (auto h = parse_heuristic(name))
        return Policy::partitioned(*h, migration, balancing);
    return std::nullopt;
}

inline RunResult run_simulation(const Scenario& sc, const Policy& policy, const RunOptions& opt = {})
{
    Tick horizon = opt.horizon.value_or(sc.horizon());
    if (horizon <= 0)
        fail(ErrorKind::Config, "horizon must be positive");
    if (const auto* g = std::get_if<GlobalPolicy>(&policy.kind)) {
        GlobalSystem sys(sc.cores(), sc.tasks, sc.seed, g->mode, opt, horizon);
        return sys.run();
    }
    PartitionedSystem sys(sc.cores(), sc.tasks, sc.seed, std::get<PartitionedPolicy>(policy.kind), opt, horizon);
    return sys.run();
}

} // namespace grubsim
