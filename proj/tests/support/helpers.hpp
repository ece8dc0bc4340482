#pragma once

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "grubsim/engine.hpp"

namespace grubsim::testing {

/// Task whose job demands cycle through `demands`.
inline TaskSpec fixed_task(TaskId id, Tick period, Tick budget, std::vector<Tick> demands, Tick arrival = 0)
{
    TaskSpec t;
    t.id = id;
    t.period = period;
    t.budget = budget;
    t.arrival_time = arrival;
    t.exec.kind = ExecKind::Fixed;
    t.exec.fixed = std::move(demands);
    t.exec.budget = budget;
    return t;
}

inline RunOptions checked(bool record = true)
{
    RunOptions o;
    o.debug_asserts = true;
    o.record_jobs = record;
    return o;
}

inline PartitionedPolicy partitioned(Heuristic h = Heuristic::WorstFit, bool migration = true, bool balancing = false)
{
    PartitionedPolicy p;
    p.heuristic = h;
    p.migration.enabled = migration;
    p.balancing.enabled = balancing;
    return p;
}

inline Rational q(std::int64_t n, std::int64_t d = 1) { return Rational(n, d); }

inline std::string read_file(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    auto p = std::filesystem::temp_directory_path() / ("grubsim_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace grubsim::testing
