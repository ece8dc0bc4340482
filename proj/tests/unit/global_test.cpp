#include <gtest/gtest.h>

#include <sstream>

#include "support/helpers.hpp"

using namespace grubsim;
using grubsim::testing::checked;
using grubsim::testing::fixed_task;
using grubsim::testing::q;

namespace {

GlobalLedger parallel(std::uint32_t m, Bandwidth active)
{
    GlobalLedger l(ReclaimMode::Parallel, m);
    l.total_active = std::move(active);
    return l;
}

std::optional<CoreId> never(ServerId) { return std::nullopt; }

} // namespace

TEST(ReclaimRate, Parallel)
{
    // spare bandwidth covers everything above U_i: V advances at rate 1
    EXPECT_EQ(reclaim_rate(Bandwidth(1, 2), parallel(4, Bandwidth(2, 1)), 0), q(1));
    // saturated system: no reclaiming, budget consumed at wall-clock rate
    EXPECT_EQ(reclaim_rate(Bandwidth(1, 2), parallel(4, Bandwidth(4, 1)), 0), q(2));
    EXPECT_EQ(reclaim_rate(Bandwidth(1, 2), parallel(4, Bandwidth(7, 2)), 0), q(1));
    EXPECT_EQ(reclaim_rate(Bandwidth(1, 4), parallel(2, Bandwidth(3, 2)), 0), q(2));
}

TEST(ReclaimRate, SequentialBookedOnCore)
{
    GlobalLedger l(ReclaimMode::Sequential, 2);
    l.total_active = Bandwidth(3, 2);
    l.booked = {Bandwidth(1, 2), Bandwidth(1, 1)};
    EXPECT_EQ(reclaim_rate(Bandwidth(1, 2), l, 0), q(1));
    EXPECT_EQ(reclaim_rate(Bandwidth(1, 2), l, 1), q(2));
    l.booked[0] = Bandwidth(1, 4);
    EXPECT_THROW(reclaim_rate(Bandwidth(1, 2), l, 0), SimError);
}

TEST(ReclaimRate, SingleCoreIsPlainGrub)
{
    GlobalLedger p = parallel(1, Bandwidth(3, 4));
    GlobalLedger s(ReclaimMode::Sequential, 1);
    s.total_active = Bandwidth(3, 4);
    s.booked = {Bandwidth(3, 4)};
    EXPECT_EQ(reclaim_rate(Bandwidth(1, 4), p, 0), q(3));
    EXPECT_EQ(reclaim_rate(Bandwidth(1, 4), s, 0), q(3));
}

TEST(ReclaimRate, SpareNeverNegative)
{
    EXPECT_EQ(parallel(4, Bandwidth(2, 1)).spare(), q(2));
    EXPECT_EQ(parallel(2, Bandwidth(2, 1)).spare(), q(0));
}

TEST(GlobalEdfTest, DensityBound)
{
    std::vector<Bandwidth> five(5, Bandwidth(1, 2));
    EXPECT_TRUE(global_edf_admission_test(five, 4));
    std::vector<Bandwidth> heavy{Bandwidth(1, 2), Bandwidth(1, 2), Bandwidth(1, 2), Bandwidth(1, 2), Bandwidth(4, 5)};
    EXPECT_FALSE(global_edf_admission_test(heavy, 4));
    EXPECT_TRUE(global_edf_admission_test({Bandwidth(1, 2), Bandwidth(1, 2)}, 1));
    EXPECT_FALSE(global_edf_admission_test({Bandwidth(1, 2), Bandwidth(3, 5)}, 1));
}

TEST(GlobalDispatch, EarliestRun)
{
    std::vector<std::optional<ServerId>> cur(2);
    auto d = global_dispatch({0, 1}, cur, never);
    EXPECT_EQ(d.assignment[0], 0u);
    EXPECT_EQ(d.assignment[1], 1u);
    EXPECT_TRUE(d.migrations.empty());
}

TEST(GlobalDispatch, MinimalDisplacement)
{
    // C (2) now precedes A (0); B (1) is displaced, A keeps core 0
    std::vector<std::optional<ServerId>> cur{0u, 1u};
    auto d = global_dispatch({2, 0}, cur, never);
    EXPECT_EQ(d.assignment[0], 0u);
    EXPECT_EQ(d.assignment[1], 2u);
    EXPECT_TRUE(d.migrations.empty());
}

TEST(GlobalDispatch, ResumeElsewhereIsMigration)
{
    std::vector<std::optional<ServerId>> cur{0u, 1u};
    auto last = [](ServerId id) -> std::optional<CoreId> {
        if (id == 2)
            return 1;
        return std::nullopt;
    };
    // A (0) finished: B stays, C takes core 0 after last running on core 1
    auto d = global_dispatch({1, 2}, {std::nullopt, 1u}, last);
    EXPECT_EQ(d.assignment[0], 2u);
    EXPECT_EQ(d.assignment[1], 1u);
    ASSERT_EQ(d.migrations.size(), 1u);
    EXPECT_EQ(d.migrations[0].server, 2u);
    EXPECT_EQ(d.migrations[0].from, 1u);
    EXPECT_EQ(d.migrations[0].to, 0u);
    // resuming on the same core is not a migration
    auto same = global_dispatch({1, 2}, {1u, std::nullopt}, last);
    EXPECT_EQ(same.assignment[1], 2u);
    EXPECT_TRUE(same.migrations.empty());
    (void)cur;
}

namespace {

std::vector<TaskSpec> uni_tasks(std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<TaskSpec> tasks;
    for (TaskId i = 0; i < 4; ++i) {
        Tick p = rng.uniform_int(5, 50);
        Tick b = rng.uniform_int(1, p / 4);
        tasks.push_back(fixed_task(i, p, b, {rng.uniform_int(1, 2 * b), rng.uniform_int(1, b)}));
    }
    return tasks;
}

} // namespace

TEST(GlobalEngine, SingleCoreMatchesPartitionedGrub)
{
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto tasks = uni_tasks(seed);
        auto part = PartitionedSystem(1, tasks, 0, grubsim::testing::partitioned(Heuristic::FirstFit, false),
                                      checked(), 2000)
                        .run();
        std::ostringstream tp, ts;
        auto op = checked();
        op.trace = &tp;
        auto os = checked();
        os.trace = &ts;
        auto par = GlobalSystem(1, tasks, 0, ReclaimMode::Parallel, op, 2000).run();
        auto seq = GlobalSystem(1, tasks, 0, ReclaimMode::Sequential, os, 2000).run();
        EXPECT_EQ(tp.str(), ts.str());
        ASSERT_EQ(par.jobs.size(), part.jobs.size());
        for (std::size_t k = 0; k < part.jobs.size(); ++k) {
            EXPECT_EQ(par.jobs[k].finish, part.jobs[k].finish);
            EXPECT_EQ(par.jobs[k].vtime_at_finish, part.jobs[k].vtime_at_finish);
        }
        ASSERT_EQ(par.postponements.size(), part.postponements.size());
        for (std::size_t k = 0; k < part.postponements.size(); ++k)
            EXPECT_EQ(par.postponements[k].time, part.postponements[k].time);
        EXPECT_EQ(par.metrics.gedf_migrations, 0u);
    }
}

TEST(GlobalEngine, MigrationsCountedAndTraced)
{
    ScenarioConfig cfg;
    cfg.n = 12;
    cfg.m = 4;
    cfg.target_util = Bandwidth(2, 1);
    cfg.horizon = 20000;
    cfg.seed = 3;
    auto sc = generate_scenario_retrying(cfg);
    for (auto mode : {ReclaimMode::Parallel, ReclaimMode::Sequential}) {
        std::ostringstream tr;
        RunOptions o;
        o.trace = &tr;
        GlobalSystem sys(sc.cores(), sc.tasks, sc.seed, mode, o, sc.horizon());
        auto r = sys.run();
        EXPECT_GT(r.metrics.gedf_migrations, 0u);
        std::size_t lines = 0;
        std::string line;
        std::istringstream in(tr.str());
        while (std::getline(in, line))
            lines += line.find("\"ev\":\"gedf_migration\"") != std::string::npos ? 1 : 0;
        EXPECT_EQ(lines, r.metrics.gedf_migrations);
    }
}

TEST(GlobalEngine, ParallelSpareConservation)
{
    ScenarioConfig cfg;
    cfg.n = 10;
    cfg.m = 3;
    cfg.target_util = Bandwidth(3, 2);
    cfg.horizon = 5000;
    cfg.seed = 9;
    auto sc = generate_scenario_retrying(cfg);
    GlobalSystem sys(sc.cores(), sc.tasks, sc.seed, ReclaimMode::Parallel, RunOptions{}, sc.horizon());
    for (Tick t = 0; t <= 5000; t += 37) {
        sys.run_until(q(t));
        const auto& l = sys.ledger();
        ASSERT_EQ(l.spare() + l.total_active.value(), q(3));
        for (CoreId c = 0; c < 3; ++c)
            if (sys.running_on(c))
                ASSERT_GE(sys.rate_on(c), q(1));
    }
}

TEST(GlobalEngine, SequentialBookingsAddUp)
{
    ScenarioConfig cfg;
    cfg.n = 10;
    cfg.m = 3;
    cfg.target_util = Bandwidth(3, 2);
    cfg.horizon = 5000;
    cfg.seed = 9;
    auto sc = generate_scenario_retrying(cfg);
    GlobalSystem sys(sc.cores(), sc.tasks, sc.seed, ReclaimMode::Sequential, RunOptions{}, sc.horizon());
    for (Tick t = 0; t <= 5000; t += 41) {
        sys.run_until(q(t));
        Rational sum;
        for (const auto& b : sys.ledger().booked)
            sum += b.value();
        ASSERT_EQ(sum, sys.ledger().total_active.value());
    }
}

TEST(GlobalEngine, AdmissionUsesDensityTest)
{
    std::vector<TaskSpec> tasks{fixed_task(0, 10, 6, {1}), fixed_task(1, 10, 6, {1}), fixed_task(2, 10, 6, {1})};
    auto r = GlobalSystem(2, tasks, 0, ReclaimMode::Parallel, RunOptions{}, 100).run();
    // 9/5 > 2 - 3/5
    EXPECT_EQ(r.metrics.rejections, 1u);
}
