#include <gtest/gtest.h>

#include "support/helpers.hpp"

using namespace grubsim;
using grubsim::testing::checked;
using grubsim::testing::fixed_task;
using grubsim::testing::partitioned;
using grubsim::testing::q;

TEST(MissWindow, TriggerNeedsFullWindowAndStrictExcess)
{
    MissWindow w(20, q(1, 10));
    for (int i = 0; i < 17; ++i)
        EXPECT_FALSE(w.record(false));
    EXPECT_FALSE(w.record(true));
    EXPECT_FALSE(w.record(true));
    EXPECT_TRUE(w.record(true)); // 3/20 > 1/10

    MissWindow v(20, q(1, 10));
    for (int i = 0; i < 18; ++i)
        v.record(false);
    v.record(true);
    EXPECT_FALSE(v.record(true)); // 2/20 is not above 1/10

    MissWindow u(20, q(1, 10));
    for (int i = 0; i < 5; ++i)
        EXPECT_FALSE(u.record(true));
    EXPECT_DOUBLE_EQ(u.ratio(), 1.0);
}

TEST(MissWindow, SlidesAndResets)
{
    MissWindow w(3, q(1, 10));
    w.record(true);
    w.record(false);
    w.record(false);
    EXPECT_TRUE(w.triggered());
    w.record(false); // the miss drops out
    EXPECT_FALSE(w.triggered());
    EXPECT_EQ(w.seen(), 3u);
    w.reset();
    EXPECT_EQ(w.seen(), 0u);
    EXPECT_FALSE(w.record(true));
}

TEST(Placement, PermanentMigrationOutcomes)
{
    auto one = [](Rational u, Rational um) {
        return std::vector<CoreLoad>{{0, q(1), q(0), q(0)}, {1, std::move(u), std::move(um), q(0)}};
    };
    auto d = try_permanent_migration(Bandwidth(3, 10), 0, one(q(3, 5), q(1, 20)), Heuristic::WorstFit);
    EXPECT_EQ(d.outcome, PlacementOutcome::Immediate);
    EXPECT_EQ(d.core, 1u);
    d = try_permanent_migration(Bandwidth(3, 10), 0, one(q(3, 5), q(1, 5)), Heuristic::WorstFit);
    EXPECT_EQ(d.outcome, PlacementOutcome::Deferred);
    EXPECT_EQ(d.core, 1u);
    std::vector<CoreLoad> full{{0, q(9, 10), q(0), q(0)}, {1, q(8, 10), q(0), q(0)}, {2, q(4, 5), q(0), q(0)}};
    EXPECT_EQ(try_permanent_migration(Bandwidth(3, 10), 0, full, Heuristic::WorstFit).outcome,
              PlacementOutcome::Infeasible);
}

TEST(Placement, SourceExcludedAndReservationsCount)
{
    std::vector<CoreLoad> l{{0, q(0), q(0), q(0)}, {1, q(1, 2), q(0), q(0)}};
    auto d = try_permanent_migration(Bandwidth(1, 4), 0, l, Heuristic::WorstFit);
    EXPECT_EQ(d.core, 1u);
    l[1].reserved = q(3, 10);
    EXPECT_EQ(try_permanent_migration(Bandwidth(1, 4), 0, l, Heuristic::WorstFit).outcome,
              PlacementOutcome::Infeasible);
}

TEST(Placement, DeferredReadyCondition)
{
    EXPECT_FALSE(deferred_placement_ready({1, q(3, 5), q(1, 5), q(0)}, Bandwidth(3, 10)));
    EXPECT_TRUE(deferred_placement_ready({1, q(3, 5), q(1, 10), q(0)}, Bandwidth(3, 10)));
}

TEST(Heuristic, Selection)
{
    std::vector<CoreCandidate> c{{0, q(2, 5)}, {1, q(1, 5)}, {2, q(3, 5)}};
    EXPECT_EQ(select_core_heuristic(c, Bandwidth(1, 10), Heuristic::BestFit), 1u);
    EXPECT_EQ(select_core_heuristic(c, Bandwidth(1, 10), Heuristic::WorstFit), 2u);
    EXPECT_EQ(select_core_heuristic(c, Bandwidth(1, 10), Heuristic::FirstFit), 0u);
    EXPECT_EQ(select_core_heuristic(c, Bandwidth(1, 2), Heuristic::FirstFit), 2u);
    EXPECT_FALSE(select_core_heuristic(c, Bandwidth(7, 10), Heuristic::WorstFit));
    std::vector<CoreCandidate> tie{{0, q(1, 2)}, {1, q(1, 2)}};
    EXPECT_EQ(select_core_heuristic(tie, Bandwidth(1, 10), Heuristic::BestFit), 0u);
    EXPECT_EQ(select_core_heuristic(tie, Bandwidth(1, 10), Heuristic::WorstFit), 0u);
}

TEST(Heuristic, ParseNames)
{
    EXPECT_EQ(parse_heuristic("wf"), Heuristic::WorstFit);
    EXPECT_EQ(parse_heuristic("BF"), Heuristic::BestFit);
    EXPECT_EQ(parse_heuristic("first_fit"), Heuristic::FirstFit);
    EXPECT_FALSE(parse_heuristic("nf"));
}

TEST(Heuristic, StaticPartition)
{
    std::vector<Bandwidth> u{Bandwidth(1, 2), Bandwidth(1, 2), Bandwidth(1, 2)};
    auto ff = partition(u, 2, Heuristic::FirstFit);
    ASSERT_TRUE(ff);
    EXPECT_EQ(*ff, (std::vector<CoreId>{0, 0, 1}));
    auto wf = partition(u, 2, Heuristic::WorstFit);
    EXPECT_EQ(*wf, (std::vector<CoreId>{0, 1, 0}));
    EXPECT_FALSE(partition({Bandwidth(3, 5), Bandwidth(3, 5), Bandwidth(3, 5)}, 2, Heuristic::BestFit));
}

TEST(Allocation, NewTaskExamples)
{
    std::vector<CoreLoad> empty{{0, q(0), q(0), q(0)}, {1, q(0), q(0), q(0)}, {2, q(0), q(0), q(0)}, {3, q(0), q(0), q(0)}};
    auto d = allocate_new_task(Bandwidth(3, 10), empty, Heuristic::WorstFit);
    EXPECT_EQ(d.outcome, PlacementOutcome::Immediate);
    EXPECT_EQ(d.core, 0u);

    std::vector<CoreLoad> l{{0, q(4, 5), q(3, 20), q(0)}, {1, q(9, 10), q(0), q(0)}};
    d = allocate_new_task(Bandwidth(1, 10), l, Heuristic::WorstFit);
    EXPECT_EQ(d.outcome, PlacementOutcome::Immediate);
    EXPECT_EQ(d.core, 1u);

    std::vector<CoreLoad> full{{0, q(19, 20), q(0), q(0)}, {1, q(19, 20), q(0), q(0)}};
    EXPECT_EQ(allocate_new_task(Bandwidth(1, 10), full, Heuristic::WorstFit).outcome, PlacementOutcome::Infeasible);
}

namespace {

// Tasks 0 and 1 fill core 0 (P = 20, U = 1/2). Task 0 finishes its first
// job at 5 with V = 10 and stays non-contending until 10.
std::vector<TaskSpec> drain_instance()
{
    return {fixed_task(0, 20, 10, {5}), fixed_task(1, 20, 10, {5})};
}

} // namespace

TEST(PermanentMigration, InactiveServerMovesAtOnce)
{
    PartitionedSystem sys(2, drain_instance(), 0, partitioned(Heuristic::FirstFit), checked(), 100);
    sys.run_until(q(12));
    ASSERT_EQ(sys.server(0).state, ServerState::Inactive);
    sys.finalize_permanent_migration(0, 1);
    EXPECT_EQ(sys.core(0).ledger.allocated.value(), Bandwidth(1, 2));
    EXPECT_EQ(sys.core(1).ledger.allocated.value(), Bandwidth(1, 2));
    EXPECT_EQ(sys.server(0).core, 1u);
    auto r = sys.run();
    EXPECT_EQ(r.metrics.perm_migrations, 1u);
    EXPECT_EQ(r.metrics.jobs_missed, 0u);
}

TEST(PermanentMigration, SourceReleasedWhenVirtualTimeReached)
{
    PartitionedSystem sys(2, drain_instance(), 0, partitioned(Heuristic::FirstFit), checked(), 100);
    sys.run_until(q(5));
    ASSERT_EQ(sys.server(0).state, ServerState::ActNonContending);
    ASSERT_EQ(sys.server(0).vtime, q(10));
    sys.finalize_permanent_migration(0, 1);
    // both cores account for the task until V is reached, each within 1
    EXPECT_EQ(sys.core(0).ledger.allocated.value(), Bandwidth(1, 1));
    EXPECT_EQ(sys.core(1).ledger.allocated.value(), Bandwidth(1, 2));
    EXPECT_EQ(sys.core(1).ledger.active.value(), Bandwidth(1, 2));
    sys.run_until(q(19, 2));
    EXPECT_EQ(sys.core(0).ledger.allocated.value(), Bandwidth(1, 1));
    sys.run_until(q(10));
    EXPECT_EQ(sys.core(0).ledger.allocated.value(), Bandwidth(1, 2));
    EXPECT_EQ(sys.core(1).ledger.allocated.value(), Bandwidth(1, 2));
    sys.run();
}

namespace {

// Like the temporary-migration instance, but task 2 has U = 1/2: the job
// of task 0 migrates at 10 (epsilon 1) and the temporary server on core 1
// lingers until 40. Task 1 (inactive from 10.5) can then only be deferred
// to core 1.
std::vector<TaskSpec> deferred_instance()
{
    return {fixed_task(0, 20, 10, {15}), fixed_task(1, 20, 10, {1}), fixed_task(2, 40, 20, {1}, 10)};
}

PartitionedPolicy deferred_policy(std::optional<Tick> timeout)
{
    auto p = partitioned(Heuristic::FirstFit);
    p.migration.epsilon = q(1);
    p.balancing.deferred_timeout = timeout;
    return p;
}

} // namespace

TEST(PermanentMigration, TimeoutAbortsAndLeavesLedgers)
{
    PartitionedSystem sys(2, deferred_instance(), 0, deferred_policy(2), checked(), 200);
    sys.run_until(q(11));
    ASSERT_TRUE(sys.task(0).temp);
    auto before0 = sys.core(0).ledger.allocated.value();
    auto before1 = sys.core(1).ledger.allocated.value();
    auto d = sys.request_permanent_migration(1);
    EXPECT_EQ(d.outcome, PlacementOutcome::Deferred);
    EXPECT_EQ(d.core, 1u);
    EXPECT_FALSE(sys.core(1).ledger.incoming_migrations_enabled);
    EXPECT_EQ(sys.pending_placements(1).size(), 1u);
    sys.run_until(q(13));
    EXPECT_TRUE(sys.pending_placements(1).empty());
    EXPECT_TRUE(sys.core(1).ledger.incoming_migrations_enabled);
    EXPECT_EQ(sys.metrics().lb_aborts, 1u);
    EXPECT_EQ(sys.server(*sys.task(1).home).core, 0u);
    EXPECT_EQ(sys.core(0).ledger.allocated.value(), before0);
    EXPECT_EQ(sys.core(1).ledger.allocated.value(), before1);
    sys.run();
}

TEST(PermanentMigration, DeferredCompletesWhenMigratedDrains)
{
    PartitionedSystem sys(2, deferred_instance(), 0, deferred_policy(std::nullopt), checked(), 200);
    sys.run_until(q(11));
    sys.request_permanent_migration(1);
    sys.run_until(q(39));
    EXPECT_EQ(sys.server(*sys.task(1).home).core, 0u);
    EXPECT_EQ(sys.core(1).ledger.migrated.value(), Bandwidth(1, 10));
    sys.run_until(q(40));
    EXPECT_TRUE(sys.core(1).ledger.migrated.value().is_zero());
    EXPECT_EQ(sys.server(*sys.task(1).home).core, 1u);
    EXPECT_EQ(sys.core(1).ledger.allocated.value(), Bandwidth(1, 1));
    EXPECT_EQ(sys.core(0).ledger.allocated.value(), Bandwidth(1, 2));
    EXPECT_TRUE(sys.core(1).ledger.incoming_migrations_enabled);
    auto r = sys.run();
    EXPECT_EQ(r.metrics.perm_migrations, 1u);
    EXPECT_EQ(r.metrics.lb_aborts, 0u);
}

TEST(PermanentMigration, NoTemporaryMigrationTowardsPendingCore)
{
    // task 0 is eligible again at 30; core 1 would take it, unless a
    // placement is pending there
    PartitionedSystem control(2, deferred_instance(), 0, deferred_policy(std::nullopt), checked(), 200);
    control.run_until(q(30));
    EXPECT_EQ(control.trace().count("temp_migration"), 2u);

    PartitionedSystem sys(2, deferred_instance(), 0, deferred_policy(std::nullopt), checked(), 200);
    sys.run_until(q(11));
    sys.request_permanent_migration(1);
    auto before = sys.metrics().postponements;
    sys.run_until(q(30));
    EXPECT_GT(sys.metrics().postponements, before);
    EXPECT_EQ(sys.trace().count("temp_migration"), 1u);
}

TEST(PermanentMigration, WindowTriggersBalancing)
{
    // task 0 always overruns by far and misses; after a full window of 3
    // jobs it is moved to the empty core
    std::vector<TaskSpec> tasks{fixed_task(0, 10, 5, {9}), fixed_task(1, 10, 5, {5})};
    auto p = partitioned(Heuristic::FirstFit, false, true);
    p.balancing.window_size = 3;
    PartitionedSystem sys(2, tasks, 0, p, checked(), 400);
    auto r = sys.run();
    EXPECT_GE(r.metrics.perm_migrations, 1u);
    EXPECT_EQ(r.metrics.server_deadline_misses, 0u);
}

TEST(Departure, IdleServerReleasedImmediately)
{
    auto tasks = drain_instance();
    tasks[0].departure_time = 15;
    PartitionedSystem sys(1, tasks, 0, partitioned(), checked(), 100);
    sys.run_until(q(15));
    EXPECT_EQ(sys.core(0).ledger.allocated.value(), Bandwidth(1, 2));
    EXPECT_TRUE(sys.task(0).departed);
    auto r = sys.run();
    for (const auto& j : r.jobs)
        EXPECT_FALSE(j.task == 0 && j.index > 0);
}

TEST(Departure, NonContendingReleasedAtVirtualTime)
{
    auto tasks = drain_instance();
    tasks[0].departure_time = 5;
    PartitionedSystem sys(1, tasks, 0, partitioned(), checked(), 100);
    sys.run_until(q(5));
    EXPECT_EQ(sys.core(0).ledger.allocated.value(), Bandwidth(1, 1));
    EXPECT_FALSE(sys.task(0).departed);
    sys.run_until(q(10));
    EXPECT_EQ(sys.core(0).ledger.allocated.value(), Bandwidth(1, 2));
    EXPECT_TRUE(sys.task(0).departed);
}

TEST(Departure, RunningJobFinishesFirst)
{
    auto tasks = drain_instance();
    tasks[0].departure_time = 2;
    PartitionedSystem sys(1, tasks, 0, partitioned(), checked(), 100);
    sys.run_until(q(9));
    EXPECT_EQ(sys.core(0).ledger.allocated.value(), Bandwidth(1, 1));
    sys.run_until(q(10));
    EXPECT_EQ(sys.core(0).ledger.allocated.value(), Bandwidth(1, 2));
    auto r = sys.run();
    int finished = 0;
    for (const auto& j : r.jobs)
        finished += j.task == 0 ? 1 : 0;
    EXPECT_EQ(finished, 1);
}

TEST(Admission, RejectedTaskLeavesNoTrace)
{
    std::vector<TaskSpec> tasks{fixed_task(0, 20, 19, {5}), fixed_task(1, 20, 19, {5})};
    auto ins = fixed_task(2, 20, 19, {5}, 50);
    ins.dynamic = true;
    tasks.push_back(ins);
    PartitionedSystem sys(2, tasks, 0, partitioned(), checked(), 200);
    auto r = sys.run();
    EXPECT_EQ(r.metrics.rejections, 1u);
    EXPECT_EQ(r.rejected_tasks, std::vector<TaskId>{2});
    for (const auto& j : r.jobs)
        EXPECT_NE(j.task, 2u);
    EXPECT_EQ(sys.core(0).ledger.allocated.value(), Bandwidth(19, 20));
    EXPECT_EQ(sys.core(1).ledger.allocated.value(), Bandwidth(19, 20));
}
