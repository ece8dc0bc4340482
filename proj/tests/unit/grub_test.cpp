#include <gtest/gtest.h>

#include "grubsim/grub.hpp"
#include "support/helpers.hpp"

using namespace grubsim;
using grubsim::testing::q;

namespace {

Server make_server(ServerId id, Tick period, Bandwidth u)
{
    Server s;
    s.id = id;
    s.period = period;
    s.util = std::move(u);
    return s;
}

} // namespace

TEST(GrubArrival, InactiveBecomesReady)
{
    Core c;
    Server s = make_server(0, 10, Bandwidth(1, 2));
    on_job_arrival(s, q(0), c);
    EXPECT_EQ(s.state, ServerState::Ready);
    EXPECT_EQ(s.vtime, q(0));
    EXPECT_EQ(s.deadline, q(10));
    EXPECT_EQ(c.ledger.active.value(), Bandwidth(1, 2));
    EXPECT_TRUE(c.ready.contains(s));
}

TEST(GrubArrival, NonContendingKeepsVariables)
{
    Core c;
    Server s = make_server(0, 10, Bandwidth(1, 2));
    s.state = ServerState::ActNonContending;
    s.vtime = q(15);
    s.deadline = q(20);
    c.ledger.active.add(s.util);
    on_job_arrival(s, q(12), c);
    EXPECT_EQ(s.state, ServerState::Ready);
    EXPECT_EQ(s.vtime, q(15));
    EXPECT_EQ(s.deadline, q(20));
    EXPECT_EQ(c.ledger.active.value(), Bandwidth(1, 2));
}

TEST(GrubArrival, QueuedBehindExecutingJob)
{
    using grubsim::testing::fixed_task;
    // task 0 (U=1/2) runs at rate 6/5, is postponed to 20 at 25/3 and is
    // still executing when its second job arrives at 10
    std::vector<TaskSpec> tasks{fixed_task(0, 10, 5, {12}), fixed_task(1, 100, 10, {1})};
    PartitionedSystem sys(1, tasks, 0, grubsim::testing::partitioned(), grubsim::testing::checked(), 100);
    sys.run_until(q(10));
    const Server& s = sys.server(*sys.task(0).home);
    EXPECT_EQ(s.state, ServerState::Executing);
    EXPECT_EQ(sys.task(0).pending.size(), 2u);
    EXPECT_EQ(s.vtime, q(12));
    EXPECT_EQ(s.deadline, q(20));
}

TEST(GrubAdvance, RateIsActiveOverOwn)
{
    Server s = make_server(0, 10, Bandwidth(1, 2));
    EXPECT_EQ(advance_executing(s, q(4), Bandwidth(1, 2)), q(4));
    s.vtime = q(0);
    EXPECT_EQ(advance_executing(s, q(4), Bandwidth(1, 1)), q(8));
    Server t = make_server(1, 10, Bandwidth(1, 4));
    EXPECT_EQ(advance_executing(t, q(8), Bandwidth(3, 4)), q(24));
    EXPECT_THROW(advance_executing(t, q(-1), Bandwidth(3, 4)), SimError);
}

TEST(GrubExhaustion, Horizon)
{
    Server s = make_server(0, 10, Bandwidth(1, 2));
    s.vtime = q(0);
    s.deadline = q(10);
    EXPECT_EQ(exhaustion_horizon(s, Bandwidth(1, 1)), q(5));
    EXPECT_EQ(exhaustion_horizon(s, Bandwidth(1, 2)), q(10));
    s.vtime = q(10);
    EXPECT_EQ(exhaustion_horizon(s, Bandwidth(1, 2)), q(0));
    EXPECT_THROW(exhaustion_horizon(s, Bandwidth()), SimError);
}

TEST(GrubPostpone, Examples)
{
    Server s = make_server(0, 10, Bandwidth(1, 2));
    s.vtime = q(20);
    s.deadline = q(20);
    postpone_deadline(s);
    EXPECT_EQ(s.deadline, q(30));

    Server r = make_server(1, 10, Bandwidth(1, 2));
    r.vtime = q(41, 2);
    r.deadline = q(20);
    postpone_deadline(r);
    EXPECT_EQ(r.deadline, q(61, 2));

    // a second postponement without execution in between violates V >= d
    EXPECT_THROW(postpone_deadline(r), SimError);
}

TEST(GrubPostpone, RekeysReadyQueue)
{
    ReadyQueue rq;
    Server a = make_server(0, 10, Bandwidth(1, 2));
    Server b = make_server(1, 10, Bandwidth(1, 2));
    a.vtime = a.deadline = q(10);
    b.deadline = q(12);
    rq.insert(a);
    rq.insert(b);
    EXPECT_EQ(dispatch(rq), 0u);
    postpone_deadline(a, &rq);
    EXPECT_EQ(dispatch(rq), 1u);
    EXPECT_TRUE(rq.contains(a));
}

TEST(GrubCompletion, ExitRules)
{
    Core c;
    Server s = make_server(0, 10, Bandwidth(1, 2));
    on_job_arrival(s, q(10), c);
    s.state = ServerState::Executing;
    c.running = 0;
    s.vtime = q(18);
    EXPECT_EQ(on_job_completion(s, q(15), c, false), CompletionOutcome::NonContending);
    EXPECT_EQ(s.state, ServerState::ActNonContending);
    EXPECT_EQ(c.ledger.active.value(), Bandwidth(1, 2));
    EXPECT_FALSE(c.running);

    Core c2;
    Server t = make_server(1, 10, Bandwidth(1, 2));
    on_job_arrival(t, q(5), c2);
    t.vtime = q(15);
    EXPECT_EQ(on_job_completion(t, q(15), c2, false), CompletionOutcome::Inactive);
    EXPECT_EQ(t.state, ServerState::Inactive);
    EXPECT_TRUE(c2.ledger.active.value().is_zero());

    Core c3;
    Server u = make_server(2, 10, Bandwidth(1, 2));
    on_job_arrival(u, q(0), c3);
    EXPECT_EQ(on_job_completion(u, q(3), c3, true), CompletionOutcome::StillContending);
    EXPECT_EQ(u.state, ServerState::Ready);
    EXPECT_TRUE(c3.ready.contains(u));
}

TEST(GrubVirtualTime, ReachedMakesInactive)
{
    Core c;
    Server s = make_server(0, 10, Bandwidth(1, 2));
    s.state = ServerState::ActNonContending;
    s.vtime = q(18);
    c.ledger.active.add(s.util);
    EXPECT_FALSE(on_virtual_time_reached(s, q(18), c));
    EXPECT_EQ(s.state, ServerState::Inactive);
    EXPECT_TRUE(c.ledger.active.value().is_zero());
}

TEST(GrubVirtualTime, TemporaryIsDestroyed)
{
    Core c;
    Server s = make_server(0, 10, Bandwidth(1, 10));
    s.kind = ServerKind::Temporary;
    s.state = ServerState::ActNonContending;
    s.vtime = q(18);
    c.ledger.active.add(s.util);
    c.ledger.migrated.add(s.util);
    EXPECT_TRUE(on_virtual_time_reached(s, q(18), c));
    EXPECT_TRUE(c.ledger.migrated.value().is_zero());
    EXPECT_TRUE(c.ledger.active.value().is_zero());
}

TEST(GrubVirtualTime, ArrivalBeforeTimerCancelsIt)
{
    Core c;
    Server s = make_server(0, 10, Bandwidth(1, 2));
    s.state = ServerState::ActNonContending;
    s.vtime = q(18);
    s.deadline = q(20);
    c.ledger.active.add(s.util);
    on_job_arrival(s, q(17), c);
    EXPECT_EQ(s.state, ServerState::Ready);
    EXPECT_THROW(on_virtual_time_reached(s, q(18), c), SimError);
    s.state = ServerState::ActNonContending;
    EXPECT_THROW(on_virtual_time_reached(s, q(17), c), SimError);
}

TEST(GrubDispatch, EarliestDeadlineThenId)
{
    ReadyQueue rq;
    EXPECT_FALSE(dispatch(rq));
    Server a = make_server(3, 10, Bandwidth(1, 2));
    Server b = make_server(1, 10, Bandwidth(1, 2));
    a.deadline = q(10);
    b.deadline = q(12);
    rq.insert(a);
    rq.insert(b);
    EXPECT_EQ(dispatch(rq), 3u);
    rq.erase(b);
    b.deadline = q(10);
    rq.insert(b);
    EXPECT_EQ(dispatch(rq), 1u);
}

TEST(GrubEngine, FullReclaimingPostponesAfterPeriodOfService)
{
    // alone on the core U^a = U_i, so V advances at rate 1 and a job of 25
    // with P = 10 exhausts after 10 and 20 units of service
    PartitionedSystem sys(1, {grubsim::testing::fixed_task(0, 10, 2, {25})}, 0, grubsim::testing::partitioned(),
                          grubsim::testing::checked(), 30);
    auto r = sys.run();
    ASSERT_GE(r.postponements.size(), 2u);
    EXPECT_EQ(r.postponements[0].time, q(10));
    EXPECT_EQ(r.postponements[0].new_deadline, q(20));
    EXPECT_EQ(r.postponements[1].time, q(20));
    EXPECT_EQ(r.postponements[1].new_deadline, q(30));
    ASSERT_FALSE(r.jobs.empty());
    EXPECT_EQ(r.jobs[0].finish, q(25));
}

TEST(GrubEngine, SingleCoreNeverMissesServerDeadline)
{
    Rng rng(11);
    for (int k = 0; k < 40; ++k) {
        std::vector<TaskSpec> tasks;
        Rational total;
        for (TaskId i = 0; i < 4; ++i) {
            Tick p = rng.uniform_int(5, 60);
            Tick b = rng.uniform_int(1, p / 4);
            tasks.push_back(grubsim::testing::fixed_task(i, p, b, {rng.uniform_int(1, 3 * b), rng.uniform_int(1, b)}));
            total += Rational(b, p);
        }
        ASSERT_LE(total, Rational(1));
        PartitionedSystem sys(1, tasks, 0, grubsim::testing::partitioned(), grubsim::testing::checked(false), 3000);
        auto r = sys.run();
        EXPECT_EQ(r.metrics.server_deadline_misses, 0u);
    }
}
