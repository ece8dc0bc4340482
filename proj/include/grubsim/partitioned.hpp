#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "grubsim/engine_common.hpp"
#include "grubsim/grub.hpp"
#include "grubsim/temp_migration.hpp"

namespace grubsim {

struct PartitionedPolicy {
    Heuristic heuristic = Heuristic::WorstFit;
    MigrationConfig migration;
    BalancerConfig balancing;
};

enum class MigrationOutcome { Migrated, Postponed };

/// Partitioned GRUB with temporary migration and permanent load balancing.
///
/// Owns the whole simulated system: cores with their ledgers and EDF queues,
/// servers (permanent, temporary and residues), tasks with their job
/// streams, and the event queue. Time is exact: integer-tick events
/// (arrivals, timeouts, samples) mix with rational-instant events
/// (completions, budget exhaustions, virtual-time timers).
class PartitionedSystem {
public:
    PartitionedSystem(std::uint32_t cores, std::vector<TaskSpec> tasks, std::uint64_t scenario_seed,
                      PartitionedPolicy policy, RunOptions options, Tick horizon)
        : policy_(std::move(policy)), opt_(options), horizon_(horizon), trace_(options.trace)
    {
        if (cores == 0)
            fail(ErrorKind::Config, "partitioned system needs at least one core");
        cores_.resize(cores);
        pending_.resize(cores);
        for (CoreId j = 0; j < cores; ++j)
            cores_[j].ledger.core = j;
        Tick max_period = 1;
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (tasks[i].id != i)
                fail(ErrorKind::Config, "task ids must be 0..n-1 in order");
            if (tasks[i].period <= 0 || tasks[i].budget <= 0 || tasks[i].budget > tasks[i].period)
                fail(ErrorKind::Config, "task " + std::to_string(i) + ": need 0 < budget <= period");
            max_period = std::max(max_period, tasks[i].period);
            tasks_.emplace_back(std::move(tasks[i]), scenario_seed, policy_.balancing);
        }
        deferred_timeout_ = policy_.balancing.deferred_timeout.value_or(2 * max_period);
        if (deferred_timeout_ <= 0)
            fail(ErrorKind::Config, "deferred_timeout must be positive");

        ema_.assign(cores, ExponentialAverage(opt_.ema_alpha));
        core_miss_.assign(cores, RollingMissRatio(opt_.miss_window_ticks));
        result_.series.resize(cores);

        for (auto& t : tasks_) {
            if (t.spec.dynamic) {
                push_timed(t.spec.arrival_time, EventClass::TaskInsert, t.spec.id);
            } else {
                auto d = allocate_new_task(t.util, core_loads(), policy_.heuristic);
                if (d.outcome == PlacementOutcome::Immediate) {
                    admit_task(t, d.core, t.spec.arrival_time);
                    result_.initial_placement.emplace_back(t.spec.id, d.core);
                } else {
                    reject_task(t, "initial_allocation");
                }
            }
            if (t.spec.departure_time)
                push_timed(*t.spec.departure_time, EventClass::TaskRemove, t.spec.id);
        }
        if (opt_.sample_stride > 0)
            push_timed(0, EventClass::MetricsSample, 0);
    }

    /// Runs to the horizon and returns the collected results.
    RunResult run()
    {
        run_until(Rational(horizon_));
        finish();
        return std::move(result_);
    }

    /// Processes every event with timestamp <= t.
    void run_until(const Instant& t)
    {
        Instant stop = min(t, Rational(horizon_));
        std::uint64_t idle_spins = 0;
        while (true) {
            auto next = next_event_time();
            if (!next || *next > stop) {
                if (now_ < stop)
                    advance(stop);
                return;
            }
            idle_spins = *next == now_ ? idle_spins + 1 : 0;
            if (idle_spins > 100'000)
                invariant_failure("no progress");
            advance(*next);
            process_instant();
        }
    }

    const Instant& now() const { return now_; }
    std::uint32_t core_count() const { return static_cast<std::uint32_t>(cores_.size()); }
    const Core& core(CoreId j) const { return cores_.at(j); }
    const Server& server(ServerId s) const { return servers_.at(s); }
    std::size_t server_count() const { return servers_.size(); }
    const TaskRuntime& task(TaskId i) const { return tasks_.at(i); }
    const RunMetrics& metrics() const { return result_.metrics; }
    const TraceSink& trace() const { return trace_; }
    const std::deque<PendingPlacement>& pending_placements(CoreId j) const { return pending_.at(j); }

    std::vector<CoreLoad> core_loads() const
    {
        std::vector<CoreLoad> out;
        out.reserve(cores_.size());
        for (CoreId j = 0; j < cores_.size(); ++j) {
            CoreLoad l{j, cores_[j].ledger.allocated.value().value(), cores_[j].ledger.migrated.value().value(), {}};
            for (const auto& p : pending_[j])
                l.reserved += p.util.value();
            out.push_back(std::move(l));
        }
        return out;
    }

    /// Budget exhaustion of a home server: Algorithm-1 style temporary
    /// migration, or deadline postponement when it is not worth it.
    MigrationOutcome attempt_temporary_migration(ServerId sid)
    {
        Server& s = servers_.at(sid);
        TaskRuntime& task = tasks_.at(s.task);
        const CoreId from = s.core;
        auto postpone_and_reset = [&] {
            task.migrated_flag = false;
            postpone(s);
            return MigrationOutcome::Postponed;
        };
        if (!is_eligible(s, now_))
            return postpone_and_reset();
        auto dest = select_destination_core(cores_, s.core, [](const Core& c) -> const CoreLedger& { return c.ledger; });
        if (task.migrated_flag || !dest)
            return postpone_and_reset();
        Core& dst = cores_[*dest];
        Bandwidth grant = admitted_migrating_utilization(task.spec.migrating_util, dst.ledger);
        const Bandwidth& load = policy_.migration.benefit_load == BenefitLoad::DestinationActive
                                    ? dst.ledger.active.value()
                                    : dst.ledger.migrated.value();
        if (!benefit_check(grant, s.deadline, now_, load, policy_.migration))
            return postpone_and_reset();

        Server tmp;
        tmp.id = static_cast<ServerId>(servers_.size());
        tmp.kind = ServerKind::Temporary;
        tmp.task = task.spec.id;
        tmp.core = *dest;
        tmp.period = s.period;
        tmp.util = grant;
        tmp.state = ServerState::Ready;
        tmp.vtime = now_;
        tmp.deadline = s.deadline;
        tmp.parent = s.id;
        dst.ledger.migrated.add(grant);
        dst.ledger.active.add(grant);
        dst.ready.insert(tmp);
        live_.push_back(tmp.id);
        ServerId tmp_id = tmp.id;
        servers_.push_back(std::move(tmp));
        Server& home = servers_[sid]; // push_back may have moved the vector

        Core& src = cores_[from];
        src.ready.erase(home);
        if (src.running == sid)
            src.running.reset();
        if (!(home.vtime > now_))
            invariant_failure("migrated home server would not be act-non-contending");
        home.state = ServerState::ActNonContending;

        task.temp = tmp_id;
        task.migrated_flag = true;
        if (policy_.migration.migration_cost > 0)
            task.pending.front().remaining += Rational(policy_.migration.migration_cost);
        ++result_.metrics.temp_migrations;
        trace_.emit("temp_migration", now_)
            .field("task", task.spec.id)
            .field("from", from)
            .field("to", *dest)
            .field("grant", grant);
        note("temp_migration task=" + std::to_string(task.spec.id));
        return MigrationOutcome::Migrated;
    }

    /// The migrated job finished on its temporary server: the task returns
    /// home, the temporary server follows the usual GRUB exit rules.
    void complete_temporary_migration(ServerId tid)
    {
        Server& tmp = servers_.at(tid);
        TaskRuntime& task = tasks_.at(tmp.task);
        if (!tmp.is_temporary() || task.temp != tid)
            invariant_failure("complete_temporary_migration on a server that carries no migrated job");
        task.temp.reset();
        task.migrated_flag = false;
        trace_.emit("temp_return", now_).field("task", task.spec.id);
        auto outcome = on_job_completion(tmp, now_, cores_[tmp.core], false);
        if (outcome == CompletionOutcome::Inactive) {
            cores_[tmp.core].ledger.migrated.sub(tmp.util);
            destroy(tmp);
        }
        if (!task.pending.empty()) {
            Server& home = servers_.at(*task.home);
            on_job_arrival(home, now_, cores_[home.core]);
        } else {
            maybe_finish_departure(task);
        }
    }

    /// Moves a task's server to `to`. The destination allocation grows at
    /// once; the source keeps the bandwidth (as a residue) until the server's
    /// virtual time is reached.
    void finalize_permanent_migration(TaskId id, CoreId to)
    {
        TaskRuntime& task = tasks_.at(id);
        Server& s = servers_.at(*task.home);
        CoreId from = s.core;
        if (from == to)
            invariant_failure("permanent migration onto the same core");
        Core& src = cores_[from];
        Core& dst = cores_[to];
        const Bandwidth u = s.util;
        if (s.state == ServerState::Inactive) {
            src.ledger.allocated.sub(u);
            dst.ledger.allocated.add(u);
            s.core = to;
        } else {
            bool contending = is_contending(s.state);
            if (contending) {
                src.ready.erase(s);
                if (src.running == s.id)
                    src.running.reset();
            }
            if (s.vtime > now_) {
                Server r;
                r.id = static_cast<ServerId>(servers_.size());
                r.kind = ServerKind::Residue;
                r.task = id;
                r.core = from;
                r.period = s.period;
                r.util = u;
                r.state = ServerState::ActNonContending;
                r.vtime = s.vtime;
                r.deadline = s.deadline;
                live_.push_back(r.id);
                servers_.push_back(std::move(r));
            } else {
                // V <= t: the source bandwidth can be released right away
                src.ledger.active.sub(u);
                src.ledger.allocated.sub(u);
            }
            Server& moved = servers_.at(*task.home);
            if (moved.vtime < now_) {
                moved.vtime = now_;
                moved.deadline = now_ + Rational(moved.period);
            }
            moved.core = to;
            dst.ledger.allocated.add(u);
            dst.ledger.active.add(u);
            if (contending) {
                moved.state = ServerState::Ready;
                dst.ready.insert(moved);
            }
        }
        task.window.reset();
        ++result_.metrics.perm_migrations;
        trace_.emit("perm_migration", now_).field("task", id).field("from", from).field("to", to);
        note("perm_migration task=" + std::to_string(id));
    }

    /// Load-balancing request for a task whose miss window triggered.
    PlacementDecision request_permanent_migration(TaskId id)
    {
        TaskRuntime& task = tasks_.at(id);
        CoreId source = servers_.at(*task.home).core;
        auto d = try_permanent_migration(task.util, source, core_loads(), policy_.heuristic);
        switch (d.outcome) {
        case PlacementOutcome::Immediate:
            finalize_permanent_migration(id, d.core);
            break;
        case PlacementOutcome::Deferred:
            enqueue_placement(PlacementKind::PermanentMigration, task, d.core);
            break;
        case PlacementOutcome::Infeasible:
            break;
        }
        return d;
    }

    /// A task enters the system through the allocation strategy.
    PlacementDecision inject_task_insert(TaskId id)
    {
        TaskRuntime& task = tasks_.at(id);
        trace_.emit("task_insert", now_).field("task", id).field("util", task.util);
        auto d = allocate_new_task(task.util, core_loads(), policy_.heuristic);
        switch (d.outcome) {
        case PlacementOutcome::Immediate:
            admit_task(task, d.core, now_.ceil());
            break;
        case PlacementOutcome::Deferred:
            enqueue_placement(PlacementKind::NewTaskAdmission, task, d.core);
            break;
        case PlacementOutcome::Infeasible:
            reject_task(task, "no_capacity");
            break;
        }
        return d;
    }

    /// The task leaves: no more releases; its allocation is returned once
    /// its server drains to Inactive.
    void inject_task_remove(TaskId id)
    {
        TaskRuntime& task = tasks_.at(id);
        if (task.departing || task.departed)
            return;
        task.departing = true;
        trace_.emit("task_remove", now_).field("task", id);
        cancel_placements_of(id);
        if (!task.admitted) {
            task.departed = true;
            return;
        }
        maybe_finish_departure(task);
    }

    /// One row of per-core series at tick `t`.
    void sample_metrics(Tick t)
    {
        result_.series.time.push_back(t);
        for (CoreId j = 0; j < cores_.size(); ++j) {
            double a = cores_[j].ledger.active.value().to_double();
            result_.series.active[j].push_back(a);
            result_.series.active_ema[j].push_back(ema_[j].update(a));
            result_.series.miss_ratio[j].push_back(core_miss_[j].at(t));
        }
    }

    /// Recomputes every ledger from the servers and checks the bandwidth
    /// bounds and queue/state consistency.
    void check_invariants() const
    {
        for (CoreId j = 0; j < cores_.size(); ++j) {
            const Core& c = cores_[j];
            Rational active, migrated, allocated;
            std::size_t contending = 0;
            for (ServerId id : live_) {
                const Server& s = servers_[id];
                if (s.core != j)
                    continue;
                if (is_active(s.state))
                    active += s.util.value();
                if (s.kind == ServerKind::Temporary)
                    migrated += s.util.value();
                else
                    allocated += s.util.value();
                if (is_contending(s.state)) {
                    ++contending;
                    if (!c.ready.contains(s))
                        invariant_failure("contending server " + std::to_string(id) + " missing from ready queue");
                }
                if (s.state == ServerState::ActNonContending && !(s.vtime > now_))
                    invariant_failure("act-non-contending server " + std::to_string(id) + " with V <= t");
            }
            if (contending != c.ready.size())
                invariant_failure("ready queue of core " + std::to_string(j) + " holds stale entries");
            if (active != c.ledger.active.value().value())
                invariant_failure("core " + std::to_string(j) + " active utilization " +
                                  c.ledger.active.value().to_string() + " != recomputed " + active.to_string());
            if (migrated != c.ledger.migrated.value().value())
                invariant_failure("core " + std::to_string(j) + " migrated utilization mismatch");
            if (allocated != c.ledger.allocated.value().value())
                invariant_failure("core " + std::to_string(j) + " allocated utilization mismatch");
            if (c.running != c.ready.head())
                invariant_failure("core " + std::to_string(j) + " is not running its earliest-deadline server");
            if (!c.ledger.allocated.conserved() || !c.ledger.migrated.conserved() || !c.ledger.active.conserved())
                invariant_failure("ledger increments and decrements do not add up");
            if (c.ledger.incoming_migrations_enabled != pending_[j].empty())
                invariant_failure("incoming-migration flag out of sync with pending placements");
        }
        check_bounds();
    }

private:
    // ---- event loop ----------------------------------------------------

    void push_timed(Tick t, EventClass cls, std::uint64_t entity, std::uint64_t seq = 0)
    {
        timed_.push({t, cls, entity, seq});
    }

    Job& serving_job(const Server& s) { return tasks_[s.task].pending.front(); }

    std::optional<Instant> next_event_time() const
    {
        std::optional<Instant> best;
        auto consider = [&best](const Instant& t) {
            if (!best || t < *best)
                best = t;
        };
        if (!timed_.empty())
            best = Rational(timed_.top().time);
        for (const auto& c : cores_) {
            if (!c.running)
                continue;
            const Server& s = servers_[*c.running];
            const Job& job = tasks_[s.task].pending.front();
            consider(now_ + job.remaining);
            consider(now_ + exhaustion_horizon(s, c.ledger.active.value()));
        }
        for (ServerId id : live_) {
            const Server& s = servers_[id];
            if (s.state == ServerState::ActNonContending)
                consider(s.vtime);
        }
        return best;
    }

    void advance(const Instant& to)
    {
        Rational dt = to - now_;
        if (dt.sign() < 0)
            invariant_failure("time went backwards");
        if (!dt.is_zero()) {
            for (auto& c : cores_) {
                if (!c.running)
                    continue;
                Server& s = servers_[*c.running];
                Job& job = serving_job(s);
                job.remaining -= dt;
                if (opt_.debug_asserts)
                    (s.is_temporary() ? job.served_migrated : job.served_home) += dt;
                advance_executing(s, dt, c.ledger.active.value());
            }
        }
        now_ = to;
    }

    bool timed_due() const { return !timed_.empty() && now_.is_integer() && now_.floor() == timed_.top().time; }

    void process_instant()
    {
        std::vector<InstantEvent> evs;
        for (const auto& c : cores_)
            if (c.running && serving_job(servers_[*c.running]).remaining.is_zero())
                evs.push_back({EventClass::JobCompletion, *c.running, 0});
        for (ServerId id : live_) {
            const Server& s = servers_[id];
            if (s.state == ServerState::ActNonContending && s.vtime <= now_)
                evs.push_back({EventClass::VirtualTimeReached, id, 0});
        }
        while (timed_due()) {
            const auto& e = timed_.top();
            evs.push_back({e.cls, e.entity, e.seq});
            timed_.pop();
        }
        for (const auto& c : cores_)
            if (c.running && servers_[*c.running].vtime >= servers_[*c.running].deadline)
                evs.push_back({EventClass::ExhaustionCheck, *c.running, 0});
        std::sort(evs.begin(), evs.end());

        for (const auto& e : evs) {
            switch (e.cls) {
            case EventClass::JobCompletion: handle_completion(static_cast<ServerId>(e.entity)); break;
            case EventClass::VirtualTimeReached: handle_virtual_time(static_cast<ServerId>(e.entity)); break;
            case EventClass::JobArrival: handle_arrival(static_cast<TaskId>(e.entity)); break;
            case EventClass::ExhaustionCheck: handle_exhaustion(static_cast<ServerId>(e.entity)); break;
            case EventClass::LbTimeout: handle_lb_timeout(static_cast<CoreId>(e.entity), e.seq); break;
            case EventClass::TaskInsert: inject_task_insert(static_cast<TaskId>(e.entity)); break;
            case EventClass::TaskRemove: inject_task_remove(static_cast<TaskId>(e.entity)); break;
            case EventClass::MetricsSample: handle_sample(); break;
            }
        }
        process_pending_placements();
        for (auto& c : cores_)
            redispatch(c);
        check_server_deadlines();
        if (opt_.debug_asserts)
            check_invariants();
        else
            check_bounds();
    }

    void redispatch(Core& c)
    {
        auto head = dispatch(c.ready);
        if (head == c.running)
            return;
        if (c.running)
            servers_[*c.running].state = ServerState::Ready;
        c.running = head;
        if (head)
            servers_[*head].state = ServerState::Executing;
    }

    // ---- handlers --------------------------------------------------------

    void handle_arrival(TaskId id)
    {
        TaskRuntime& task = tasks_[id];
        if (!task.admitted || task.departing || task.departed)
            return;
        Tick at = now_.floor();
        Job job;
        job.task = id;
        job.index = task.next_index;
        job.arrival = at;
        job.demand = task.next_demand();
        job.remaining = Rational(job.demand);
        ++task.next_index;
        Tick next = at + task.inter_arrival();
        if (next < horizon_ && (!task.spec.departure_time || next < *task.spec.departure_time))
            push_timed(next, EventClass::JobArrival, id);
        trace_.emit("job_arrival", now_).field("task", id).field("job", job.index).field("demand", job.demand);
        task.pending.push_back(std::move(job));
        if (task.temp)
            return; // waits for the migrated job to come back
        Server& home = servers_.at(*task.home);
        on_job_arrival(home, now_, cores_[home.core]);
        if (opt_.record_jobs)
            result_.arrivals.push_back({id, task.pending.back().index, now_, home.vtime});
    }

    void handle_completion(ServerId sid)
    {
        Server& s = servers_[sid];
        TaskRuntime& task = tasks_[s.task];
        Job job = std::move(task.pending.front());
        task.pending.pop_front();
        job.finish = now_;
        job.missed = now_ > Rational(job.absolute_deadline(task.spec.relative_deadline()));
        auto& m = result_.metrics;
        ++m.jobs_total;
        m.jobs_missed += job.missed ? 1 : 0;
        if (opt_.debug_asserts && job.served_home + job.served_migrated != Rational(job.demand))
            invariant_failure("served time of job does not add up to its demand");
        if (opt_.record_jobs)
            result_.jobs.push_back({job.task, job.index, job.arrival, job.demand, now_, s.vtime, job.missed,
                                    s.is_temporary()});
        CoreId home_core = servers_[*task.home].core;
        core_miss_[home_core].record(now_.floor(), job.missed);
        trace_.emit("job_finish", now_)
            .field("task", job.task)
            .field("job", job.index)
            .field("core", s.core)
            .field("missed", job.missed);

        if (s.is_temporary()) {
            complete_temporary_migration(sid);
        } else {
            task.migrated_flag = false;
            auto outcome = on_job_completion(s, now_, cores_[s.core], !task.pending.empty());
            if (outcome == CompletionOutcome::Inactive)
                maybe_finish_departure(task);
        }

        bool trigger = task.window.record(job.missed);
        if (trigger && policy_.balancing.enabled && !task.departing && !task.departed && !task.placement_pending)
            request_permanent_migration(task.spec.id);
    }

    void handle_virtual_time(ServerId sid)
    {
        Server& s = servers_[sid];
        if (!s.alive || s.state != ServerState::ActNonContending || s.vtime > now_)
            return;
        Core& c = cores_[s.core];
        bool destroy_it = on_virtual_time_reached(s, now_, c);
        if (s.kind == ServerKind::Residue) {
            c.ledger.allocated.sub(s.util);
            destroy_it = true;
        }
        if (destroy_it) {
            destroy(s);
            return;
        }
        maybe_finish_departure(tasks_[s.task]);
    }

    void handle_exhaustion(ServerId sid)
    {
        Server& s = servers_[sid];
        if (!s.alive || cores_[s.core].running != sid || s.vtime < s.deadline)
            return;
        if (s.is_temporary() || !policy_.migration.enabled) {
            postpone(s);
            return;
        }
        attempt_temporary_migration(sid);
    }

    void handle_lb_timeout(CoreId target, std::uint64_t seq)
    {
        auto& q = pending_.at(target);
        auto it = std::find_if(q.begin(), q.end(), [&](const PendingPlacement& p) { return p.seq == seq; });
        if (it == q.end())
            return;
        PendingPlacement p = *it;
        q.erase(it);
        TaskRuntime& task = tasks_[p.task];
        task.placement_pending = false;
        if (p.kind == PlacementKind::PermanentMigration) {
            ++result_.metrics.lb_aborts;
            trace_.emit("lb_abort", now_).field("task", p.task).field("to", target);
        } else {
            reject_task(task, "timeout");
        }
        sync_incoming_flag(target);
    }

    void handle_sample()
    {
        Tick t = now_.floor();
        sample_metrics(t);
        if (t + opt_.sample_stride <= horizon_)
            push_timed(t + opt_.sample_stride, EventClass::MetricsSample, 0);
    }

    // ---- helpers ---------------------------------------------------------

    void postpone(Server& s)
    {
        Core& c = cores_[s.core];
        postpone_deadline(s, &c.ready);
        ++result_.metrics.postponements;
        if (opt_.record_jobs)
            result_.postponements.push_back({s.id, s.task, now_, s.vtime, s.deadline});
        trace_.emit("postpone", now_).field("server", s.id).field("task", s.task).field("deadline", s.deadline);
    }

    void destroy(Server& s)
    {
        s.alive = false;
        live_.erase(std::remove(live_.begin(), live_.end(), s.id), live_.end());
    }

    void admit_task(TaskRuntime& task, CoreId core, Tick first_release)
    {
        Server s;
        s.id = static_cast<ServerId>(servers_.size());
        s.kind = ServerKind::Permanent;
        s.task = task.spec.id;
        s.core = core;
        s.period = task.spec.period;
        s.util = task.util;
        cores_[core].ledger.allocated.add(s.util);
        task.home = s.id;
        task.admitted = true;
        live_.push_back(s.id);
        servers_.push_back(std::move(s));
        if (first_release < horizon_ && (!task.spec.departure_time || first_release < *task.spec.departure_time))
            push_timed(first_release, EventClass::JobArrival, task.spec.id);
        trace_.emit("task_admitted", now_).field("task", task.spec.id).field("core", core);
    }

    void reject_task(TaskRuntime& task, const char* reason)
    {
        ++result_.metrics.rejections;
        result_.rejected_tasks.push_back(task.spec.id);
        trace_.emit("task_rejected", now_).field("task", task.spec.id).field("reason", reason);
    }

    void enqueue_placement(PlacementKind kind, TaskRuntime& task, CoreId target)
    {
        PendingPlacement p;
        p.seq = next_placement_seq_++;
        p.kind = kind;
        p.task = task.spec.id;
        p.target = target;
        p.util = task.util;
        p.timeout_at = now_.ceil() + deferred_timeout_;
        pending_[target].push_back(p);
        task.placement_pending = true;
        sync_incoming_flag(target);
        push_timed(p.timeout_at, EventClass::LbTimeout, target, p.seq);
        ++result_.metrics.lb_deferred;
        trace_.emit("lb_deferred", now_)
            .field("task", task.spec.id)
            .field("to", target)
            .field("kind", kind == PlacementKind::PermanentMigration ? "permanent" : "admission");
    }

    void cancel_placements_of(TaskId id)
    {
        for (CoreId j = 0; j < pending_.size(); ++j) {
            auto& q = pending_[j];
            q.erase(std::remove_if(q.begin(), q.end(), [&](const PendingPlacement& p) { return p.task == id; }),
                    q.end());
            sync_incoming_flag(j);
        }
        tasks_[id].placement_pending = false;
    }

    void sync_incoming_flag(CoreId j) { cores_[j].ledger.incoming_migrations_enabled = pending_[j].empty(); }

    void process_pending_placements()
    {
        for (CoreId j = 0; j < pending_.size(); ++j) {
            auto& q = pending_[j];
            while (!q.empty()) {
                const PendingPlacement& p = q.front();
                CoreLoad load{j, cores_[j].ledger.allocated.value().value(), cores_[j].ledger.migrated.value().value(),
                              {}};
                if (!deferred_placement_ready(load, p.util))
                    break;
                PendingPlacement done = p;
                q.pop_front();
                TaskRuntime& task = tasks_[done.task];
                task.placement_pending = false;
                if (done.kind == PlacementKind::PermanentMigration) {
                    if (task.admitted && !task.departing && servers_.at(*task.home).core != j)
                        finalize_permanent_migration(done.task, j);
                } else {
                    admit_task(task, j, now_.ceil());
                }
            }
            sync_incoming_flag(j);
        }
    }

    void maybe_finish_departure(TaskRuntime& task)
    {
        if (!task.departing || task.departed || !task.admitted || !task.pending.empty() || task.temp)
            return;
        Server& home = servers_.at(*task.home);
        if (home.state != ServerState::Inactive)
            return;
        cores_[home.core].ledger.allocated.sub(home.util);
        destroy(home);
        task.departed = true;
        trace_.emit("task_departed", now_).field("task", task.spec.id).field("core", home.core);
    }

    /// A contending server whose deadline is not later than now while its
    /// virtual time is still behind it did not get its reserved budget.
    void check_server_deadlines()
    {
        for (CoreId j = 0; j < cores_.size(); ++j) {
            for (const auto& [d, id] : cores_[j].ready) {
                if (d > now_)
                    break;
                const Server& s = servers_[id];
                if (s.vtime >= s.deadline)
                    continue;
                if (missed_server_deadlines_.size() <= id)
                    missed_server_deadlines_.resize(id + 1);
                auto& last = missed_server_deadlines_[id];
                if (last && *last == s.deadline)
                    continue;
                last = s.deadline;
                ++result_.metrics.server_deadline_misses;
                trace_.emit("server_deadline_miss", now_).field("server", id).field("task", s.task);
                if (opt_.debug_asserts)
                    invariant_failure("server " + std::to_string(id) + " missed its scheduling deadline " +
                                      s.deadline.to_string());
            }
        }
    }

    void check_bounds() const
    {
        for (const auto& c : cores_) {
            const Rational& a = c.ledger.active.value().value();
            const Rational& u = c.ledger.allocated.value().value();
            const Rational& um = c.ledger.migrated.value().value();
            if (a > Rational(1))
                invariant_failure("core " + std::to_string(c.ledger.core) + " active utilization " + a.to_string() +
                                  " exceeds 1");
            if (u + um > Rational(1))
                invariant_failure("core " + std::to_string(c.ledger.core) + " allocated+migrated utilization " +
                                  (u + um).to_string() + " exceeds 1");
            if (a > u + um)
                invariant_failure("core " + std::to_string(c.ledger.core) +
                                  " active utilization exceeds allocated+migrated");
        }
    }

    void note(std::string s)
    {
        if (opt_.debug_asserts)
            tail_.note("t=" + now_.to_string() + " " + std::move(s));
    }

    [[noreturn]] void invariant_failure(const std::string& what) const
    {
        fail(ErrorKind::Invariant, "t=" + now_.to_string() + ": " + what + tail_.dump());
    }

    void finish()
    {
        for (const auto& t : tasks_)
            result_.metrics.jobs_unfinished += t.pending.size();
        result_.metrics.temp_migrations = trace_.count("temp_migration");
        result_.ledger_conservation_gap.clear();
        for (const auto& c : cores_) {
            Rational gap;
            for (const TrackedBandwidth* f : {&c.ledger.allocated, &c.ledger.migrated, &c.ledger.active}) {
                Rational d = f->total_added() - f->total_removed() - f->value().value();
                gap += d.sign() < 0 ? -d : d;
            }
            result_.ledger_conservation_gap.push_back(gap);
        }
    }

    PartitionedPolicy policy_;
    RunOptions opt_;
    Tick horizon_;
    Tick deferred_timeout_ = 1;
    Instant now_;
    std::vector<Core> cores_;
    std::vector<Server> servers_;
    std::vector<ServerId> live_;
    std::vector<TaskRuntime> tasks_;
    std::vector<std::deque<PendingPlacement>> pending_;
    std::uint64_t next_placement_seq_ = 0;
    TimedQueue timed_;
    TraceSink trace_;
    RunResult result_;
    std::vector<ExponentialAverage> ema_;
    std::vector<RollingMissRatio> core_miss_;
    std::vector<std::optional<Instant>> missed_server_deadlines_;
    EventTail tail_;
};

} // namespace grubsim
