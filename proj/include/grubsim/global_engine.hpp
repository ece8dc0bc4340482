#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "grubsim/engine_common.hpp"
#include "grubsim/global_grub.hpp"
#include "grubsim/grub.hpp"

namespace grubsim {

/// Global-EDF GRUB baseline: one ready queue shared by m cores, parallel or
/// sequential reclaiming. Exhausted servers only postpone.
class GlobalSystem {
public:
    GlobalSystem(std::uint32_t cores, std::vector<TaskSpec> tasks, std::uint64_t scenario_seed, ReclaimMode mode,
                 RunOptions options, Tick horizon)
        : opt_(options), horizon_(horizon), ledger_(mode, cores), running_(cores), trace_(options.trace)
    {
        if (cores == 0)
            fail(ErrorKind::Config, "global system needs at least one core");
        for (std::size_t i = 0; i < tasks.size(); ++i) {
            if (tasks[i].id != i)
                fail(ErrorKind::Config, "task ids must be 0..n-1 in order");
            tasks_.emplace_back(std::move(tasks[i]), scenario_seed, BalancerConfig{});
        }
        ema_.assign(cores, ExponentialAverage(opt_.ema_alpha));
        core_miss_.assign(cores, RollingMissRatio(opt_.miss_window_ticks));
        result_.series.resize(cores);
        for (auto& t : tasks_) {
            if (t.spec.dynamic)
                push_timed(t.spec.arrival_time, EventClass::TaskInsert, t.spec.id);
            else if (admission_ok(t))
                admit_task(t, t.spec.arrival_time);
            else
                reject_task(t);
            if (t.spec.departure_time)
                push_timed(*t.spec.departure_time, EventClass::TaskRemove, t.spec.id);
        }
        if (opt_.sample_stride > 0)
            push_timed(0, EventClass::MetricsSample, 0);
    }

    RunResult run()
    {
        run_until(Rational(horizon_));
        for (const auto& t : tasks_)
            result_.metrics.jobs_unfinished += t.pending.size();
        result_.ledger_conservation_gap.assign(ledger_.cores, Rational(0));
        return std::move(result_);
    }

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
    const GlobalLedger& ledger() const { return ledger_; }
    const Server& server(ServerId s) const { return servers_.at(s); }
    const RunMetrics& metrics() const { return result_.metrics; }
    const std::optional<ServerId>& running_on(CoreId c) const { return running_.at(c); }

    /// Virtual-time rate of the server running on core c.
    Rational rate_on(CoreId c) const
    {
        const Server& s = servers_.at(*running_.at(c));
        return reclaim_rate(s.util, ledger_, c);
    }

private:
    void push_timed(Tick t, EventClass cls, std::uint64_t entity) { timed_.push({t, cls, entity, 0}); }

    bool timed_due() const { return !timed_.empty() && now_.is_integer() && now_.floor() == timed_.top().time; }

    std::optional<Instant> next_event_time() const
    {
        std::optional<Instant> best;
        auto consider = [&best](const Instant& t) {
            if (!best || t < *best)
                best = t;
        };
        if (!timed_.empty())
            best = Rational(timed_.top().time);
        for (CoreId c = 0; c < running_.size(); ++c) {
            if (!running_[c])
                continue;
            const Server& s = servers_[*running_[c]];
            consider(now_ + tasks_[s.task].pending.front().remaining);
            consider(now_ + exhaustion_horizon_at_rate(s, reclaim_rate(s.util, ledger_, c)));
        }
        for (const auto& s : servers_)
            if (s.alive && s.state == ServerState::ActNonContending)
                consider(s.vtime);
        return best;
    }

    void advance(const Instant& to)
    {
        Rational dt = to - now_;
        if (dt.sign() < 0)
            invariant_failure("time went backwards");
        if (!dt.is_zero()) {
            // rates depend on the ledger only, which is constant over the step
            std::vector<Rational> rates(running_.size());
            for (CoreId c = 0; c < running_.size(); ++c)
                if (running_[c])
                    rates[c] = rate_on(c);
            for (CoreId c = 0; c < running_.size(); ++c) {
                if (!running_[c])
                    continue;
                Server& s = servers_[*running_[c]];
                tasks_[s.task].pending.front().remaining -= dt;
                advance_virtual_time(s, dt, rates[c]);
            }
        }
        now_ = to;
    }

    void process_instant()
    {
        std::vector<InstantEvent> evs;
        for (CoreId c = 0; c < running_.size(); ++c)
            if (running_[c] && tasks_[servers_[*running_[c]].task].pending.front().remaining.is_zero())
                evs.push_back({EventClass::JobCompletion, *running_[c], c});
        for (const auto& s : servers_)
            if (s.alive && s.state == ServerState::ActNonContending && s.vtime <= now_)
                evs.push_back({EventClass::VirtualTimeReached, s.id, 0});
        while (timed_due()) {
            const auto& e = timed_.top();
            evs.push_back({e.cls, e.entity, e.seq});
            timed_.pop();
        }
        for (CoreId c = 0; c < running_.size(); ++c)
            if (running_[c] && servers_[*running_[c]].vtime >= servers_[*running_[c]].deadline)
                evs.push_back({EventClass::ExhaustionCheck, *running_[c], 0});
        std::sort(evs.begin(), evs.end());
        for (const auto& e : evs) {
            switch (e.cls) {
            case EventClass::JobCompletion: handle_completion(static_cast<ServerId>(e.entity), static_cast<CoreId>(e.seq)); break;
            case EventClass::VirtualTimeReached: handle_virtual_time(static_cast<ServerId>(e.entity)); break;
            case EventClass::JobArrival: handle_arrival(static_cast<TaskId>(e.entity)); break;
            case EventClass::ExhaustionCheck: handle_exhaustion(static_cast<ServerId>(e.entity)); break;
            case EventClass::LbTimeout: break;
            case EventClass::TaskInsert: handle_insert(static_cast<TaskId>(e.entity)); break;
            case EventClass::TaskRemove: handle_remove(static_cast<TaskId>(e.entity)); break;
            case EventClass::MetricsSample: handle_sample(); break;
            }
        }
        redispatch();
        check_server_deadlines();
        if (ledger_.total_active.value() > Rational(static_cast<std::int64_t>(ledger_.cores)))
            invariant_failure("global active utilization exceeds the core count");
    }

    void redispatch()
    {
        std::vector<ServerId> earliest;
        for (const auto& [d, id] : ready_) {
            if (earliest.size() == running_.size())
                break;
            earliest.push_back(id);
        }
        auto plan = global_dispatch(earliest, running_, [this](ServerId id) { return servers_[id].last_core; });
        for (const auto& mv : plan.migrations) {
            ++result_.metrics.gedf_migrations;
            trace_.emit("gedf_migration", now_).field("server", mv.server).field("from", mv.from).field("to", mv.to);
        }
        for (CoreId c = 0; c < running_.size(); ++c) {
            if (running_[c] && running_[c] != plan.assignment[c]) {
                Server& s = servers_[*running_[c]];
                if (s.state == ServerState::Executing)
                    s.state = ServerState::Ready;
            }
        }
        for (CoreId c = 0; c < running_.size(); ++c) {
            running_[c] = plan.assignment[c];
            if (!running_[c])
                continue;
            Server& s = servers_[*running_[c]];
            s.state = ServerState::Executing;
            s.last_core = c;
            if (ledger_.mode == ReclaimMode::Sequential && booked_on_[s.id] != c) {
                ledger_.booked[*booked_on_[s.id]] -= s.util;
                ledger_.booked[c] += s.util;
                booked_on_[s.id] = c;
            }
        }
    }

    void activate(Server& s)
    {
        ledger_.total_active += s.util;
        if (ledger_.mode == ReclaimMode::Sequential) {
            CoreId c = s.last_core.value_or(ledger_.least_booked_core());
            ledger_.booked[c] += s.util;
            booked_on_[s.id] = c;
        }
    }

    void deactivate(Server& s)
    {
        s.state = ServerState::Inactive;
        ledger_.total_active -= s.util;
        if (ledger_.mode == ReclaimMode::Sequential) {
            ledger_.booked[*booked_on_[s.id]] -= s.util;
            booked_on_[s.id].reset();
        }
    }

    void handle_arrival(TaskId id)
    {
        TaskRuntime& task = tasks_[id];
        if (!task.admitted || task.departing)
            return;
        Tick at = now_.floor();
        Job job;
        job.task = id;
        job.index = task.next_index;
        job.arrival = at;
        job.demand = task.next_demand();
        ++task.next_index;
        job.remaining = Rational(job.demand);
        Tick next = at + task.inter_arrival();
        if (next < horizon_ && (!task.spec.departure_time || next < *task.spec.departure_time))
            push_timed(next, EventClass::JobArrival, id);
        trace_.emit("job_arrival", now_).field("task", id).field("job", job.index).field("demand", job.demand);
        task.pending.push_back(std::move(job));
        Server& s = servers_[*task.home];
        if (s.state == ServerState::Inactive) {
            s.vtime = now_;
            s.deadline = now_ + Rational(s.period);
            s.state = ServerState::Ready;
            activate(s);
            ready_.emplace(s.deadline, s.id);
        } else if (s.state == ServerState::ActNonContending) {
            s.state = ServerState::Ready;
            ready_.emplace(s.deadline, s.id);
        }
        if (opt_.record_jobs)
            result_.arrivals.push_back({id, task.pending.back().index, now_, s.vtime});
    }

    void handle_completion(ServerId sid, CoreId core)
    {
        Server& s = servers_[sid];
        TaskRuntime& task = tasks_[s.task];
        Job job = std::move(task.pending.front());
        task.pending.pop_front();
        job.missed = now_ > Rational(job.absolute_deadline(task.spec.relative_deadline()));
        ++result_.metrics.jobs_total;
        result_.metrics.jobs_missed += job.missed ? 1 : 0;
        core_miss_[core].record(now_.floor(), job.missed);
        if (opt_.record_jobs)
            result_.jobs.push_back({job.task, job.index, job.arrival, job.demand, now_, s.vtime, job.missed, false});
        trace_.emit("job_finish", now_)
            .field("task", job.task)
            .field("job", job.index)
            .field("core", core)
            .field("missed", job.missed);
        if (!task.pending.empty())
            return;
        ready_.erase({s.deadline, s.id});
        running_[core].reset();
        if (s.vtime > now_) {
            s.state = ServerState::ActNonContending;
        } else {
            deactivate(s);
            maybe_finish_departure(task);
        }
    }

    void handle_virtual_time(ServerId sid)
    {
        Server& s = servers_[sid];
        if (!s.alive || s.state != ServerState::ActNonContending || s.vtime > now_)
            return;
        deactivate(s);
        maybe_finish_departure(tasks_[s.task]);
    }

    void handle_exhaustion(ServerId sid)
    {
        Server& s = servers_[sid];
        if (!s.alive || s.state != ServerState::Executing || s.vtime < s.deadline)
            return;
        ready_.erase({s.deadline, s.id});
        s.deadline = s.vtime + Rational(s.period);
        ready_.emplace(s.deadline, s.id);
        ++result_.metrics.postponements;
        if (opt_.record_jobs)
            result_.postponements.push_back({s.id, s.task, now_, s.vtime, s.deadline});
        trace_.emit("postpone", now_).field("server", s.id).field("task", s.task).field("deadline", s.deadline);
    }

    bool admission_ok(const TaskRuntime& candidate) const
    {
        std::vector<Bandwidth> utils;
        for (const auto& t : tasks_)
            if (t.admitted && !t.departed)
                utils.push_back(t.util);
        utils.push_back(candidate.util);
        return global_edf_admission_test(utils, ledger_.cores);
    }

    void handle_insert(TaskId id)
    {
        TaskRuntime& task = tasks_[id];
        trace_.emit("task_insert", now_).field("task", id).field("util", task.util);
        if (admission_ok(task))
            admit_task(task, now_.ceil());
        else
            reject_task(task);
    }

    void handle_remove(TaskId id)
    {
        TaskRuntime& task = tasks_[id];
        if (task.departing || task.departed)
            return;
        task.departing = true;
        trace_.emit("task_remove", now_).field("task", id);
        if (!task.admitted)
            task.departed = true;
        else
            maybe_finish_departure(task);
    }

    void maybe_finish_departure(TaskRuntime& task)
    {
        if (!task.departing || task.departed || !task.pending.empty())
            return;
        Server& s = servers_[*task.home];
        if (s.state != ServerState::Inactive)
            return;
        s.alive = false;
        task.departed = true;
        trace_.emit("task_departed", now_).field("task", task.spec.id);
    }

    void admit_task(TaskRuntime& task, Tick first_release)
    {
        Server s;
        s.id = static_cast<ServerId>(servers_.size());
        s.task = task.spec.id;
        s.period = task.spec.period;
        s.util = task.util;
        task.home = s.id;
        task.admitted = true;
        servers_.push_back(std::move(s));
        booked_on_.emplace_back();
        if (first_release < horizon_ && (!task.spec.departure_time || first_release < *task.spec.departure_time))
            push_timed(first_release, EventClass::JobArrival, task.spec.id);
        trace_.emit("task_admitted", now_).field("task", task.spec.id);
    }

    void reject_task(TaskRuntime& task)
    {
        ++result_.metrics.rejections;
        result_.rejected_tasks.push_back(task.spec.id);
        trace_.emit("task_rejected", now_).field("task", task.spec.id).field("reason", "gedf_test");
    }

    void handle_sample()
    {
        Tick t = now_.floor();
        result_.series.time.push_back(t);
        for (CoreId c = 0; c < ledger_.cores; ++c) {
            double a = ledger_.mode == ReclaimMode::Sequential
                           ? ledger_.booked[c].to_double()
                           : ledger_.total_active.to_double() / static_cast<double>(ledger_.cores);
            result_.series.active[c].push_back(a);
            result_.series.active_ema[c].push_back(ema_[c].update(a));
            result_.series.miss_ratio[c].push_back(core_miss_[c].at(t));
        }
        if (t + opt_.sample_stride <= horizon_)
            push_timed(t + opt_.sample_stride, EventClass::MetricsSample, 0);
    }

    /// Global reclaiming offers no per-server guarantee here; misses of
    /// scheduling deadlines are counted, never fatal.
    void check_server_deadlines()
    {
        for (const auto& [d, id] : ready_) {
            if (d > now_)
                break;
            const Server& s = servers_[id];
            if (s.vtime >= s.deadline)
                continue;
            if (last_miss_.size() <= id)
                last_miss_.resize(id + 1);
            if (last_miss_[id] && *last_miss_[id] == s.deadline)
                continue;
            last_miss_[id] = s.deadline;
            ++result_.metrics.server_deadline_misses;
            trace_.emit("server_deadline_miss", now_).field("server", id).field("task", s.task);
        }
    }

    [[noreturn]] void invariant_failure(const std::string& what) const
    {
        fail(ErrorKind::Invariant, "t=" + now_.to_string() + ": " + what);
    }

    RunOptions opt_;
    Tick horizon_;
    Instant now_;
    GlobalLedger ledger_;
    std::vector<std::optional<ServerId>> running_;
    std::vector<Server> servers_;
    std::vector<std::optional<CoreId>> booked_on_;
    std::vector<TaskRuntime> tasks_;
    std::set<std::pair<Instant, ServerId>> ready_;
    TimedQueue timed_;
    TraceSink trace_;
    RunResult result_;
    std::vector<ExponentialAverage> ema_;
    std::vector<RollingMissRatio> core_miss_;
    std::vector<std::optional<Instant>> last_miss_;
};

} // namespace grubsim
