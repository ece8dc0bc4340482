#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <vector>

#include "grubsim/load_balancer.hpp"
#include "grubsim/metrics.hpp"
#include "grubsim/random.hpp"
#include "grubsim/scenario.hpp"
#include "grubsim/trace.hpp"

namespace grubsim {

/// Total order of events sharing a timestamp.
enum class EventClass : std::uint8_t {
    JobCompletion = 0,
    VirtualTimeReached = 1,
    JobArrival = 2,
    ExhaustionCheck = 3,
    LbTimeout = 4,
    TaskInsert = 5,
    TaskRemove = 6,
    MetricsSample = 7,
};

/// Event whose time is known in advance (always an integer tick).
struct TimedEvent {
    Tick time = 0;
    EventClass cls = EventClass::JobArrival;
    std::uint64_t entity = 0;
    std::uint64_t seq = 0;

    friend bool operator>(const TimedEvent& a, const TimedEvent& b)
    {
        if (a.time != b.time)
            return a.time > b.time;
        if (a.cls != b.cls)
            return a.cls > b.cls;
        if (a.entity != b.entity)
            return a.entity > b.entity;
        return a.seq > b.seq;
    }
};

using TimedQueue = std::priority_queue<TimedEvent, std::vector<TimedEvent>, std::greater<>>;

/// Event detected at the current instant, ready to be processed.
struct InstantEvent {
    EventClass cls = EventClass::JobArrival;
    std::uint64_t entity = 0;
    std::uint64_t seq = 0;

    friend bool operator<(const InstantEvent& a, const InstantEvent& b)
    {
        if (a.cls != b.cls)
            return a.cls < b.cls;
        if (a.entity != b.entity)
            return a.entity < b.entity;
        return a.seq < b.seq;
    }
};

struct RunOptions {
    std::optional<Tick> horizon;   // defaults to the scenario horizon
    bool debug_asserts = false;    // recompute every ledger after every instant
    Tick sample_stride = 0;        // 0 disables per-tick metric samples
    double ema_alpha = 1.0 / 200.0;
    Tick miss_window_ticks = 1000; // width of the rolling per-core miss ratio
    std::ostream* trace = nullptr;
    bool record_jobs = false;      // keep per-job and per-postponement logs
};

struct RunResult {
    RunMetrics metrics;
    CoreSeries series;
    std::vector<JobRecord> jobs;
    std::vector<PostponeRecord> postponements;
    std::vector<ArrivalRecord> arrivals;
    std::vector<TaskId> rejected_tasks;
    std::vector<std::pair<TaskId, CoreId>> initial_placement;
    std::vector<Rational> ledger_conservation_gap; // per core, sum over fields of |added - removed - value|
};

/// Runtime state of one task.
struct TaskRuntime {
    TaskSpec spec;
    Bandwidth util;
    std::optional<ServerId> home;
    std::optional<ServerId> temp; // set while the job in service runs on a temporary server
    std::deque<Job> pending;      // FIFO; front is the job in service
    std::uint64_t next_index = 0;
    bool admitted = false;
    bool departing = false;
    bool departed = false;
    bool placement_pending = false;
    bool migrated_flag = false;
    MissWindow window;
    Rng stream;

    TaskRuntime(TaskSpec s, std::uint64_t scenario_seed, const BalancerConfig& bal)
        : spec(std::move(s)), util(spec.utilization()), window(bal.window_size, bal.miss_threshold),
          stream(job_stream_seed(scenario_seed, spec.id))
    {
    }

    Tick next_demand() { return sample_exec(spec.exec, stream, next_index); }

    Tick inter_arrival()
    {
        if (spec.kind == TaskKind::Periodic)
            return spec.period;
        auto extra = static_cast<Tick>(spec.sporadic_jitter * static_cast<double>(spec.period));
        return spec.period + (extra > 0 ? stream.uniform_int(0, extra) : 0);
    }
};

/// Most recent events, printed when an invariant fails.
class EventTail {
public:
    explicit EventTail(std::size_t cap = 24) : cap_(cap) {}

    void note(std::string s)
    {
        lines_.push_back(std::move(s));
        if (lines_.size() > cap_)
            lines_.pop_front();
    }

    std::string dump() const
    {
        std::string out;
        for (const auto& l : lines_)
            out += "\n  " + l;
        return out;
    }

private:
    std::size_t cap_;
    std::deque<std::string> lines_;
};

} // namespace grubsim
