#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "grubsim/model.hpp"

namespace grubsim {

/// Aggregate counters of one simulation run.
struct RunMetrics {
    std::uint64_t jobs_total = 0;      // jobs finished within the horizon
    std::uint64_t jobs_missed = 0;
    std::uint64_t jobs_unfinished = 0; // still pending at the horizon, excluded from ratios
    std::uint64_t temp_migrations = 0; // outbound temporary migrations
    std::uint64_t perm_migrations = 0;
    std::uint64_t gedf_migrations = 0;
    std::uint64_t rejections = 0;
    std::uint64_t lb_deferred = 0;
    std::uint64_t lb_aborts = 0;
    std::uint64_t postponements = 0;
    std::uint64_t server_deadline_misses = 0;

    double miss_ratio() const
    {
        return jobs_total == 0 ? 0.0 : static_cast<double>(jobs_missed) / static_cast<double>(jobs_total);
    }

    /// Job-level migrations: temporary ones for partitioned runs, global
    /// dispatcher moves for global runs.
    double migrations_per_job() const
    {
        if (jobs_total == 0)
            return 0.0;
        return static_cast<double>(temp_migrations + gedf_migrations) / static_cast<double>(jobs_total);
    }

    double task_migrations_per_job() const
    {
        return jobs_total == 0 ? 0.0 : static_cast<double>(perm_migrations) / static_cast<double>(jobs_total);
    }
};

/// s <- (1 - alpha) s + alpha x, starting from 0.
class ExponentialAverage {
public:
    explicit ExponentialAverage(double alpha = 1.0 / 200.0) : alpha_(alpha) {}

    double update(double x)
    {
        value_ = (1.0 - alpha_) * value_ + alpha_ * x;
        return value_;
    }

    double value() const { return value_; }

private:
    double alpha_;
    double value_ = 0.0;
};

/// Fraction of jobs missing their deadline among those that finished in the
/// last `width` ticks.
class RollingMissRatio {
public:
    explicit RollingMissRatio(Tick width = 1000) : width_(width) {}

    void record(Tick finish, bool missed)
    {
        events_.push_back({finish, missed});
        misses_ += missed ? 1 : 0;
    }

    double at(Tick now)
    {
        while (!events_.empty() && events_.front().first <= now - width_) {
            misses_ -= events_.front().second ? 1 : 0;
            events_.pop_front();
        }
        if (events_.empty())
            return 0.0;
        return static_cast<double>(misses_) / static_cast<double>(events_.size());
    }

private:
    Tick width_;
    std::deque<std::pair<Tick, bool>> events_;
    std::int64_t misses_ = 0;
};

/// Per-core time series sampled at integer ticks.
struct CoreSeries {
    std::vector<Tick> time;
    std::vector<std::vector<double>> active;     // [core][sample] instantaneous U^a
    std::vector<std::vector<double>> active_ema; // [core][sample]
    std::vector<std::vector<double>> miss_ratio; // [core][sample] rolling window

    void resize(std::size_t cores)
    {
        active.assign(cores, {});
        active_ema.assign(cores, {});
        miss_ratio.assign(cores, {});
    }
};

/// Completed-job record, kept when a run asks for it.
struct JobRecord {
    TaskId task = 0;
    std::uint64_t index = 0;
    Tick arrival = 0;
    Tick demand = 0;
    Instant finish;
    Instant vtime_at_finish; // V of the server that completed the job
    bool missed = false;
    bool migrated = false;
};

struct PostponeRecord {
    ServerId server = 0;
    TaskId task = 0;
    Instant time;
    Instant vtime;
    Instant new_deadline;
};

struct ArrivalRecord {
    TaskId task = 0;
    std::uint64_t index = 0;
    Instant time;
    Instant vtime; // server virtual time right after the arrival was handled
};

} // namespace grubsim
