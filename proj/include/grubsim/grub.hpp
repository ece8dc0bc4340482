#pragma once

#include <optional>
#include <set>
#include <utility>

#include "grubsim/model.hpp"

namespace grubsim {

/// EDF queue of contending servers keyed by (scheduling deadline, server id).
/// The executing server stays in the queue: Executing is a sub-state of Ready.
class ReadyQueue {
public:
    void insert(const Server& s) { q_.emplace(s.deadline, s.id); }
    void erase(const Server& s) { q_.erase({s.deadline, s.id}); }
    bool contains(const Server& s) const { return q_.count({s.deadline, s.id}) != 0; }

    std::optional<ServerId> head() const
    {
        if (q_.empty())
            return std::nullopt;
        return q_.begin()->second;
    }

    bool empty() const { return q_.empty(); }
    std::size_t size() const { return q_.size(); }

    auto begin() const { return q_.begin(); }
    auto end() const { return q_.end(); }

private:
    std::set<std::pair<Instant, ServerId>> q_;
};

/// One processor of the partitioned system.
struct Core {
    CoreLedger ledger;
    ReadyQueue ready;
    std::optional<ServerId> running;
};

/// A new job of the served task arrived at t.
inline void on_job_arrival(Server& s, const Instant& t, Core& core)
{
    switch (s.state) {
    case ServerState::Inactive:
        s.vtime = t;
        s.deadline = t + Rational(s.period);
        s.state = ServerState::Ready;
        core.ledger.active.add(s.util);
        core.ready.insert(s);
        break;
    case ServerState::ActNonContending:
        // back to Ready without touching its variables
        s.state = ServerState::Ready;
        core.ready.insert(s);
        break;
    case ServerState::Ready:
    case ServerState::Executing:
        break;
    }
}

/// Virtual-time advance of an executing server over dt at a given rate.
inline const Instant& advance_virtual_time(Server& s, const Rational& dt, const Rational& rate)
{
    if (dt.sign() < 0)
        fail(ErrorKind::Invariant, "negative time step");
    s.vtime += rate * dt;
    return s.vtime;
}

/// V += (U^a / U_i) * dt.
inline const Instant& advance_executing(Server& s, const Rational& dt, const Bandwidth& active_util)
{
    return advance_virtual_time(s, dt, active_util.value() / s.util.value());
}

/// Execution time until V reaches d when V advances at `rate`.
inline Rational exhaustion_horizon_at_rate(const Server& s, const Rational& rate)
{
    if (rate.sign() <= 0)
        fail(ErrorKind::Invariant, "executing server with non-positive reclaiming rate");
    if (s.vtime >= s.deadline)
        return Rational(0);
    return (s.deadline - s.vtime) / rate;
}

/// (d - V) * U_i / U^a.
inline Rational exhaustion_horizon(const Server& s, const Bandwidth& active_util)
{
    if (active_util.is_zero())
        fail(ErrorKind::Invariant, "executing server while active utilization is zero");
    return exhaustion_horizon_at_rate(s, active_util.value() / s.util.value());
}

/// d <- V + P. Requires the budget of the current deadline to be spent.
inline void postpone_deadline(Server& s, ReadyQueue* queue = nullptr)
{
    if (s.vtime < s.deadline)
        fail(ErrorKind::Invariant,
             "postponement of server " + std::to_string(s.id) + " with V < d");
    bool queued = queue && queue->contains(s);
    if (queued)
        queue->erase(s);
    s.deadline = s.vtime + Rational(s.period);
    if (queued)
        queue->insert(s);
}

enum class CompletionOutcome { StillContending, NonContending, Inactive };

/// The job in service finished at t. With more pending jobs the server keeps
/// serving them in FIFO order; otherwise it leaves the contention.
inline CompletionOutcome on_job_completion(Server& s, const Instant& t, Core& core, bool has_pending)
{
    if (has_pending)
        return CompletionOutcome::StillContending;
    core.ready.erase(s);
    if (core.running == s.id)
        core.running.reset();
    if (s.vtime > t) {
        s.state = ServerState::ActNonContending;
        return CompletionOutcome::NonContending;
    }
    s.state = ServerState::Inactive;
    core.ledger.active.sub(s.util);
    return CompletionOutcome::Inactive;
}

/// t reached V of a non-contending server. Returns true when the server is a
/// temporary one that must now be destroyed.
inline bool on_virtual_time_reached(Server& s, const Instant& t, Core& core)
{
    if (s.state != ServerState::ActNonContending)
        fail(ErrorKind::Invariant, "virtual-time timer on a server that is not act-non-contending");
    if (t < s.vtime)
        fail(ErrorKind::Invariant, "virtual-time timer fired early");
    s.state = ServerState::Inactive;
    core.ledger.active.sub(s.util);
    if (s.is_temporary()) {
        core.ledger.migrated.sub(s.util);
        return true;
    }
    return false;
}

/// Earliest (deadline, id) contending server, or nothing when idle.
inline std::optional<ServerId> dispatch(const ReadyQueue& queue) { return queue.head(); }

} // namespace grubsim
