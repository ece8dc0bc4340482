#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "grubsim/rational.hpp"

namespace grubsim {

/// Integer simulated time unit.
using Tick = std::int64_t;
/// Exact instant; event timestamps and virtual times live here.
using Instant = Rational;

using TaskId = std::uint32_t;
using ServerId = std::uint32_t;
using CoreId = std::uint32_t;

enum class ServerState { Inactive, Ready, Executing, ActNonContending };

inline const char* to_string(ServerState s)
{
    switch (s) {
    case ServerState::Inactive: return "inactive";
    case ServerState::Ready: return "ready";
    case ServerState::Executing: return "executing";
    case ServerState::ActNonContending: return "act_non_contending";
    }
    return "?";
}

/// A server counts in the active utilization in every state but Inactive.
inline bool is_active(ServerState s) { return s != ServerState::Inactive; }
inline bool is_contending(ServerState s) { return s == ServerState::Ready || s == ServerState::Executing; }

enum class ServerKind {
    Permanent, // the task's own reservation
    Temporary, // short-lived server carrying one migrated job
    Residue,   // bandwidth left on the source core after a permanent migration
};

enum class TaskKind { Periodic, Sporadic };

enum class ExecKind { TwoLevelUniform, Weibull, Fixed };

/// Distribution of job execution times of one task.
struct ExecModel {
    ExecKind kind = ExecKind::Fixed;
    Tick minexec = 1;
    Tick maxexec = 1;
    Tick budget = 1; // B
    double pm = 0.75; // probability that a job does NOT exceed B
    double weibull_shape = 2.0;
    double weibull_scale = 1.0;
    double weibull_location = 0.0;
    std::vector<Tick> fixed; // Fixed: demands cycle through this list
};

/// A periodic or sporadic task together with the parameters of its server.
/// The relative deadline equals the period, and the server period equals the
/// task period.
struct TaskSpec {
    TaskId id = 0;
    Tick period = 1;
    Tick budget = 1; // server budget Q
    TaskKind kind = TaskKind::Periodic;
    ExecModel exec;
    Tick arrival_time = 0; // first job release / entry into the system
    std::optional<Tick> departure_time;
    Bandwidth migrating_util{1, 10};
    double sporadic_jitter = 0.2; // extra inter-arrival is Unif[0, jitter*T]
    bool dynamic = false; // enters through the allocation strategy at arrival_time

    Bandwidth utilization() const { return Bandwidth(budget, period); }
    Tick relative_deadline() const { return period; }
};

struct Job {
    TaskId task = 0;
    std::uint64_t index = 0;
    Tick arrival = 0;
    Tick demand = 0;
    Rational remaining;
    std::optional<Instant> finish;
    bool missed = false;
    Rational served_home;
    Rational served_migrated;

    Tick absolute_deadline(Tick relative) const { return arrival + relative; }
};

/// Runtime state of one GRUB server.
struct Server {
    ServerId id = 0;
    ServerKind kind = ServerKind::Permanent;
    TaskId task = 0;
    CoreId core = 0;
    Tick period = 1;
    Bandwidth util;
    ServerState state = ServerState::Inactive;
    Instant vtime;
    Instant deadline;
    bool alive = true;
    std::optional<ServerId> parent;     // Temporary: the home server
    std::optional<CoreId> last_core;    // global scheduling: where it last ran

    bool is_temporary() const { return kind == ServerKind::Temporary; }
};

/// Bandwidth figure that remembers every increment and decrement so that a
/// trace can be audited for conservation.
class TrackedBandwidth {
public:
    const Bandwidth& value() const { return value_; }
    const Rational& total_added() const { return added_; }
    const Rational& total_removed() const { return removed_; }

    void add(const Bandwidth& b)
    {
        value_ += b;
        added_ += b.value();
    }

    void sub(const Bandwidth& b)
    {
        value_ -= b;
        removed_ += b.value();
    }

    bool conserved() const { return added_ - removed_ == value_.value(); }

private:
    Bandwidth value_;
    Rational added_;
    Rational removed_;
};

/// Per-core bandwidth bookkeeping.
struct CoreLedger {
    CoreId core = 0;
    TrackedBandwidth allocated; // U_j: permanent servers (and their residues)
    TrackedBandwidth migrated;  // U_j^m: live temporary servers
    TrackedBandwidth active;    // U_j^a: every active server on the core
    bool incoming_migrations_enabled = true;
};

} // namespace grubsim
