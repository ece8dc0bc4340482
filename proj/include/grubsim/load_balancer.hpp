#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <vector>

#include "grubsim/heuristics.hpp"
#include "grubsim/model.hpp"

namespace grubsim {

/// Outcomes of the last `size` jobs of one task.
class MissWindow {
public:
    explicit MissWindow(std::size_t size = 20, Rational threshold = Rational(1, 10))
        : size_(size == 0 ? 1 : size), threshold_(std::move(threshold))
    {
    }

    /// Records one finished job. Returns true when the window is full and
    /// the miss ratio exceeds the threshold.
    bool record(bool missed)
    {
        outcomes_.push_back(missed);
        misses_ += missed ? 1 : 0;
        if (outcomes_.size() > size_) {
            misses_ -= outcomes_.front() ? 1 : 0;
            outcomes_.pop_front();
        }
        return triggered();
    }

    bool full() const { return outcomes_.size() == size_; }

    bool triggered() const
    {
        return full() && Rational(misses_) > threshold_ * Rational(static_cast<std::int64_t>(size_));
    }

    double ratio() const
    {
        return outcomes_.empty() ? 0.0 : static_cast<double>(misses_) / static_cast<double>(outcomes_.size());
    }

    std::size_t size() const { return size_; }
    std::size_t seen() const { return outcomes_.size(); }

    void reset()
    {
        outcomes_.clear();
        misses_ = 0;
    }

private:
    std::size_t size_;
    Rational threshold_;
    std::deque<bool> outcomes_;
    std::int64_t misses_ = 0;
};

struct BalancerConfig {
    bool enabled = false;
    std::size_t window_size = 20;
    Rational miss_threshold{1, 10};
    std::optional<Tick> deferred_timeout; // default: 2 x the largest server period
};

enum class PlacementKind { PermanentMigration, NewTaskAdmission };

/// A placement waiting for the migrated utilization of `target` to drain.
struct PendingPlacement {
    std::uint64_t seq = 0;
    PlacementKind kind = PlacementKind::PermanentMigration;
    TaskId task = 0;
    CoreId target = 0;
    Bandwidth util;
    Tick timeout_at = 0;
};

/// Load figures of one core as seen by the placement rules. `reserved` is
/// the utilization of placements already queued on the core.
struct CoreLoad {
    CoreId core = 0;
    Rational allocated;
    Rational migrated;
    Rational reserved;
};

enum class PlacementOutcome { Immediate, Deferred, Infeasible };

struct PlacementDecision {
    PlacementOutcome outcome = PlacementOutcome::Infeasible;
    CoreId core = 0;
};

/// Immediate if some core has u <= 1 - U_j - U_j^m, else deferred if some
/// core has u <= 1 - U_j, else infeasible. The heuristic picks among the
/// qualifying cores.
inline PlacementDecision decide_placement(const std::vector<CoreLoad>& loads, const Bandwidth& u, Heuristic h,
                                          std::optional<CoreId> exclude = std::nullopt)
{
    std::vector<CoreCandidate> now;
    std::vector<CoreCandidate> later;
    for (const auto& l : loads) {
        if (exclude && l.core == *exclude)
            continue;
        Rational committed = l.allocated + l.reserved;
        now.push_back({l.core, residual(committed + l.migrated)});
        later.push_back({l.core, residual(committed)});
    }
    if (auto c = select_core_heuristic(now, u, h))
        return {PlacementOutcome::Immediate, *c};
    if (auto c = select_core_heuristic(later, u, h))
        return {PlacementOutcome::Deferred, *c};
    return {PlacementOutcome::Infeasible, 0};
}

/// Destination for a task on `source` that keeps missing deadlines.
inline PlacementDecision try_permanent_migration(const Bandwidth& u, CoreId source, const std::vector<CoreLoad>& loads,
                                                 Heuristic h)
{
    return decide_placement(loads, u, h, source);
}

/// Core for a task entering the system; Infeasible means rejection.
inline PlacementDecision allocate_new_task(const Bandwidth& u, const std::vector<CoreLoad>& loads, Heuristic h)
{
    return decide_placement(loads, u, h);
}

/// Deferred placement may complete once U_j^m <= 1 - (u + U_j).
inline bool deferred_placement_ready(const CoreLoad& target, const Bandwidth& u)
{
    return target.migrated <= residual(u.value() + target.allocated);
}

} // namespace grubsim
