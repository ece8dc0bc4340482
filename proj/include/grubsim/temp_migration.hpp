#pragma once

#include <functional>
#include <optional>

#include "grubsim/grub.hpp"

namespace grubsim {

/// Which destination load enters the benefit test of a temporary migration.
enum class BenefitLoad {
    DestinationActive,   // U^a of the destination core
    DestinationMigrated, // U^m of the destination core
};

struct MigrationConfig {
    bool enabled = true;
    Rational epsilon{2};   // minimum useful service on the destination, in ticks
    BenefitLoad benefit_load = BenefitLoad::DestinationActive;
    Tick migration_cost = 0; // added to the remaining demand of a migrated job
};

/// A job exhausted its budget (V >= d) but its server deadline is still in
/// the future (d > t).
inline bool is_eligible(const Server& s, const Instant& t) { return s.vtime >= s.deadline && s.deadline > t; }

/// Core other than `source` with the smallest active utilization among those
/// accepting incoming migrations; lowest id on ties.
template <typename Range, typename Proj = std::identity>
std::optional<CoreId> select_destination_core(const Range& cores, CoreId source, Proj proj = {})
{
    std::optional<CoreId> best;
    const CoreLedger* best_ledger = nullptr;
    CoreId id = 0;
    for (const auto& c : cores) {
        const CoreLedger& l = std::invoke(proj, c);
        if (id != source && l.incoming_migrations_enabled) {
            if (!best_ledger || l.active.value() < best_ledger->active.value()) {
                best = id;
                best_ledger = &l;
            }
        }
        ++id;
    }
    return best;
}

/// u' = min(u^m, 1 - (U_j' + U_j'^m)), floored at 0.
inline Bandwidth admitted_migrating_utilization(const Bandwidth& migrating_util, const CoreLedger& dest)
{
    Rational room = residual(dest.allocated.value().value() + dest.migrated.value().value());
    if (room.sign() <= 0)
        return Bandwidth();
    return Bandwidth(min(migrating_util.value(), room));
}

/// u (d - t) / (u + load) > epsilon, exactly.
inline bool benefit_check(const Bandwidth& granted, const Instant& deadline, const Instant& t,
                          const Bandwidth& dest_load, const MigrationConfig& cfg)
{
    Rational denom = granted.value() + dest_load.value();
    if (denom.is_zero())
        return false;
    return granted.value() * (deadline - t) / denom > cfg.epsilon;
}

} // namespace grubsim
