#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "grubsim/model.hpp"

namespace grubsim {

enum class ReclaimMode { Parallel, Sequential };

inline const char* to_string(ReclaimMode m) { return m == ReclaimMode::Parallel ? "gpar" : "gseq"; }

/// Active-bandwidth bookkeeping of a global-EDF GRUB system.
///
/// Parallel reclaiming keeps one system-wide active utilization; the spare
/// bandwidth m - U^a is a single shared figure. Sequential reclaiming books
/// each active server on the core it last ran on (or the least booked core
/// if it never ran) and reclaims per core.
struct GlobalLedger {
    ReclaimMode mode = ReclaimMode::Parallel;
    std::uint32_t cores = 1;
    Bandwidth total_active;
    std::vector<Bandwidth> booked; // Sequential only

    GlobalLedger() = default;
    GlobalLedger(ReclaimMode mode_, std::uint32_t m) : mode(mode_), cores(m), booked(m) {}

    Rational spare() const
    {
        Rational s = Rational(static_cast<std::int64_t>(cores)) - total_active.value();
        return s.sign() < 0 ? Rational(0) : s;
    }

    CoreId least_booked_core() const
    {
        CoreId best = 0;
        for (CoreId j = 1; j < booked.size(); ++j)
            if (booked[j] < booked[best])
                best = j;
        return best;
    }
};

/// Virtual-time rate of a server executing on `core`.
///
/// Parallel: max(U_i, U^a - (m - 1)) / U_i. Sequential: the bandwidth booked
/// on the core (capped at 1) over U_i. Both reduce to U^a / U_i when m = 1.
inline Rational reclaim_rate(const Bandwidth& util, const GlobalLedger& ledger, CoreId core)
{
    const Rational& u = util.value();
    if (ledger.mode == ReclaimMode::Parallel) {
        Rational excess = ledger.total_active.value() - Rational(static_cast<std::int64_t>(ledger.cores) - 1);
        return max(u, excess) / u;
    }
    Rational booked = ledger.booked.at(core).value();
    if (booked < u)
        fail(ErrorKind::Invariant, "sequential reclaiming: running server not booked on its core");
    return min(booked, Rational(1)) / u;
}

/// Sufficient global-EDF test for implicit-deadline servers:
/// sum U <= m - (m - 1) max U.
inline bool global_edf_admission_test(const std::vector<Bandwidth>& utils, std::uint32_t m)
{
    Rational sum;
    Rational umax;
    for (const auto& u : utils) {
        sum += u.value();
        umax = max(umax, u.value());
    }
    Rational mm(static_cast<std::int64_t>(m));
    return sum <= mm - (mm - Rational(1)) * umax;
}

struct GlobalMove {
    ServerId server = 0;
    CoreId from = 0;
    CoreId to = 0;
};

struct GlobalDispatch {
    std::vector<std::optional<ServerId>> assignment; // per core
    std::vector<GlobalMove> migrations;
};

/// Assigns the (at most m) earliest-deadline servers to cores. Servers that
/// keep running stay where they are; the others fill freed cores in
/// ascending core id. A server starting on a core other than the one it last
/// ran on is a migration.
inline GlobalDispatch global_dispatch(const std::vector<ServerId>& earliest,
                                      const std::vector<std::optional<ServerId>>& current,
                                      const std::function<std::optional<CoreId>(ServerId)>& last_core)
{
    GlobalDispatch out;
    out.assignment.assign(current.size(), std::nullopt);
    std::vector<bool> placed(earliest.size(), false);
    for (CoreId c = 0; c < current.size(); ++c) {
        if (!current[c])
            continue;
        for (std::size_t k = 0; k < earliest.size(); ++k) {
            if (earliest[k] == *current[c]) {
                out.assignment[c] = earliest[k];
                placed[k] = true;
                break;
            }
        }
    }
    CoreId next_free = 0;
    for (std::size_t k = 0; k < earliest.size(); ++k) {
        if (placed[k])
            continue;
        while (next_free < out.assignment.size() && out.assignment[next_free])
            ++next_free;
        if (next_free >= out.assignment.size())
            break;
        out.assignment[next_free] = earliest[k];
        auto prev = last_core(earliest[k]);
        if (prev && *prev != next_free)
            out.migrations.push_back({earliest[k], *prev, next_free});
    }
    return out;
}

} // namespace grubsim
