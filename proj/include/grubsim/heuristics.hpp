#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "grubsim/model.hpp"

namespace grubsim {

enum class Heuristic { FirstFit, BestFit, WorstFit };

inline const char* to_string(Heuristic h)
{
    switch (h) {
    case Heuristic::FirstFit: return "ff";
    case Heuristic::BestFit: return "bf";
    case Heuristic::WorstFit: return "wf";
    }
    return "?";
}

inline std::optional<Heuristic> parse_heuristic(std::string_view s)
{
    if (s == "ff" || s == "FF" || s == "first_fit")
        return Heuristic::FirstFit;
    if (s == "bf" || s == "BF" || s == "best_fit")
        return Heuristic::BestFit;
    if (s == "wf" || s == "WF" || s == "worst_fit")
        return Heuristic::WorstFit;
    return std::nullopt;
}

struct CoreCandidate {
    CoreId core = 0;
    Rational residual; // spare capacity left for the incoming server
};

/// Bin-packing choice among cores that can host `u`. Ties go to the lowest
/// core id. Returns nothing when no candidate fits.
inline std::optional<CoreId> select_core_heuristic(const std::vector<CoreCandidate>& candidates,
                                                   const Bandwidth& u, Heuristic h)
{
    const CoreCandidate* best = nullptr;
    for (const auto& c : candidates) {
        if (c.residual < u.value())
            continue;
        if (!best) {
            best = &c;
            continue;
        }
        switch (h) {
        case Heuristic::FirstFit:
            if (c.core < best->core)
                best = &c;
            break;
        case Heuristic::BestFit:
            if (c.residual < best->residual || (c.residual == best->residual && c.core < best->core))
                best = &c;
            break;
        case Heuristic::WorstFit:
            if (c.residual > best->residual || (c.residual == best->residual && c.core < best->core))
                best = &c;
            break;
        }
    }
    if (!best)
        return std::nullopt;
    return best->core;
}

/// Static partitioning of servers (in the given order) onto m cores with
/// per-core capacity 1. Returns the core of each server, or nothing if some
/// server does not fit.
inline std::optional<std::vector<CoreId>> partition(const std::vector<Bandwidth>& utils, std::uint32_t m,
                                                    Heuristic h)
{
    std::vector<Rational> load(m);
    std::vector<CoreId> where;
    where.reserve(utils.size());
    std::vector<CoreCandidate> cands(m);
    for (const auto& u : utils) {
        for (CoreId j = 0; j < m; ++j)
            cands[j] = {j, residual(load[j])};
        auto core = select_core_heuristic(cands, u, h);
        if (!core)
            return std::nullopt;
        load[*core] += u.value();
        where.push_back(*core);
    }
    return where;
}

} // namespace grubsim
