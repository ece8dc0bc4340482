#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "grubsim/global_grub.hpp"
#include "grubsim/heuristics.hpp"
#include "grubsim/model.hpp"
#include "grubsim/random.hpp"

namespace grubsim {

/// Denominator used when snapping generated utilizations to rationals.
inline constexpr std::int64_t kUtilDenominator = 1'000'000;

/// n utilizations uniformly distributed on the simplex summing to `target`,
/// each in (0, 1). Whole vectors are resampled while any value is >= 1.
/// Values are snapped to multiples of 1e-6 by largest-remainder apportionment,
/// so the sum equals `target` exactly (target must be a multiple of 1e-6).
inline std::vector<Bandwidth> uunifast_discard(std::uint32_t n, const Bandwidth& target, Rng& rng,
                                               std::uint64_t max_discards = 100'000)
{
    if (n == 0)
        fail(ErrorKind::Config, "uunifast_discard: n must be >= 1");
    Rational scaled_target = target.value() * Rational(kUtilDenominator);
    if (!scaled_target.is_integer())
        fail(ErrorKind::Config, "uunifast_discard: target utilization must be a multiple of 1e-6");
    if (target.value() > Rational(static_cast<std::int64_t>(n)) || target.is_zero())
        fail(ErrorKind::Config, "uunifast_discard: target utilization must be in (0, n]");
    const std::int64_t units = scaled_target.floor();
    const double u_total = target.to_double();

    std::vector<double> raw(n);
    std::vector<std::int64_t> snapped(n);
    std::vector<std::pair<double, std::uint32_t>> frac(n);
    for (std::uint64_t attempt = 0; attempt <= max_discards; ++attempt) {
        double sum = u_total;
        for (std::uint32_t i = 1; i < n; ++i) {
            double next = sum * std::pow(rng.uniform01(), 1.0 / static_cast<double>(n - i));
            raw[i - 1] = sum - next;
            sum = next;
        }
        raw[n - 1] = sum;

        double total = 0.0;
        for (double v : raw)
            total += v;
        if (!(total > 0.0))
            continue;
        std::int64_t assigned = 0;
        for (std::uint32_t i = 0; i < n; ++i) {
            double exact = raw[i] * (static_cast<double>(units) / total);
            auto fl = static_cast<std::int64_t>(std::floor(exact));
            snapped[i] = fl;
            frac[i] = {exact - static_cast<double>(fl), i};
            assigned += fl;
        }
        std::int64_t deficit = units - assigned;
        if (deficit < 0 || deficit > static_cast<std::int64_t>(n))
            continue;
        std::stable_sort(frac.begin(), frac.end(),
                         [](const auto& a, const auto& b) { return a.first > b.first; });
        for (std::int64_t k = 0; k < deficit; ++k)
            ++snapped[frac[static_cast<std::size_t>(k)].second];

        bool ok = true;
        for (auto s : snapped)
            if (s <= 0 || s >= kUtilDenominator)
                ok = false;
        if (!ok)
            continue;
        std::vector<Bandwidth> out;
        out.reserve(n);
        for (auto s : snapped)
            out.emplace_back(s, kUtilDenominator);
        return out;
    }
    fail(ErrorKind::Generation, "uunifast_discard: too many consecutive discards");
}

inline constexpr Tick kExecRangeMin = 5;
inline constexpr Tick kExecRangeMax = 200;

/// (minexec, maxexec): two Unif{lo..hi} samples, sorted, never equal.
inline std::pair<Tick, Tick> gen_exec_range(Rng& rng, Tick lo = kExecRangeMin, Tick hi = kExecRangeMax)
{
    if (lo < 1 || hi <= lo)
        fail(ErrorKind::Config, "execution range needs 1 <= lo < hi");
    for (;;) {
        Tick a = rng.uniform_int(lo, hi);
        Tick b = rng.uniform_int(lo, hi);
        if (a != b)
            return {std::min(a, b), std::max(a, b)};
    }
}

/// Budget of a two-level model: the pm-quantile of the range, kept inside
/// [minexec, maxexec - 1] so the overrun band is never empty.
inline Tick two_level_budget(Tick minexec, Tick maxexec, double pm)
{
    auto b = minexec + static_cast<Tick>(std::llround(pm * static_cast<double>(maxexec - minexec)));
    return std::clamp(b, minexec, maxexec - 1);
}

inline ExecModel make_two_level_model(Tick minexec, Tick maxexec, Tick budget, double pm)
{
    if (budget < minexec || budget + 1 > maxexec)
        fail(ErrorKind::Config, "two-level model needs minexec <= B < maxexec");
    if (!(pm >= 0.0 && pm <= 1.0))
        fail(ErrorKind::Config, "two-level model needs pm in [0, 1]");
    ExecModel m;
    m.kind = ExecKind::TwoLevelUniform;
    m.minexec = minexec;
    m.maxexec = maxexec;
    m.budget = budget;
    m.pm = pm;
    return m;
}

inline double weibull_cdf(const ExecModel& m, double x)
{
    if (x <= m.weibull_location)
        return 0.0;
    return 1.0 - std::exp(-std::pow((x - m.weibull_location) / m.weibull_scale, m.weibull_shape));
}

/// Smallest integer B with CDF(B) >= pm, clamped to [minexec, maxexec].
inline Tick weibull_budget(const ExecModel& m)
{
    double q = m.weibull_location + m.weibull_scale * std::pow(-std::log(1.0 - m.pm), 1.0 / m.weibull_shape);
    auto b = static_cast<Tick>(std::ceil(q));
    while (weibull_cdf(m, static_cast<double>(b - 1)) >= m.pm)
        --b;
    while (weibull_cdf(m, static_cast<double>(b)) < m.pm)
        ++b;
    return std::clamp(b, m.minexec, m.maxexec);
}

/// TwoLevelUniform and Fixed carry B as a parameter; Weibull derives it from
/// its quantile so that about 1 - pm of the jobs overrun.
inline Tick derive_budget(const ExecModel& m)
{
    if (m.kind == ExecKind::Weibull)
        return weibull_budget(m);
    return m.budget;
}

/// Weibull model with location minexec and the scale putting the untruncated
/// median at the middle of the range, unless shape/scale/location are given.
inline ExecModel make_weibull_model(Tick minexec, Tick maxexec, double pm, double shape = 2.0,
                                    std::optional<double> scale = std::nullopt,
                                    std::optional<double> location = std::nullopt)
{
    ExecModel m;
    m.kind = ExecKind::Weibull;
    m.minexec = minexec;
    m.maxexec = maxexec;
    m.pm = pm;
    m.weibull_shape = shape;
    m.weibull_location = location.value_or(static_cast<double>(minexec));
    double mid = 0.5 * static_cast<double>(minexec + maxexec);
    m.weibull_scale = scale.value_or((mid - m.weibull_location) / std::pow(std::log(2.0), 1.0 / shape));
    m.budget = weibull_budget(m);
    return m;
}

inline Tick sample_exec_two_level(const ExecModel& m, Rng& rng)
{
    if (m.kind != ExecKind::TwoLevelUniform)
        fail(ErrorKind::Config, "sample_exec_two_level on a different model");
    if (m.budget + 1 > m.maxexec)
        fail(ErrorKind::Config, "two-level model needs B < maxexec");
    if (rng.uniform01() < m.pm)
        return rng.uniform_int(m.minexec, m.budget);
    return rng.uniform_int(m.budget + 1, m.maxexec);
}

/// Inverse-transform sample theta + lambda (-ln(1-u))^(1/k), rounded to the
/// nearest tick and resampled until it lies in [minexec, maxexec].
inline Tick sample_exec_weibull(const ExecModel& m, Rng& rng)
{
    if (m.kind != ExecKind::Weibull)
        fail(ErrorKind::Config, "sample_exec_weibull on a different model");
    for (int tries = 0; tries < 1'000'000; ++tries) {
        double u = rng.uniform01();
        double x = m.weibull_location + m.weibull_scale * std::pow(-std::log1p(-u), 1.0 / m.weibull_shape);
        auto c = static_cast<Tick>(std::llround(x));
        if (c >= m.minexec && c <= m.maxexec)
            return c;
    }
    fail(ErrorKind::Generation, "weibull sampler: truncation interval has negligible mass");
}

inline Tick sample_exec(const ExecModel& m, Rng& rng, std::uint64_t job_index)
{
    switch (m.kind) {
    case ExecKind::TwoLevelUniform: return sample_exec_two_level(m, rng);
    case ExecKind::Weibull: return sample_exec_weibull(m, rng);
    case ExecKind::Fixed:
        if (m.fixed.empty())
            fail(ErrorKind::Config, "fixed execution model without demands");
        return m.fixed[job_index % m.fixed.size()];
    }
    return 0;
}

struct DerivedPeriods {
    Tick period = 1; // task period == server period
    Tick budget = 1; // server budget Q = B
    Bandwidth util;  // exact Q / P
};

/// T = P = round(B / u) (at least 1), Q = B, U = Q / P recomputed exactly.
inline DerivedPeriods derive_periods(Tick budget, const Bandwidth& u)
{
    if (u.is_zero())
        fail(ErrorKind::Config, "derive_periods: utilization must be positive");
    Tick p = std::max<Tick>(1, (Rational(budget) / u.value()).round());
    return {p, budget, Bandwidth(budget, p)};
}

} // namespace grubsim
