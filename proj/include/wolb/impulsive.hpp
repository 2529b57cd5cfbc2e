#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "wolb/equilibria.hpp"
#include "wolb/errors.hpp"
#include "wolb/ocp.hpp"
#include "wolb/sim.hpp"

namespace wolb::impulsive {

struct DailyImpulseSequence {
    std::vector<double> window_totals;        ///< U*_n, exact integral over [n-1, n]
    std::vector<double> trapezoid_estimates;  ///< (u(n-1) + u(n)) / 2
    std::vector<std::int64_t> sizes;          ///< released at t = n
    int t_hat = 0;                            ///< ceil(T*)

    std::int64_t total() const {
        std::int64_t s = 0;
        for (auto v : sizes) s += v;
        return s;
    }
};

struct PeriodicImpulseSequence {
    int period_m = 1;
    std::vector<std::int64_t> sizes;  ///< released at t = 1 + (i-1) m
    RuleTag rule = RuleTag::aggregate;

    std::int64_t total() const {
        std::int64_t s = 0;
        for (auto v : sizes) s += v;
        return s;
    }
};

namespace detail {

// The control extended by zero outside its grid is piecewise linear, so window
// integrals and maxima are computed exactly rather than by quadrature.
inline double pl_value(const ocp::ContinuousControl& c, double t) {
    return GridControl{c.times, c.values}(t);
}

inline double pl_integral(const ocp::ContinuousControl& c, double a, double b) {
    double s = 0;
    for (std::size_t i = 1; i < c.times.size(); ++i) {
        const double t0 = c.times[i - 1], t1 = c.times[i];
        const double lo = std::max(a, t0), hi = std::min(b, t1);
        if (hi <= lo) continue;
        auto at = [&](double t) {
            const double w = (t - t0) / (t1 - t0);
            return c.values[i - 1] + w * (c.values[i] - c.values[i - 1]);
        };
        s += 0.5 * (at(lo) + at(hi)) * (hi - lo);
    }
    return s;
}

inline double pl_max(const ocp::ContinuousControl& c, double a, double b) {
    double m = std::max(pl_value(c, a), pl_value(c, b));
    for (std::size_t i = 0; i < c.times.size(); ++i)
        if (c.times[i] >= a && c.times[i] <= b) m = std::max(m, c.values[i]);
    return m;
}

inline std::int64_t ceil_size(double v) { return static_cast<std::int64_t>(std::ceil(v)); }

inline int horizon_days(const ocp::ContinuousControl& c) {
    if (!(c.t_star > 0)) throw DomainError("control has no positive horizon");
    return static_cast<int>(std::ceil(c.t_star));
}

inline void require_period(int m) {
    if (m < 1) throw DomainError("release period must be at least one day");
}

inline int block_count(int t_hat, int m) { return (t_hat + m - 1) / m; }

}  // namespace detail

/// U*_n over the unit windows [n-1, n], n = 1..ceil(T*).
inline std::vector<double> daily_window_totals(const ocp::ContinuousControl& c) {
    const int n = detail::horizon_days(c);
    std::vector<double> out;
    out.reserve(n);
    for (int k = 1; k <= n; ++k) out.push_back(detail::pl_integral(c, k - 1, k));
    return out;
}

/// Daily sizes: ceil of the trapezoid estimate when it does not undershoot the
/// window total, otherwise ceil of the window maximum.
inline DailyImpulseSequence daily_impulses(const ocp::ContinuousControl& c) {
    DailyImpulseSequence d;
    d.t_hat = detail::horizon_days(c);
    d.window_totals = daily_window_totals(c);
    for (int n = 1; n <= d.t_hat; ++n) {
        const double tr = 0.5 * (detail::pl_value(c, n) + detail::pl_value(c, n - 1));
        d.trapezoid_estimates.push_back(tr);
        double& exact = d.window_totals[n - 1];
        // Equal up to rounding (e.g. on linear stretches): keep the trapezoid value.
        if (std::abs(exact - tr) <= 1e-12 * std::max(1.0, std::abs(tr))) exact = tr;
        d.sizes.push_back(exact <= tr ? detail::ceil_size(tr)
                                      : detail::ceil_size(detail::pl_max(c, n - 1, n)));
    }
    return d;
}

/// Sums daily sizes over blocks of days (i-1)m+1 .. im. The last block may be
/// partial so that every daily release is accounted for.
inline PeriodicImpulseSequence aggregate_periodic(const DailyImpulseSequence& d, int m) {
    detail::require_period(m);
    PeriodicImpulseSequence out{m, {}, RuleTag::aggregate};
    const int blocks = detail::block_count(d.t_hat, m);
    for (int i = 0; i < blocks; ++i) {
        std::int64_t s = 0;
        for (int n = i * m; n < std::min((i + 1) * m, d.t_hat); ++n) s += d.sizes[n];
        out.sizes.push_back(s);
    }
    return out;
}

/// m * ceil(max u) over each block window [(i-1)m, im].
inline PeriodicImpulseSequence excess_periodic(const ocp::ContinuousControl& c, int m) {
    detail::require_period(m);
    PeriodicImpulseSequence out{m, {}, RuleTag::excess};
    const int blocks = detail::block_count(detail::horizon_days(c), m);
    for (int i = 0; i < blocks; ++i)
        out.sizes.push_back(m * detail::ceil_size(detail::pl_max(c, i * m, (i + 1) * m)));
    return out;
}

inline ImpulseSchedule to_schedule(const DailyImpulseSequence& d) {
    ImpulseSchedule s;
    s.period_m = 1;
    s.rule = RuleTag::daily;
    for (int n = 1; n <= d.t_hat; ++n) s.entries.push_back({static_cast<double>(n), d.sizes[n - 1]});
    return s;
}

inline ImpulseSchedule to_schedule(const PeriodicImpulseSequence& p) {
    ImpulseSchedule s;
    s.period_m = p.period_m;
    s.rule = p.rule;
    for (std::size_t i = 0; i < p.sizes.size(); ++i)
        s.entries.push_back({1.0 + static_cast<double>(i) * p.period_m, p.sizes[i]});
    return s;
}

struct EvaluateOptions {
    std::optional<double> initial_x;  ///< default ln(Q_x)/sigma
    SimOptions sim;
};

struct IndicatorReport {
    std::size_t num_releases = 0;  ///< nonzero releases
    std::int64_t overall_size = 0;
    std::optional<double> basin_entry_time;
    double deadline = 0;  ///< entry must happen no later than this
    bool feasible = false;
};

/// Simulates the schedule from (x0, 0). A schedule is feasible when the state
/// enters the secure region no later than one period after its last release.
inline IndicatorReport evaluate_schedule(const StrainParams& p, const ImpulseSchedule& sched,
                                         const SecureRegion& target, const EvaluateOptions& opt = {}) {
    IndicatorReport r;
    r.num_releases = sched.nonzero_count();
    r.overall_size = sched.total();
    r.deadline = sched.horizon_end();
    const double x0 = opt.initial_x.value_or(wild_carrying_level(p));
    SimOptions so = opt.sim;
    so.t_end = std::max(so.t_end, r.deadline);
    const auto tr = simulate_impulsive(p, {x0, 0.0}, sched, so);
    r.basin_entry_time = first_basin_entry(tr, target);
    r.feasible = r.basin_entry_time && !sched.entries.empty() && *r.basin_entry_time <= r.deadline;
    return r;
}

struct RuleChoice {
    PeriodicImpulseSequence sequence;
    IndicatorReport report;
};

/// Tries the aggregate rule first and falls back to the excess rule.
/// Throws InfeasibleError when neither schedule is feasible.
inline RuleChoice select_rule(const StrainParams& p, const ocp::ContinuousControl& c, int m,
                              const SecureRegion& target, const EvaluateOptions& opt = {}) {
    const auto agg = aggregate_periodic(daily_impulses(c), m);
    auto rep = evaluate_schedule(p, to_schedule(agg), target, opt);
    if (rep.feasible) return {agg, rep};
    const auto exc = excess_periodic(c, m);
    rep = evaluate_schedule(p, to_schedule(exc), target, opt);
    if (rep.feasible) return {exc, rep};
    throw InfeasibleError("neither the aggregate nor the excess rule yields a feasible " +
                          std::to_string(m) + "-day schedule");
}

}  // namespace wolb::impulsive
