#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "wolb/dopri5.hpp"
#include "wolb/equilibria.hpp"
#include "wolb/errors.hpp"
#include "wolb/model.hpp"

namespace wolb {

struct SimOptions {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double max_step = std::numeric_limits<double>::infinity();
    double t_end = 400;               ///< simulation horizon (days)
    double dense_output_stride = 0;   ///< > 0: sample on this uniform stride instead of at steps

    ode::StepperOptions stepper() const {
        ode::StepperOptions s;
        s.rel_tol = rel_tol;
        s.abs_tol = abs_tol;
        s.max_step = max_step;
        return s;
    }
};

// ---------------------------------------------------------------------------
// Controls

struct ZeroControl {};

/// Samples on an increasing grid, linearly interpolated and zero outside it.
struct GridControl {
    std::vector<double> times;
    std::vector<double> values;

    double operator()(double t) const {
        if (times.empty() || t < times.front() || t > times.back()) return 0.0;
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        if (it == times.end()) return values.back();
        const std::size_t i = static_cast<std::size_t>(it - times.begin());
        if (i == 0) return values.front();
        const double w = (t - times[i - 1]) / (times[i] - times[i - 1]);
        return values[i - 1] + w * (values[i] - values[i - 1]);
    }
};

/// Arbitrary rate bounded in [0, bound].
struct RateFunction {
    std::function<double(double)> rate;
    double bound = std::numeric_limits<double>::infinity();
};

using Control = std::variant<ZeroControl, GridControl, RateFunction>;

inline double control_value(const Control& c, double t) {
    return std::visit(
        [t](const auto& ctl) -> double {
            using C = std::decay_t<decltype(ctl)>;
            if constexpr (std::is_same_v<C, ZeroControl>) return 0.0;
            else if constexpr (std::is_same_v<C, GridControl>) return ctl(t);
            else {
                const double u = ctl.rate(t);
                if (!(u >= 0) || u > ctl.bound)
                    throw DomainError("release rate " + std::to_string(u) + " outside [0, bound]");
                return u;
            }
        },
        c);
}

// ---------------------------------------------------------------------------
// Trajectories and schedules

struct Jump {
    double time = 0;
    State pre;
    State post;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<State> states;
    std::vector<double> u_applied;          ///< control rate at each sample
    std::vector<Jump> jumps;
    std::vector<ode::DenseStep<2>> segments;  ///< accepted steps, chronological

    State final_state() const { return states.back(); }
};

enum class RuleTag { daily, aggregate, excess, ga, custom };

inline const char* to_string(RuleTag r) {
    switch (r) {
        case RuleTag::daily: return "daily";
        case RuleTag::aggregate: return "aggregate";
        case RuleTag::excess: return "excess";
        case RuleTag::ga: return "ga";
        case RuleTag::custom: return "custom";
    }
    return "?";
}

inline RuleTag rule_from_string(const std::string& s) {
    if (s == "daily") return RuleTag::daily;
    if (s == "aggregate") return RuleTag::aggregate;
    if (s == "excess") return RuleTag::excess;
    if (s == "ga") return RuleTag::ga;
    if (s == "custom" || s.empty()) return RuleTag::custom;
    throw ParseError("unknown rule tag '" + s + "'");
}

struct Release {
    double time = 0;        ///< day instant
    std::int64_t size = 0;  ///< individuals
};

struct ImpulseSchedule {
    std::vector<Release> entries;
    int period_m = 1;
    RuleTag rule = RuleTag::custom;

    std::int64_t total() const {
        std::int64_t s = 0;
        for (const auto& r : entries) s += r.size;
        return s;
    }
    std::size_t nonzero_count() const {
        return static_cast<std::size_t>(
            std::count_if(entries.begin(), entries.end(), [](const Release& r) { return r.size > 0; }));
    }
    /// End of the last release period, or 0 for an empty schedule.
    double horizon_end() const { return entries.empty() ? 0.0 : entries.back().time + period_m; }

    void validate() const {
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].size < 0) throw DomainError("negative release size");
            if (i > 0 && !(entries[i].time > entries[i - 1].time))
                throw DomainError("release times must be strictly increasing");
        }
    }
};

// ---------------------------------------------------------------------------
// Integration

namespace detail {

inline ode::Vec<2> model_field(const StrainParams& p, const ode::Vec<2>& z, double u) {
    const auto d = rhs(p, {std::max(z[0], 0.0), std::max(z[1], 0.0)}, u);
    return {d.dx, d.dy};
}

// Small negative values are integration noise (the field is evaluated at the
// clamped state); anything beyond the error scale of the whole population is
// reported.
inline State checked_state(const ode::Vec<2>& z, const SimOptions& opt) {
    const double slack = opt.abs_tol + opt.rel_tol * (std::abs(z[0]) + std::abs(z[1]));
    if (z[0] < -slack || z[1] < -slack)
        throw DomainError("integrator produced a negative population (" + std::to_string(z[0]) +
                          ", " + std::to_string(z[1]) + "); tolerances are too loose");
    return {std::max(z[0], 0.0), std::max(z[1], 0.0)};
}

inline void push_sample(Trajectory& tr, double t, const State& s, double u) {
    if (!tr.times.empty() && t <= tr.times.back()) {
        tr.states.back() = s;
        tr.u_applied.back() = u;
        return;
    }
    tr.times.push_back(t);
    tr.states.push_back(s);
    tr.u_applied.push_back(u);
}

// Flows a smooth piece [t0, t1] and appends steps/samples to `tr` (if given).
inline State flow_piece(const StrainParams& p, const Control& c, const State& s0, double t0,
                        double t1, const SimOptions& opt, Trajectory* tr) {
    if (t1 <= t0) return s0;
    auto f = [&](double t, const ode::Vec<2>& z) { return model_field(p, z, control_value(c, t)); };
    const double stride = opt.dense_output_stride;
    auto on_step = [&](const ode::DenseStep<2>& ds) {
        checked_state(ds(ds.t1()), opt);
        if (!tr) return true;
        tr->segments.push_back(ds);
        if (stride > 0) {
            double k = std::floor(ds.t0 / stride) + 1;
            for (double t = k * stride; t < ds.t1(); t = (++k) * stride)
                push_sample(*tr, t, checked_state(ds(t), opt), control_value(c, t));
        } else {
            const double t = ds.t1();
            push_sample(*tr, t, checked_state(ds(t), opt), control_value(c, t));
        }
        return true;
    };
    const auto z = ode::integrate<2>(f, t0, ode::Vec<2>{s0.x, s0.y}, t1, opt.stepper(), on_step);
    const State out = checked_state(z, opt);
    if (tr) push_sample(*tr, t1, out, control_value(c, t1));
    return out;
}

inline std::vector<double> breakpoints(const Control& c, double t0, double t1) {
    std::vector<double> bps{t0};
    if (const auto* g = std::get_if<GridControl>(&c)) {
        for (double t : g->times)
            if (t > t0 && t < t1) bps.push_back(t);
    }
    bps.push_back(t1);
    return bps;
}

}  // namespace detail

/// Integrates the model under a continuous control over [t0, t1].
/// Grid controls are integrated piecewise between their nodes.
inline Trajectory integrate(const StrainParams& p, const State& s0, const Control& control,
                            double t0, double t1, const SimOptions& opt = {}) {
    detail::require_nonnegative(s0);
    if (!(t1 > t0)) throw DomainError("integration span must have t1 > t0");
    Trajectory tr;
    detail::push_sample(tr, t0, s0, control_value(control, t0));
    const auto bps = detail::breakpoints(control, t0, t1);
    State s = s0;
    for (std::size_t i = 0; i + 1 < bps.size(); ++i)
        s = detail::flow_piece(p, control, s, bps[i], bps[i + 1], opt, &tr);
    return tr;
}

/// Flows with u = 0 between releases and adds each release to y instantly.
/// The run covers [0, opt.t_end].
inline Trajectory simulate_impulsive(const StrainParams& p, const State& s0,
                                     const ImpulseSchedule& sched, const SimOptions& opt = {}) {
    detail::require_nonnegative(s0);
    sched.validate();
    if (!sched.entries.empty() &&
        (sched.entries.front().time < 0 || sched.entries.back().time > opt.t_end))
        throw DomainError("release times fall outside the simulation span");
    const Control zero = ZeroControl{};
    Trajectory tr;
    detail::push_sample(tr, 0.0, s0, 0.0);
    State s = s0;
    double t = 0;
    for (const auto& r : sched.entries) {
        s = detail::flow_piece(p, zero, s, t, r.time, opt, &tr);
        t = r.time;
        const State pre = s;
        s.y += static_cast<double>(r.size);
        tr.jumps.push_back({t, pre, s});
        // Jump instants appear twice: pre-jump then post-jump state.
        tr.times.push_back(t);
        tr.states.push_back(s);
        tr.u_applied.push_back(0.0);
    }
    detail::flow_piece(p, zero, s, t, opt.t_end, opt, &tr);
    return tr;
}

/// State after flowing with zero control from t0 to t1 (no trajectory kept).
inline State propagate(const StrainParams& p, const State& s0, double t0, double t1,
                       const SimOptions& opt = {}) {
    return detail::flow_piece(p, ZeroControl{}, s0, t0, t1, opt, nullptr);
}

/// Earliest time at which x < x_u and y > y_u. Crossings inside an
/// integration step are located by bisection on the dense output.
inline std::optional<double> first_basin_entry(const Trajectory& tr, const SecureRegion& target,
                                               double resolution = 1e-6) {
    if (tr.states.empty()) return std::nullopt;
    if (target.contains(tr.states.front())) return tr.times.front();

    auto inside = [&](const ode::Vec<2>& z) { return target.contains({z[0], z[1]}); };
    std::optional<double> best;

    if (!tr.segments.empty()) {
        for (const auto& seg : tr.segments) {
            constexpr int probes = 8;
            double prev = seg.t0;
            for (int k = 1; k <= probes; ++k) {
                const double t = seg.t0 + seg.h * k / probes;
                if (inside(seg(t))) {
                    double lo = prev, hi = t;
                    while (hi - lo > resolution) {
                        const double mid = 0.5 * (lo + hi);
                        (inside(seg(mid)) ? hi : lo) = mid;
                    }
                    best = hi;
                    break;
                }
                prev = t;
            }
            if (best) break;
        }
    } else {
        for (std::size_t i = 1; i < tr.states.size(); ++i) {
            if (!target.contains(tr.states[i])) continue;
            if (tr.times[i] <= tr.times[i - 1]) {
                best = tr.times[i];
                break;
            }
            double lo = tr.times[i - 1], hi = tr.times[i];
            const State a = tr.states[i - 1], b = tr.states[i];
            auto lerp = [&](double t) {
                const double w = (t - tr.times[i - 1]) / (tr.times[i] - tr.times[i - 1]);
                return State{a.x + w * (b.x - a.x), a.y + w * (b.y - a.y)};
            };
            while (hi - lo > resolution) {
                const double mid = 0.5 * (lo + hi);
                (target.contains(lerp(mid)) ? hi : lo) = mid;
            }
            best = hi;
            break;
        }
    }
    for (const auto& j : tr.jumps) {
        if (best && j.time >= *best) break;
        if (target.contains(j.post)) {
            best = j.time;
            break;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Phase-plane tools

struct SeparatrixOptions {
    double offset = 1e-6;      ///< start offset from Eu, relative to ln(Q_y)/sigma
    double cap_factor = 1.5;   ///< stop once x + y > cap_factor * ln(Q_x)/sigma
    double max_time = 5000;    ///< backward integration length per branch (days)
    double origin_radius = 1e-3;  ///< stop near E0 (individuals)
    double rel_tol = 1e-10;
    double abs_tol = 1e-10;
};

/// Stable manifold of the saddle Eu, i.e. the boundary between the basins of
/// Ex and Es. Points run from the origin side, through Eu, outward.
inline std::vector<State> separatrix(const StrainParams& p, const SeparatrixOptions& opt = {}) {
    const auto eq = equilibria(p);
    if (!eq.eu) throw DomainError("separatrix requires the coexistence saddle Eu");
    const State eu = eq.eu->point;
    const Jacobian j = jacobian(p, eu);
    const auto [l1, l2] = eigenvalues(j);
    if (std::abs(l1.imag()) > 0 || !(l1.real() < 0 && l2.real() > 0))
        throw DomainError("Eu is not a hyperbolic saddle");
    const double ls = l1.real();
    double vx = j[0][1], vy = ls - j[0][0];
    if (std::hypot(vx, vy) < 1e-14 * (std::abs(j[0][1]) + std::abs(ls) + 1)) {
        vx = ls - j[1][1];
        vy = j[1][0];
    }
    const double norm = std::hypot(vx, vy);
    if (norm == 0) throw DomainError("degenerate eigen-decomposition at Eu");
    vx /= norm;
    vy /= norm;

    const double scale = std::log(eq.offspring.q_y) / p.sigma;
    const double cap = opt.cap_factor * std::log(eq.offspring.q_x) / p.sigma;
    ode::StepperOptions so;
    so.rel_tol = opt.rel_tol;
    so.abs_tol = opt.abs_tol;

    auto branch = [&](double sign) {
        std::vector<State> pts;
        const ode::Vec<2> z0{eu.x + sign * opt.offset * scale * vx, eu.y + sign * opt.offset * scale * vy};
        pts.push_back({z0[0], z0[1]});
        auto f = [&](double, const ode::Vec<2>& z) { return detail::model_field(p, z, 0.0); };
        auto on_step = [&](const ode::DenseStep<2>& ds) {
            const auto z = ds(ds.t1());
            if (z[0] < 0 || z[1] < 0) return false;
            pts.push_back({z[0], z[1]});
            if (z[0] + z[1] > cap) return false;
            return std::hypot(z[0], z[1]) > opt.origin_radius;
        };
        ode::integrate<2>(f, 0.0, z0, -opt.max_time, so, on_step);
        return pts;
    };

    auto a = branch(+1.0);
    auto b = branch(-1.0);
    auto dist0 = [](const std::vector<State>& v) { return std::hypot(v.back().x, v.back().y); };
    if (dist0(a) > dist0(b)) std::swap(a, b);  // a ends near the origin
    std::vector<State> out(a.rbegin(), a.rend());
    out.push_back(eu);
    out.insert(out.end(), b.begin(), b.end());
    return out;
}

/// Height of a polyline at abscissa x (first crossing), if any.
inline std::optional<double> polyline_height_at(const std::vector<State>& curve, double x) {
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const State a = curve[i - 1], b = curve[i];
        if ((a.x - x) * (b.x - x) <= 0 && a.x != b.x) {
            const double w = (x - a.x) / (b.x - a.x);
            return a.y + w * (b.y - a.y);
        }
    }
    return std::nullopt;
}

struct GridSpec {
    double x_min = 0, x_max = 0;
    std::size_t nx = 0;
    double y_min = 0, y_max = 0;
    std::size_t ny = 0;
};

struct PhaseSample {
    double x = 0, y = 0, dx = 0, dy = 0;
};

/// The zero-control vector field on a uniform nx * ny grid (x varies fastest).
inline std::vector<PhaseSample> phase_field(const StrainParams& p, const GridSpec& g) {
    if (g.x_min < 0 || g.y_min < 0 || g.nx == 0 || g.ny == 0)
        throw DomainError("phase grid must lie in the positive quadrant and be non-empty");
    auto axis = [](double lo, double hi, std::size_t n, std::size_t i) {
        return n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    };
    std::vector<PhaseSample> out;
    out.reserve(g.nx * g.ny);
    for (std::size_t j = 0; j < g.ny; ++j)
        for (std::size_t i = 0; i < g.nx; ++i) {
            const State s{axis(g.x_min, g.x_max, g.nx, i), axis(g.y_min, g.y_max, g.ny, j)};
            const auto d = rhs(p, s, 0.0);
            out.push_back({s.x, s.y, d.dx, d.dy});
        }
    return out;
}

}  // namespace wolb
