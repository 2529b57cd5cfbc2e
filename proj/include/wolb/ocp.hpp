#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "wolb/dopri5.hpp"
#include "wolb/equilibria.hpp"
#include "wolb/errors.hpp"
#include "wolb/model.hpp"
#include "wolb/sim.hpp"

namespace wolb::ocp {

/// Adjoint (co-state) pair (lambda1, lambda2), cost units per individual.
using Adjoint = std::array<double, 2>;

/// H = -P - u^2/2 + lambda1 f_x + lambda2 (f_y + u).
inline double hamiltonian(const StrainParams& p, const State& s, const Adjoint& adj, double u,
                          double weight_p) {
    const auto f = rhs(p, s, 0.0);
    return -weight_p - 0.5 * u * u + adj[0] * f.dx + adj[1] * (f.dy + u);
}

/// d(lambda)/dt = -dH/d(x, y) = -J^T lambda.
inline Adjoint adjoint_rhs(const StrainParams& p, const State& s, const Adjoint& adj) {
    const Jacobian j = jacobian(p, s);
    return {-(j[0][0] * adj[0] + j[1][0] * adj[1]), -(j[0][1] * adj[0] + j[1][1] * adj[1])};
}

/// u* = max(0, min(lambda2, L)).
inline double control_from_adjoint(double lambda2, double cap_l) {
    return std::clamp(lambda2, 0.0, cap_l);
}

struct OCPConfig {
    double weight_p = 1e6;
    double cap_l = 750;
    std::optional<double> terminal_x;  ///< default x_u - 1
    std::optional<double> initial_x;   ///< default ln(Q_x)/sigma
    std::size_t grid_n = 2000;
    double tol_bc = 1e-6;   ///< on |x(T) - terminal_x| (individuals)
    double tol_h = 1e-2;    ///< on |H(T)| (cost units / day)
    /// On |lambda2(T)| / L. lambda2(T) is amplified roughly e^{T/4} times the
    /// integration error, so an absolute bound is not meaningful for long horizons.
    double tol_costate = 1e-4;
    int max_outer_iterations = 300;
    double t_max = 1000;    ///< give up on reaching the target after this many days
    double rel_tol = 1e-12;
    double abs_tol = 1e-9;
};

struct ContinuousControl {
    std::vector<double> times;   ///< uniform grid on [0, t_star]
    std::vector<double> values;  ///< u*(t) at the nodes
    double t_star = 0;

    GridControl as_control() const { return {times, values}; }
};

struct Residuals {
    double terminal_x = 0;   ///< |x(T) - terminal_x|
    double hamiltonian = 0;  ///< |H(T)|
    double terminal_costate = 0;  ///< |lambda2(T)| / L
    double clamp = 0;        ///< max |u - clamp(lambda2)| over the grid
    double bracket = 0;      ///< final width of the lambda1(0) bracket
};

struct OCPSolution {
    ContinuousControl control;
    Trajectory state_traj;
    std::vector<Adjoint> adjoints;
    double objective_j = 0;
    double total_released = 0;
    double lambda1_0 = 0;
    double terminal_x = 0;
    Residuals residuals;
    int iterations = 0;
    bool converged = false;
};

/// Composite trapezoid of P + u^2/2 over the control grid.
inline double objective(const ContinuousControl& c, double weight_p) {
    double j = 0;
    for (std::size_t i = 1; i < c.times.size(); ++i) {
        const double a = weight_p + 0.5 * c.values[i - 1] * c.values[i - 1];
        const double b = weight_p + 0.5 * c.values[i] * c.values[i];
        j += 0.5 * (a + b) * (c.times[i] - c.times[i - 1]);
    }
    return j;
}

/// Composite trapezoid of u.
inline double total_released(const ContinuousControl& c) {
    double s = 0;
    for (std::size_t i = 1; i < c.times.size(); ++i)
        s += 0.5 * (c.values[i - 1] + c.values[i]) * (c.times[i] - c.times[i - 1]);
    return s;
}

namespace detail {

using Z = ode::Vec<4>;  // x, y, lambda1, lambda2

inline Z augmented_rhs(const StrainParams& p, double cap_l, const Z& z) {
    const State s{std::max(z[0], 0.0), std::max(z[1], 0.0)};
    const double u = control_from_adjoint(z[3], cap_l);
    const auto f = rhs(p, s, 0.0);
    const auto dl = adjoint_rhs(p, s, {z[2], z[3]});
    return {f.dx, f.dy + u, dl[0], dl[1]};
}

// lambda2(0) from H(0) = 0 with y(0) = 0, where H reduces to
// -P + lambda1 f_x(x0, 0) + phi(lambda2) and phi(l) = l u - u^2/2, u = clamp(l).
inline std::optional<double> initial_lambda2(double c, double cap_l) {
    if (!(c > 0)) return std::nullopt;
    if (c <= 0.5 * cap_l * cap_l) return std::sqrt(2.0 * c);
    return c / cap_l + 0.5 * cap_l;
}

struct Shot {
    bool reached = false;
    double t_hit = 0;
    Z z_hit{};
    std::vector<ode::DenseStep<4>> steps;
};

inline Shot shoot(const StrainParams& p, const OCPConfig& cfg, double x0, double target, double a,
                  bool keep_steps) {
    Shot shot;
    const double fx0 = rhs(p, {x0, 0.0}, 0.0).dx;
    const auto l2 = initial_lambda2(cfg.weight_p - a * fx0, cfg.cap_l);
    if (!l2) return shot;
    ode::StepperOptions so;
    so.rel_tol = cfg.rel_tol;
    so.abs_tol = cfg.abs_tol;
    auto f = [&](double, const Z& z) { return augmented_rhs(p, cfg.cap_l, z); };
    auto on_step = [&](const ode::DenseStep<4>& ds) {
        const Z end = ds(ds.t1());
        for (double v : end)
            if (!std::isfinite(v)) return false;
        if (end[0] > target) {
            if (keep_steps) shot.steps.push_back(ds);
            return true;
        }
        double lo = ds.t0, hi = ds.t1();
        for (int k = 0; k < 200 && hi - lo > 1e-14 * std::max(1.0, hi); ++k) {
            const double mid = 0.5 * (lo + hi);
            (ds(mid)[0] > target ? lo : hi) = mid;
        }
        shot.reached = true;
        shot.t_hit = hi;
        shot.z_hit = ds(hi);
        if (keep_steps) shot.steps.push_back(ds);
        return false;
    };
    try {
        ode::integrate<4>(f, 0.0, Z{x0, 0.0, a, *l2}, cfg.t_max, so, on_step);
    } catch (const ConvergenceError&) {
        shot.reached = false;
    }
    return shot;
}

// Shooting residual: lambda2 at the first time x reaches the target.
// Not reaching the target counts as -infinity (too little release).
inline double residual(const Shot& s) {
    return s.reached ? s.z_hit[3] : -std::numeric_limits<double>::infinity();
}

inline Z eval_steps(const std::vector<ode::DenseStep<4>>& steps, double t) {
    auto it = std::lower_bound(steps.begin(), steps.end(), t,
                               [](const ode::DenseStep<4>& s, double v) { return s.t1() < v; });
    if (it == steps.end()) --it;
    return (*it)(t);
}

}  // namespace detail

/// Solves min J = int_0^T (P + u^2/2) dt subject to the model, 0 <= u <= L,
/// x(0) = x0, y(0) = 0, x(T) = terminal_x, with T free.
///
/// Indirect shooting on the single unknown lambda1(0): lambda2(0) follows from
/// H(0) = 0 and the state/co-state system is integrated forward until x reaches
/// the target. lambda2 at that time is monotone in lambda1(0), so the root of
/// lambda2(T) = 0 is bracketed and bisected. H is a first integral of the
/// autonomous system, so H(T) = 0 holds up to integration error.
inline OCPSolution solve(const StrainParams& p, const OCPConfig& cfg) {
    if (!(cfg.weight_p > 0)) throw DomainError("weight P must be positive");
    if (!(cfg.cap_l > 0)) throw DomainError("capacity L must be positive");
    if (cfg.grid_n < 2) throw DomainError("grid_n must be at least 2");
    const auto eq = equilibria(p);
    const SecureRegion region = secure_region(eq);
    const double x_sharp = eq.ex.point.x;
    const double x0 = cfg.initial_x.value_or(x_sharp);
    const double target = cfg.terminal_x.value_or(region.x_u - 1.0);
    if (!(target > 0 && target < x_sharp)) throw DomainError("terminal_x must lie in (0, x_sharp)");
    if (!(x0 > target)) throw DomainError("initial wild population must exceed terminal_x");

    // Natural scale of lambda1: P spread over the wild population's turnover.
    const double scale = cfg.weight_p / (p.delta_n * x0);
    int iters = 0;

    double a_hi = -1e-9 * scale;
    double g_hi = detail::residual(detail::shoot(p, cfg, x0, target, a_hi, false));
    ++iters;
    if (!(g_hi > 0))
        throw InfeasibleError("terminal target x = " + std::to_string(target) +
                              " is unreachable within " + std::to_string(cfg.t_max) +
                              " days under capacity L = " + std::to_string(cfg.cap_l));
    double a_lo = -scale;
    double g_lo = detail::residual(detail::shoot(p, cfg, x0, target, a_lo, false));
    ++iters;
    while (g_lo > 0) {
        a_hi = a_lo;
        a_lo *= 2;
        g_lo = detail::residual(detail::shoot(p, cfg, x0, target, a_lo, false));
        if (++iters > cfg.max_outer_iterations)
            throw ConvergenceError("could not bracket lambda1(0)");
    }
    while (true) {
        const double mid = 0.5 * (a_lo + a_hi);
        if (mid <= a_lo || mid >= a_hi) break;
        if (++iters > cfg.max_outer_iterations)
            throw ConvergenceError("shooting did not converge in " +
                                   std::to_string(cfg.max_outer_iterations) + " iterations");
        const double g = detail::residual(detail::shoot(p, cfg, x0, target, mid, false));
        (g > 0 ? a_hi : a_lo) = mid;
    }

    // Use the reaching end of the final bracket.
    const detail::Shot best = detail::shoot(p, cfg, x0, target, a_hi, true);
    if (!best.reached) throw ConvergenceError("final shot failed to reach the target");

    OCPSolution sol;
    sol.lambda1_0 = a_hi;
    sol.terminal_x = target;
    sol.iterations = iters;
    const double t_star = best.t_hit;
    auto& c = sol.control;
    c.t_star = t_star;
    const std::size_t n = cfg.grid_n;
    c.times.resize(n);
    c.values.resize(n);
    sol.adjoints.resize(n);
    double clamp_res = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = i + 1 == n ? t_star : t_star * static_cast<double>(i) / (n - 1);
        const auto z = i + 1 == n ? best.z_hit : detail::eval_steps(best.steps, t);
        const double u = control_from_adjoint(z[3], cfg.cap_l);
        c.times[i] = t;
        c.values[i] = u;
        sol.adjoints[i] = {z[2], z[3]};
        clamp_res = std::max(clamp_res, std::abs(u - control_from_adjoint(z[3], cfg.cap_l)));
        sol.state_traj.times.push_back(t);
        sol.state_traj.states.push_back({std::max(z[0], 0.0), std::max(z[1], 0.0)});
        sol.state_traj.u_applied.push_back(u);
    }
    sol.objective_j = objective(c, cfg.weight_p);
    sol.total_released = total_released(c);

    const auto& zt = best.z_hit;
    const State st{zt[0], zt[1]};
    sol.residuals.terminal_x = std::abs(zt[0] - target);
    sol.residuals.terminal_costate = std::abs(zt[3]) / cfg.cap_l;
    sol.residuals.hamiltonian = std::abs(
        hamiltonian(p, st, {zt[2], zt[3]}, control_from_adjoint(zt[3], cfg.cap_l), cfg.weight_p));
    sol.residuals.clamp = clamp_res;
    sol.residuals.bracket = a_hi - a_lo;
    sol.converged = sol.residuals.terminal_x <= cfg.tol_bc &&
                    sol.residuals.terminal_costate <= cfg.tol_costate &&
                    sol.residuals.hamiltonian <= cfg.tol_h;
    return sol;
}

/// Hamiltonian at every grid node of a solution.
inline std::vector<double> hamiltonian_along(const StrainParams& p, const OCPSolution& s,
                                             double weight_p) {
    std::vector<double> h;
    h.reserve(s.control.times.size());
    for (std::size_t i = 0; i < s.control.times.size(); ++i)
        h.push_back(hamiltonian(p, s.state_traj.states[i], s.adjoints[i], s.control.values[i], weight_p));
    return h;
}

}  // namespace wolb::ocp
