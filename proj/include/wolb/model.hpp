#pragma once

#include <array>
#include <cmath>

#include "wolb/errors.hpp"
#include "wolb/params.hpp"

namespace wolb {

/// Population sizes (individuals).
struct State {
    double x = 0;  ///< wild
    double y = 0;  ///< Wolbachia-infected

    friend bool operator==(const State&, const State&) = default;
};

/// Time derivative of a State (individuals / day).
struct Derivative {
    double dx = 0;
    double dy = 0;
};

/// Row-major 2x2 matrix of partial derivatives: {{dfx/dx, dfx/dy}, {dfy/dx, dfy/dy}}.
using Jacobian = std::array<std::array<double, 2>, 2>;

namespace detail {

inline void require_nonnegative(const State& s) {
    if (!(s.x >= 0) || !(s.y >= 0))
        throw DomainError("negative population state (" + std::to_string(s.x) + ", " +
                          std::to_string(s.y) + ")");
}

// x (x + (1-eta) y) / (x + y), extended by 0 at the origin.
inline double frequency_term(double x, double y, double eta) {
    const double total = x + y;
    if (total <= 0) return 0;
    return x - eta * x * y / total;
}

}  // namespace detail

/// Right-hand side of the model with release rate u. The u-free parts are
/// f_x and f_y in `rhs(p, s, 0)`.
inline Derivative rhs(const StrainParams& p, const State& s, double u = 0) {
    detail::require_nonnegative(s);
    if (!(u >= 0)) throw DomainError("negative release rate");
    const double e = std::exp(-p.sigma * (s.x + s.y));
    const double g = detail::frequency_term(s.x, s.y, p.eta);
    return {(p.rho_n * g + (1.0 - p.nu) * p.rho_w * s.y) * e + p.omega * s.y - p.delta_n * s.x,
            p.nu * p.rho_w * s.y * e - (p.omega + p.delta_w) * s.y + u};
}

/// Analytic partial derivatives of the u-free right-hand side.
///
/// The frequency term is homogeneous of degree one and has no derivative at
/// the origin; there the limit along the wild axis (y -> 0+) is used, which
/// makes the origin an unstable node whenever both offspring numbers exceed 1.
inline Jacobian jacobian(const StrainParams& p, const State& s) {
    detail::require_nonnegative(s);
    const double total = s.x + s.y;
    const double e = std::exp(-p.sigma * total);
    double dg_dx = 1.0;
    double dg_dy = -p.eta;
    if (total > 0) {
        const double inv2 = 1.0 / (total * total);
        dg_dx = 1.0 - p.eta * s.y * s.y * inv2;
        dg_dy = -p.eta * s.x * s.x * inv2;
    }
    const double births_x = (p.rho_n * detail::frequency_term(s.x, s.y, p.eta) +
                             (1.0 - p.nu) * p.rho_w * s.y) * e;
    const double births_y = p.nu * p.rho_w * e;
    Jacobian j{};
    j[0][0] = p.rho_n * dg_dx * e - p.sigma * births_x - p.delta_n;
    j[0][1] = (p.rho_n * dg_dy + (1.0 - p.nu) * p.rho_w) * e - p.sigma * births_x + p.omega;
    j[1][0] = -p.sigma * births_y * s.y;
    j[1][1] = births_y * (1.0 - p.sigma * s.y) - p.omega - p.delta_w;
    return j;
}

}  // namespace wolb
