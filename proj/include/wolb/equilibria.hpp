#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <utility>

#include "wolb/errors.hpp"
#include "wolb/model.hpp"
#include "wolb/params.hpp"

namespace wolb {

enum class Stability { repeller, attractor, saddle, degenerate };

inline const char* to_string(Stability s) {
    switch (s) {
        case Stability::repeller: return "repeller";
        case Stability::attractor: return "attractor";
        case Stability::saddle: return "saddle";
        case Stability::degenerate: return "degenerate";
    }
    return "?";
}

/// Eigenvalues of a real 2x2 matrix (possibly a complex pair).
inline std::pair<std::complex<double>, std::complex<double>> eigenvalues(const Jacobian& j) {
    const double tr = j[0][0] + j[1][1];
    const double det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    const std::complex<double> root = std::sqrt(std::complex<double>(tr * tr / 4.0 - det, 0.0));
    return {tr / 2.0 - root, tr / 2.0 + root};
}

/// Classifies by the sign of the real parts; |Re| <= tol counts as zero.
inline Stability classify(const Jacobian& j, double tol = 1e-9) {
    const auto [a, b] = eigenvalues(j);
    const double ra = a.real(), rb = b.real();
    if (std::abs(ra) <= tol || std::abs(rb) <= tol) return Stability::degenerate;
    if (ra > 0 && rb > 0) return Stability::repeller;
    if (ra < 0 && rb < 0) return Stability::attractor;
    return Stability::saddle;
}

struct Equilibrium {
    State point;
    Stability stability = Stability::degenerate;
};

struct EquilibriumSet {
    Equilibrium e0;                 ///< extinction
    Equilibrium ex;                 ///< wild-only, x = ln(Q_x)/sigma
    std::optional<Equilibrium> eu;  ///< coexistence saddle
    std::optional<Equilibrium> es;  ///< stable coexistence
    std::optional<Equilibrium> ey;  ///< infected-only (nu = 1, omega = 0)
    bool collision = false;         ///< eu and es coincide (pitchfork)
    OffspringNumbers offspring;
};

/// Both coexistence conditions: Q_c > 1 and Q_y - Q_yx - 2 sqrt(Q_yx (Q_x - Q_y)) > 0.
inline bool coexistence_exists(const OffspringNumbers& q) {
    return q.q_c > 1.0 && q.q_y - q.q_yx - 2.0 * std::sqrt(q.q_yx * (q.q_x - q.q_y)) > 0.0;
}

inline EquilibriumSet equilibria(const StrainParams& p) {
    p.validate();
    const OffspringNumbers q = offspring_numbers(p);
    if (!q.viable)
        throw DomainError("strain '" + p.name + "' is not viable: need Q_x > Q_y > 1");

    auto make = [&p](State s) { return Equilibrium{s, classify(jacobian(p, s))}; };

    EquilibriumSet set;
    set.offspring = q;
    set.e0 = make({0, 0});
    set.ex = make({std::log(q.q_x) / p.sigma, 0});

    if (coexistence_exists(q)) {
        const double sum = std::log(q.q_y) / p.sigma;
        const double scale = std::log(q.q_y) / (2.0 * p.eta * p.sigma);
        const double disc = (q.q_c - 1.0) * (q.q_c - 1.0) - 4.0 * p.eta * q.q_yx / q.q_x;
        const double root = std::sqrt(std::max(disc, 0.0));
        set.collision = disc <= 1e-12 * (q.q_c - 1.0) * (q.q_c - 1.0);
        const double xu = scale * ((q.q_c - 1.0) + root);
        const double xs = std::max(scale * ((q.q_c - 1.0) - root), 0.0);
        set.eu = make({xu, sum - xu});
        set.es = make({xs, sum - xs});
    }
    if (p.nu == 1.0 && p.omega == 0.0 && (q.q_x - q.q_y) / q.q_x < p.eta)
        set.ey = make({0, std::log(q.q_y) / p.sigma});
    return set;
}

/// Thresholds of the secure region: x < x_u and y > y_u.
struct SecureRegion {
    double x_u = 0;
    double y_u = 0;

    bool contains(const State& s) const { return s.x < x_u && s.y > y_u; }
};

inline SecureRegion secure_region(const EquilibriumSet& eq) {
    if (!eq.eu) throw DomainError("no coexistence equilibria: secure region undefined");
    return {eq.eu->point.x, eq.eu->point.y};
}

}  // namespace wolb
