#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <utility>

#include "wolb/errors.hpp"

namespace wolb::ode {

template <std::size_t N>
using Vec = std::array<double, N>;

struct StepperOptions {
    double rel_tol = 1e-8;
    double abs_tol = 1e-10;
    double max_step = std::numeric_limits<double>::infinity();
    double initial_step = 0;  ///< 0 selects a step automatically
    double min_step = 1e-13;  ///< relative to the span length
    std::size_t max_steps = 2'000'000;
};

/// One accepted step together with its 4th-order continuous extension.
template <std::size_t N>
struct DenseStep {
    double t0 = 0;
    double h = 0;  ///< signed step length
    std::array<Vec<N>, 5> coeff{};

    double t1() const { return t0 + h; }

    Vec<N> operator()(double t) const {
        const double theta = (t - t0) / h;
        const double theta1 = 1.0 - theta;
        Vec<N> out;
        for (std::size_t i = 0; i < N; ++i)
            out[i] = coeff[0][i] +
                     theta * (coeff[1][i] +
                              theta1 * (coeff[2][i] + theta * (coeff[3][i] + theta1 * coeff[4][i])));
        return out;
    }
};

namespace detail {

// Dormand-Prince 5(4) tableau with the Hairer dense-output weights.
struct Tableau {
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                            a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    static constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                            d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                            d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;
};

}  // namespace detail

/// Integrates dy/dt = f(t, y) from t0 to t1 (either direction) with an
/// adaptive Dormand-Prince 5(4) pair. `on_step(const DenseStep<N>&)` is called
/// after every accepted step; returning false stops the integration early.
/// Returns the state at the last accepted time, which is written to `t_reached`.
template <std::size_t N, class Rhs, class OnStep>
Vec<N> integrate(Rhs&& f, double t0, Vec<N> y, double t1, const StepperOptions& opt,
                 OnStep&& on_step, double* t_reached = nullptr) {
    using T = detail::Tableau;
    if (t_reached) *t_reached = t0;
    if (t1 == t0) return y;
    const double dir = t1 > t0 ? 1.0 : -1.0;
    const double span = std::abs(t1 - t0);
    const double hmax = std::min(opt.max_step, span);
    const double hmin = opt.min_step * std::max(span, 1.0);

    auto error_norm = [&](const Vec<N>& a, const Vec<N>& b, const Vec<N>& err) {
        double sum = 0;
        for (std::size_t i = 0; i < N; ++i) {
            const double sc = opt.abs_tol + opt.rel_tol * std::max(std::abs(a[i]), std::abs(b[i]));
            sum += (err[i] / sc) * (err[i] / sc);
        }
        return std::sqrt(sum / N);
    };

    double t = t0;
    Vec<N> k1 = f(t, y);

    double h = opt.initial_step;
    if (h <= 0) {
        // Hairer's starting-step heuristic.
        const double d0 = error_norm(y, y, y) + 1e-300;
        const double d1 = error_norm(y, y, k1) + 1e-300;
        double h0 = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
        h0 = std::min(h0, hmax);
        Vec<N> y1;
        for (std::size_t i = 0; i < N; ++i) y1[i] = y[i] + dir * h0 * k1[i];
        const Vec<N> f1 = f(t + dir * h0, y1);
        Vec<N> df;
        for (std::size_t i = 0; i < N; ++i) df[i] = f1[i] - k1[i];
        const double d2 = error_norm(y, y, df) / h0;
        const double h1 = std::max(d1, d2) <= 1e-15 ? std::max(1e-6, h0 * 1e-3)
                                                    : std::pow(0.01 / std::max(d1, d2), 0.2);
        h = std::min({100 * h0, h1, hmax});
    }
    h = std::min(h, hmax);

    Vec<N> k2, k3, k4, k5, k6, k7, yt, ynew, err;
    bool last_rejected = false;
    for (std::size_t step = 0; step < opt.max_steps; ++step) {
        const double remaining = std::abs(t1 - t);
        bool final_step = false;
        if (h >= remaining * (1 - 1e-12)) {
            h = remaining;
            final_step = true;
        }
        if (h < hmin && !final_step)
            throw ConvergenceError("step size underflow at t = " + std::to_string(t));
        const double hs = dir * h;

        for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + hs * T::a21 * k1[i];
        k2 = f(t + T::c2 * hs, yt);
        for (std::size_t i = 0; i < N; ++i) yt[i] = y[i] + hs * (T::a31 * k1[i] + T::a32 * k2[i]);
        k3 = f(t + T::c3 * hs, yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + hs * (T::a41 * k1[i] + T::a42 * k2[i] + T::a43 * k3[i]);
        k4 = f(t + T::c4 * hs, yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + hs * (T::a51 * k1[i] + T::a52 * k2[i] + T::a53 * k3[i] + T::a54 * k4[i]);
        k5 = f(t + T::c5 * hs, yt);
        for (std::size_t i = 0; i < N; ++i)
            yt[i] = y[i] + hs * (T::a61 * k1[i] + T::a62 * k2[i] + T::a63 * k3[i] +
                                 T::a64 * k4[i] + T::a65 * k5[i]);
        const double tnew = final_step ? t1 : t + hs;
        k6 = f(tnew, yt);
        for (std::size_t i = 0; i < N; ++i)
            ynew[i] = y[i] + hs * (T::a71 * k1[i] + T::a73 * k3[i] + T::a74 * k4[i] +
                                   T::a75 * k5[i] + T::a76 * k6[i]);
        k7 = f(tnew, ynew);
        for (std::size_t i = 0; i < N; ++i)
            err[i] = hs * (T::e1 * k1[i] + T::e3 * k3[i] + T::e4 * k4[i] + T::e5 * k5[i] +
                           T::e6 * k6[i] + T::e7 * k7[i]);

        const double en = error_norm(y, ynew, err);
        if (!std::isfinite(en)) {
            h *= 0.2;
            last_rejected = true;
            continue;
        }
        if (en > 1.0) {
            h *= std::max(0.2, 0.9 * std::pow(en, -0.2));
            last_rejected = true;
            continue;
        }

        DenseStep<N> ds;
        ds.t0 = t;
        ds.h = tnew - t;
        for (std::size_t i = 0; i < N; ++i) {
            const double diff = ynew[i] - y[i];
            const double bspl = ds.h * k1[i] - diff;
            ds.coeff[0][i] = y[i];
            ds.coeff[1][i] = diff;
            ds.coeff[2][i] = bspl;
            ds.coeff[3][i] = diff - ds.h * k7[i] - bspl;
            ds.coeff[4][i] = ds.h * (T::d1 * k1[i] + T::d3 * k3[i] + T::d4 * k4[i] +
                                     T::d5 * k5[i] + T::d6 * k6[i] + T::d7 * k7[i]);
        }
        t = tnew;
        y = ynew;
        k1 = k7;
        if (t_reached) *t_reached = t;
        if (!on_step(ds) || final_step) return y;

        double fac = en == 0 ? 10.0 : std::min(10.0, 0.9 * std::pow(en, -0.2));
        if (last_rejected) fac = std::min(fac, 1.0);
        last_rejected = false;
        h = std::min(h * fac, hmax);
    }
    throw ConvergenceError("maximum number of integration steps exceeded");
}

template <std::size_t N, class Rhs>
Vec<N> integrate(Rhs&& f, double t0, Vec<N> y, double t1, const StepperOptions& opt) {
    return integrate<N>(std::forward<Rhs>(f), t0, y, t1, opt, [](const DenseStep<N>&) { return true; });
}

}  // namespace wolb::ode
