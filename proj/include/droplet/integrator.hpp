#pragma once

// Dormand-Prince 5(4) with step-size control and quartic dense output,
// templated on the state dimension. The observer sees every accepted step as a
// dense_step and may stop the integration by returning false.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <limits>
#include <utility>

namespace droplet {

template <std::size_t N>
using state = std::array<double, N>;

struct step_control {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_init = 0.0;          // 0: automatic
    double h_min_rel = 1e-14;     // step underflow threshold, relative to |x|
    long max_steps = 2'000'000;
};

enum class integration_status {
    completed,      // reached x_end
    stopped,        // observer requested stop
    step_underflow, // error control drove h below h_min
    non_finite,     // right-hand side produced inf/nan at an accepted point
    too_many_steps,
};

template <std::size_t N>
struct dense_step {
    double x0;
    double h;
    state<N> y0;
    state<N> y1;
    std::array<state<N>, 5> rcont;

    double x1() const noexcept { return x0 + h; }

    state<N> operator()(double x) const noexcept
    {
        const double th = (x - x0) / h;
        const double th1 = 1.0 - th;
        state<N> y{};
        for (std::size_t i = 0; i < N; ++i) {
            y[i] = rcont[0][i]
                   + th * (rcont[1][i] + th1 * (rcont[2][i] + th * (rcont[3][i] + th1 * rcont[4][i])));
        }
        return y;
    }
};

template <std::size_t N>
struct integration_result {
    integration_status status;
    double x;
    state<N> y;
    long steps;
    long rejected;
};

namespace detail {

template <std::size_t N>
bool all_finite(const state<N>& v) noexcept
{
    return std::all_of(v.begin(), v.end(), [](double d) { return std::isfinite(d); });
}

template <std::size_t N>
double error_norm(const state<N>& err, const state<N>& y0, const state<N>& y1, const step_control& c) noexcept
{
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double sc = c.atol + c.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        const double r = err[i] / sc;
        s += r * r;
    }
    return std::sqrt(s / N);
}

// Initial step guess after Hairer, Norsett & Wanner.
template <std::size_t N, class Rhs>
double initial_step(Rhs& f, double x0, const state<N>& y0, const state<N>& f0, double dir,
                    double span, const step_control& c)
{
    double d0 = 0.0, d1 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double sc = c.atol + c.rtol * std::abs(y0[i]);
        d0 += (y0[i] / sc) * (y0[i] / sc);
        d1 += (f0[i] / sc) * (f0[i] / sc);
    }
    d0 = std::sqrt(d0 / N);
    d1 = std::sqrt(d1 / N);
    double h0 = (d0 < 1e-10 || d1 < 1e-10) ? 1e-6 : 0.01 * d0 / d1;
    h0 = std::min(h0, span);
    state<N> y1{};
    for (std::size_t i = 0; i < N; ++i) {
        y1[i] = y0[i] + dir * h0 * f0[i];
    }
    const state<N> f1 = f(x0 + dir * h0, y1);
    double d2 = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
        const double sc = c.atol + c.rtol * std::abs(y0[i]);
        d2 += ((f1[i] - f0[i]) / sc) * ((f1[i] - f0[i]) / sc);
    }
    d2 = std::isfinite(d2) ? std::sqrt(d2 / N) / h0 : std::numeric_limits<double>::infinity();
    const double dm = std::max(d1, d2);
    const double h1 = dm <= 1e-15 ? std::max(1e-6, h0 * 1e-3) : std::pow(0.01 / dm, 0.2);
    return std::min({100.0 * h0, h1, span});
}

} // namespace detail

template <std::size_t N, class Rhs, class Observer>
integration_result<N> integrate_dopri5(Rhs&& f, double x0, state<N> y0, double x_end,
                                       const step_control& c, Observer&& on_step)
{
    constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr double a21 = 1.0 / 5;
    constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
    constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                     a65 = -5103.0 / 18656;
    constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784,
                     a76 = 11.0 / 84;
    constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                     e6 = 22.0 / 525, e7 = -1.0 / 40;
    constexpr double d1 = -12715105075.0 / 11282082432.0, d3 = 87487479700.0 / 32700410799.0,
                     d4 = -10690763975.0 / 1880347072.0, d5 = 701980252875.0 / 199316789632.0,
                     d6 = -1453857185.0 / 822651844.0, d7 = 69997945.0 / 29380423.0;

    integration_result<N> res{integration_status::completed, x0, y0, 0, 0};
    const double span = std::abs(x_end - x0);
    if (span == 0.0) {
        return res;
    }
    const double dir = x_end > x0 ? 1.0 : -1.0;

    state<N> k1 = f(x0, y0);
    if (!detail::all_finite(k1)) {
        res.status = integration_status::non_finite;
        return res;
    }
    double h = c.h_init > 0.0 ? std::min(c.h_init, span) : detail::initial_step<N>(f, x0, y0, k1, dir, span, c);
    double x = x0;
    state<N> y = y0;
    bool last_rejected = false;

    auto combo = [&](const state<N>& base, double hh, std::initializer_list<std::pair<double, const state<N>*>> ks) {
        state<N> out = base;
        for (const auto& [w, k] : ks) {
            if (w == 0.0) {
                continue;
            }
            for (std::size_t i = 0; i < N; ++i) {
                out[i] += hh * w * (*k)[i];
            }
        }
        return out;
    };

    while (true) {
        if (res.steps + res.rejected >= c.max_steps) {
            res.status = integration_status::too_many_steps;
            break;
        }
        const double remaining = std::abs(x_end - x);
        bool final_step = false;
        if (h >= remaining * (1.0 - 1e-13)) {
            h = remaining;
            final_step = true;
        }
        if (h < c.h_min_rel * std::max(1.0, std::abs(x))) {
            res.status = integration_status::step_underflow;
            break;
        }
        const double hs = dir * h;
        const state<N> k2 = f(x + c2 * hs, combo(y, hs, {{a21, &k1}}));
        const state<N> k3 = f(x + c3 * hs, combo(y, hs, {{a31, &k1}, {a32, &k2}}));
        const state<N> k4 = f(x + c4 * hs, combo(y, hs, {{a41, &k1}, {a42, &k2}, {a43, &k3}}));
        const state<N> k5 = f(x + c5 * hs, combo(y, hs, {{a51, &k1}, {a52, &k2}, {a53, &k3}, {a54, &k4}}));
        const state<N> k6 =
            f(x + hs, combo(y, hs, {{a61, &k1}, {a62, &k2}, {a63, &k3}, {a64, &k4}, {a65, &k5}}));
        const state<N> y_new =
            combo(y, hs, {{a71, &k1}, {a73, &k3}, {a74, &k4}, {a75, &k5}, {a76, &k6}});
        const double x_new = final_step ? x_end : x + hs;
        const state<N> k7 = f(x_new, y_new);

        state<N> err{};
        for (std::size_t i = 0; i < N; ++i) {
            err[i] = hs * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
        }
        double en = detail::error_norm<N>(err, y, y_new, c);
        const bool finite = detail::all_finite(y_new) && detail::all_finite(k7) && std::isfinite(en);
        if (!finite) {
            en = std::numeric_limits<double>::infinity();
        }

        if (en <= 1.0) {
            dense_step<N> ds{x, hs, y, y_new, {}};
            for (std::size_t i = 0; i < N; ++i) {
                const double dy = y_new[i] - y[i];
                const double bspl = hs * k1[i] - dy;
                ds.rcont[0][i] = y[i];
                ds.rcont[1][i] = dy;
                ds.rcont[2][i] = bspl;
                ds.rcont[3][i] = dy - hs * k7[i] - bspl;
                ds.rcont[4][i] = hs * (d1 * k1[i] + d3 * k3[i] + d4 * k4[i] + d5 * k5[i] + d6 * k6[i]
                                       + d7 * k7[i]);
            }
            ++res.steps;
            x = x_new;
            y = y_new;
            k1 = k7;
            res.x = x;
            res.y = y;
            if (!on_step(static_cast<const dense_step<N>&>(ds))) {
                res.status = integration_status::stopped;
                break;
            }
            if (final_step) {
                res.status = integration_status::completed;
                break;
            }
            double fac = 0.9 * std::pow(std::max(en, 1e-10), -0.2);
            fac = std::clamp(fac, 0.2, 10.0);
            if (last_rejected) {
                fac = std::min(fac, 1.0);
            }
            h *= fac;
            last_rejected = false;
        } else {
            ++res.rejected;
            const double fac = std::isfinite(en) ? std::clamp(0.9 * std::pow(en, -0.2), 0.1, 0.9) : 0.1;
            h *= fac;
            last_rejected = true;
        }
    }
    return res;
}

template <std::size_t N, class Rhs>
integration_result<N> integrate_dopri5(Rhs&& f, double x0, state<N> y0, double x_end, const step_control& c)
{
    return integrate_dopri5<N>(std::forward<Rhs>(f), x0, y0, x_end, c, [](const dense_step<N>&) { return true; });
}

} // namespace droplet
