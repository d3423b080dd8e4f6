#pragma once

// Continuation of the series profile from the handoff point to x = 1 and the
// two-parameter shooting: b for H'(1) = 0, then mu for the mass condition.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "droplet/error.hpp"
#include "droplet/integrator.hpp"
#include "droplet/local_expansion.hpp"
#include "droplet/params.hpp"

namespace droplet {

struct profile_state {
    double x;
    double h;
    double h1;
    double h2;
    double mass; // integral of H from the handoff point to x
};

enum class outcome_kind { reached_one, touched_down, derivative_vanished, blew_up };

constexpr const char* to_string(outcome_kind k) noexcept
{
    switch (k) {
    case outcome_kind::reached_one: return "reached_one";
    case outcome_kind::touched_down: return "touched_down";
    case outcome_kind::derivative_vanished: return "derivative_vanished";
    case outcome_kind::blew_up: return "blew_up";
    }
    return "unknown";
}

enum class stop_mode {
    detect_critical, // halt at the first zero of H' or at touchdown
    to_end,          // only touchdown or blow-up halt the integration
};

using profile_step = dense_step<4>;

struct integration_outcome {
    outcome_kind kind;
    profile_state state;
    std::vector<profile_step> trace; // accepted steps, filled on request
};

struct shooter_options {
    step_control ode{};
    double h_floor = 1e-12;
    double deriv_tol = 1e-12;
    double blowup_level = 1e12;
    handoff_options handoff{};
    double shoot_tol = 1e-8;
    double b_max = 1e8;
    int max_iter = 300;
    double mass_tol = 1e-8;
    double mu_max = 1e12;
    double mu_min = 1e-12;
};

// Right-hand side of (H, H', H'', mass)' for H''' = (x - 1) H^{1-n} + mu H^2 H'.
inline state<4> profile_rhs(const params& p, double mu, double x, const state<4>& y)
{
    if (!(y[0] > 0.0)) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        return {nan, nan, nan, nan};
    }
    return {y[1], y[2], (x - 1.0) * std::pow(y[0], 1.0 - p.n) + mu * y[0] * y[0] * y[1], y[0]};
}

namespace detail {

// Bisection for the first sign change of g on the dense output of one step; g(x0) > 0 >= g(x1).
template <class G>
double locate_crossing(const profile_step& ds, G&& g, double tol)
{
    double lo = ds.x0;
    double hi = ds.x1();
    if (lo > hi) {
        std::swap(lo, hi);
    }
    double best = hi;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        const double v = g(ds(mid));
        if (v > 0.0) {
            lo = mid;
        } else {
            hi = mid;
            best = mid;
        }
        if (std::abs(v) <= tol) {
            best = mid;
            break;
        }
    }
    return best;
}

} // namespace detail

inline integration_outcome integrate_profile(const params& p, const handoff_state& start, double mu, stop_mode mode,
                                             const shooter_options& opt = {}, bool keep_trace = false)
{
    if (!(start.h > 0.0) || !(start.x_hat > 0.0 && start.x_hat < 1.0)) {
        throw error(error_kind::usage, "profile integration needs H > 0 and a start point in (0, 1)");
    }
    integration_outcome out{outcome_kind::reached_one, {start.x_hat, start.h, start.h1, start.h2, 0.0}, {}};
    auto set_state = [&](double x, const state<4>& y) { out.state = {x, y[0], y[1], y[2], y[3]}; };

    bool event = false;
    auto observer = [&](const profile_step& ds) {
        if (keep_trace) {
            out.trace.push_back(ds);
        }
        if (!std::all_of(ds.y1.begin(), ds.y1.end(), [](double v) { return std::isfinite(v); })
            || std::abs(ds.y1[0]) > opt.blowup_level || std::abs(ds.y1[1]) > opt.blowup_level
            || std::abs(ds.y1[2]) > opt.blowup_level) {
            out.kind = outcome_kind::blew_up;
            set_state(ds.x1(), ds.y1);
            event = true;
            return false;
        }
        if (mode == stop_mode::detect_critical && ds.y0[1] > 0.0 && ds.y1[1] <= 0.0) {
            const double xc = detail::locate_crossing(ds, [](const state<4>& y) { return y[1]; }, opt.deriv_tol);
            out.kind = outcome_kind::derivative_vanished;
            set_state(xc, ds(xc));
            event = true;
            return false;
        }
        if (ds.y1[0] <= opt.h_floor) {
            const double xt = detail::locate_crossing(
                ds, [&](const state<4>& y) { return y[0] - opt.h_floor; }, opt.h_floor * 1e-3);
            out.kind = outcome_kind::touched_down;
            set_state(xt, ds(xt));
            event = true;
            return false;
        }
        return true;
    };

    const auto rhs = [&](double x, const state<4>& y) { return profile_rhs(p, mu, x, y); };
    const state<4> y0{start.h, start.h1, start.h2, 0.0};
    const auto res = integrate_dopri5<4>(rhs, start.x_hat, y0, 1.0, opt.ode, observer);
    if (event) {
        return out;
    }
    set_state(res.x, res.y);
    switch (res.status) {
    case integration_status::completed:
        out.kind = outcome_kind::reached_one;
        out.state.x = 1.0;
        break;
    default:
        out.kind = res.y[0] <= opt.h_floor ? outcome_kind::touched_down : outcome_kind::blew_up;
        break;
    }
    return out;
}

struct trajectory {
    double b;
    double mu;
    handoff_state handoff;
    integration_outcome outcome;

    bool hits_critical() const noexcept
    {
        return outcome.kind == outcome_kind::derivative_vanished || outcome.kind == outcome_kind::touched_down;
    }
};

inline trajectory shoot_profile(const params& p, const ubar& u, double b, double mu, stop_mode mode,
                                const shooter_options& opt = {}, bool keep_trace = false)
{
    const handoff_state hs = choose_handoff(p, u, b, mu, opt.handoff);
    return {b, mu, hs, integrate_profile(p, hs, mu, mode, opt, keep_trace)};
}

struct profile_sample {
    double x;
    double h;
    double h1;
    double h2;
    double h3;
    double mass_cum; // integral of H over (0, x)
};

// Samples clustered at both ends of (0, 1], in the spirit of Chebyshev points.
inline std::vector<double> clustered_grid(int count, std::optional<double> extra = std::nullopt)
{
    std::vector<double> xs;
    xs.reserve(static_cast<std::size_t>(count) + 1);
    for (int i = 1; i <= count; ++i) {
        xs.push_back(0.5 * (1.0 - std::cos(std::numbers::pi * i / count)));
    }
    xs.back() = 1.0;
    if (extra && *extra > 0.0 && *extra < 1.0) {
        xs.push_back(*extra);
        std::sort(xs.begin(), xs.end());
        xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    }
    return xs;
}

// Evaluates a traced trajectory on the grid: series below the handoff point,
// dense output above it. Grid points past the end of the trajectory are dropped.
inline std::vector<profile_sample> sample_trajectory(const params& p, const ubar& u, const trajectory& t,
                                                     const std::vector<double>& grid)
{
    std::vector<profile_sample> out;
    out.reserve(grid.size());
    const auto& steps = t.outcome.trace;
    std::size_t cursor = 0;
    for (double x : grid) {
        if (x <= t.handoff.x_hat) {
            const series_point s = eval_series_profile(p, u, t.b, t.mu, x);
            out.push_back({x, s.h, s.h1, s.h2, s.h3, series_mass(p, u, t.b, t.mu, x)});
            continue;
        }
        if (x > t.outcome.state.x || steps.empty()) {
            break;
        }
        while (cursor + 1 < steps.size() && steps[cursor].x1() < x) {
            ++cursor;
        }
        const state<4> y = steps[cursor](x);
        const state<4> f = profile_rhs(p, t.mu, x, y);
        out.push_back({x, y[0], y[1], y[2], f[2], t.handoff.mass0 + y[3]});
    }
    return out;
}

struct b_bar_result {
    double b_bar;
    trajectory shot; // at b_bar, which lies on the side where H' stays positive
    double b_lo;
    double b_hi;
    int iterations;
};

inline b_bar_result find_b_bar(const params& p, const ubar& u, double mu, const shooter_options& opt = {})
{
    if (!(mu > 0.0)) {
        throw error(error_kind::precondition, "mu must be positive");
    }
    auto shoot = [&](double b) { return shoot_profile(p, u, b, mu, stop_mode::detect_critical, opt); };

    trajectory lo = shoot(0.0);
    if (lo.hits_critical()) {
        throw error(error_kind::bracket, "H' vanishes already at b = 0");
    }
    double b_lo = 0.0;
    double b_hi = 1.0;
    int iterations = 1;
    while (true) {
        trajectory t = shoot(b_hi);
        ++iterations;
        if (t.hits_critical()) {
            break;
        }
        lo = std::move(t);
        b_lo = b_hi;
        b_hi *= 2.0;
        if (b_hi > opt.b_max) {
            throw error(error_kind::bracket, "no b up to " + std::to_string(opt.b_max) + " makes H' vanish");
        }
    }
    for (int it = 0; it < opt.max_iter; ++it) {
        const bool narrow = (b_hi - b_lo) < 1e-12 * (1.0 + b_lo);
        const bool endpoint_ok = lo.outcome.kind == outcome_kind::reached_one
                                 && std::abs(lo.outcome.state.h1) <= opt.shoot_tol;
        if (narrow && endpoint_ok) {
            return {b_lo, std::move(lo), b_lo, b_hi, iterations};
        }
        const double mid = 0.5 * (b_lo + b_hi);
        if (mid <= b_lo || mid >= b_hi) {
            break;
        }
        trajectory t = shoot(mid);
        ++iterations;
        if (t.hits_critical()) {
            b_hi = mid;
        } else {
            b_lo = mid;
            lo = std::move(t);
        }
    }
    throw error(error_kind::convergence,
                "b bisection stalled with H'(1) = " + std::to_string(lo.outcome.state.h1));
}

struct mass_eval {
    double mu;
    b_bar_result inner;
    double integral; // integral of H over (0, 1)
    double value;    // the mass map at mu
};

inline double mass_map_scale(const params& p, double mu) { return 2.0 * std::sqrt(mu) / std::sqrt(p.n + 3.0); }

inline mass_eval mass_map(const params& p, const ubar& u, double mu, const shooter_options& opt = {})
{
    b_bar_result r = find_b_bar(p, u, mu, opt);
    const double integral = r.shot.handoff.mass0 + r.shot.outcome.state.mass;
    return {mu, std::move(r), integral, mass_map_scale(p, mu) * integral};
}

struct shoot_result {
    double b_bar;
    double mu_bar;
    std::vector<profile_sample> profile;
    double mass; // integral of H over (0, 1)
    double hp_at_one;
    handoff_state handoff;
    double residual_max;
    int iterations; // mass map evaluations
    int inner_iterations;
    double mu_lo;
    double mu_hi;
    std::vector<std::pair<double, double>> history; // (mu, mass map) in evaluation order
};

inline constexpr int default_profile_samples = 2000;

// Max series ODE residual on an even grid of (0, x_hat] combined with the coefficient residual.
inline double profile_residual(const params& p, const ubar& u, double b, double mu, double x_hat, int points = 20)
{
    double r = u.residual_norm;
    for (int j = 1; j <= points; ++j) {
        const double x = x_hat * j / points;
        r = std::max(r, std::abs(series_ode_residual(p, eval_series_profile(p, u, b, mu, x), mu)));
    }
    return r;
}

inline shoot_result find_mu_bar(const params& p, const ubar& u, const shooter_options& opt = {},
                                int samples = default_profile_samples)
{
    const double target = p.mass_target;
    if (!(target > 0.0)) {
        throw error(error_kind::precondition, "mass target must be positive");
    }
    std::vector<std::pair<double, double>> history;
    auto eval = [&](double mu) {
        mass_eval e = mass_map(p, u, mu, opt);
        history.emplace_back(mu, e.value);
        return e;
    };

    mass_eval e_lo = eval(1.0);
    mass_eval e_hi = e_lo;
    if (e_lo.value < target) {
        while (true) {
            const double mu = 2.0 * e_lo.mu;
            if (mu > opt.mu_max) {
                throw error(error_kind::unreachable_mass, "mass map stays below the target up to mu_max");
            }
            mass_eval e = eval(mu);
            if (e.value >= target) {
                e_hi = std::move(e);
                break;
            }
            e_lo = std::move(e);
        }
    } else {
        while (true) {
            const double mu = 0.5 * e_hi.mu;
            if (mu < opt.mu_min) {
                throw error(error_kind::unreachable_mass, "mass map stays above the target down to mu_min");
            }
            mass_eval e = eval(mu);
            if (e.value < target) {
                e_lo = std::move(e);
                break;
            }
            e_hi = std::move(e);
        }
    }

    const mass_eval* best = nullptr;
    std::optional<mass_eval> mid_eval;
    for (int it = 0; it < opt.max_iter; ++it) {
        for (const mass_eval* cand : {&e_lo, &e_hi}) {
            if (std::abs(cand->value - target) <= opt.mass_tol * target) {
                best = cand;
            }
        }
        if (best) {
            break;
        }
        const double mid = std::sqrt(e_lo.mu * e_hi.mu);
        if (mid <= e_lo.mu || mid >= e_hi.mu) {
            break;
        }
        mass_eval e = eval(mid);
        if (e.value < target) {
            e_lo = std::move(e);
        } else {
            e_hi = std::move(e);
        }
    }
    if (!best) {
        throw error(error_kind::convergence, "mu bisection did not reach the mass tolerance");
    }

    const b_bar_result& inner = best->inner;
    const trajectory traced =
        shoot_profile(p, u, inner.b_bar, best->mu, stop_mode::detect_critical, opt, true);
    shoot_result r{};
    r.b_bar = inner.b_bar;
    r.mu_bar = best->mu;
    r.profile = sample_trajectory(p, u, traced, clustered_grid(samples, traced.handoff.x_hat));
    r.mass = best->integral;
    r.hp_at_one = traced.outcome.state.h1;
    r.handoff = traced.handoff;
    r.residual_max = profile_residual(p, u, r.b_bar, r.mu_bar, r.handoff.x_hat);
    r.iterations = static_cast<int>(history.size());
    r.inner_iterations = inner.iterations;
    r.mu_lo = e_lo.mu;
    r.mu_hi = e_hi.mu;
    r.history = std::move(history);
    return r;
}

} // namespace droplet
