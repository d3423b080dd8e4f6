#pragma once

// Unfolded near-contact-line solution: H(x) = A^{-nu/3} x^nu (1 + ubar(x, b x^beta, mu x^gamma)),
// with ubar a truncated tri_series solving p(Dbar) ubar = fbar(ubar),
// (ubar, d2 ubar)(0,0,0) = (0, -1). ubar itself does not depend on (b, mu).

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "droplet/error.hpp"
#include "droplet/params.hpp"
#include "droplet/triseries.hpp"

namespace droplet {

// Sum over j >= first of binom(s, j) u^j, for u with zero constant term.
inline tri_series binomial_tail(const tri_series& u, double s, int first)
{
    const int c = u.cutoff();
    double lead = 1.0;
    for (int j = 1; j <= first; ++j) {
        lead *= (s - j + 1.0) / j;
    }
    tri_series inner = tri_series::constant(1.0, c);
    for (int j = c; j > first; --j) {
        inner = ((s - j + 1.0) / j) * (u * inner) + tri_series::constant(1.0, c);
    }
    tri_series out = lead * inner;
    for (int j = 0; j < first; ++j) {
        out = u * out;
    }
    return out;
}

// The four groups of the nonlinear right-hand side, kept apart for inspection.
struct fbar_groups {
    tri_series forcing;     // A x1
    tri_series quasilinear; // -((1+u)^{n-1} - 1) q(Dbar) u
    tri_series nonlinear;   // A [(1+u)^{n-1} - 1 - (n-1) u]
    tri_series gravity;     // A^{-2nu/3} x3 (1+u)^{n+1} (Dbar + nu)(1+u)

    tri_series total() const { return forcing + quasilinear + nonlinear + gravity; }
};

inline fbar_groups rhs_fbar_groups(const params& p, const tri_series& u)
{
    if (u.coeff({0, 0, 0}) != 0.0) {
        throw error(error_kind::precondition, "ubar must have zero constant term");
    }
    const int c = u.cutoff();
    const double a = p.big_a;
    const tri_series one = tri_series::constant(1.0, c);
    const tri_series x3 = tri_series::monomial({0, 0, 1}, 1.0, c);

    fbar_groups g{tri_series::monomial({1, 0, 0}, a, c), tri_series(c), tri_series(c), tri_series(c)};
    g.quasilinear = -1.0 * (binomial_tail(u, p.n - 1.0, 1) * apply_q_dbar(p, u));
    g.nonlinear = a * binomial_tail(u, p.n - 1.0, 2);
    const tri_series lifted = one + binomial_tail(u, p.n + 1.0, 1);
    g.gravity = std::pow(a, -2.0 * p.nu / 3.0) * (x3 * (lifted * apply_dbar(one + u, p.grades(), p.nu)));
    return g;
}

inline tri_series rhs_fbar(const params& p, const tri_series& u) { return rhs_fbar_groups(p, u).total(); }

struct ubar {
    tri_series series;
    int cutoff;
    double residual_norm; // max |p(Dbar) ubar - fbar(ubar)| over retained indices
    int iterations;
};

inline tri_series ubar_residual(const params& p, const tri_series& u)
{
    return apply_p_dbar(p, u) - rhs_fbar(p, u);
}

// Fixed-point sweeps u <- -x2 + T fbar(u). The degree-d coefficients of fbar only
// read coefficients of u below degree d, so sweep d fixes degree d for good.
inline ubar compute_ubar(const params& p, int cutoff, double resonance_tol = default_resonance_tol)
{
    if (cutoff < 1) {
        throw error(error_kind::usage, "series cutoff must be at least 1");
    }
    const tri_series base = tri_series::monomial({0, 1, 0}, -1.0, cutoff);
    tri_series u = base;
    for (int sweep = 1; sweep <= cutoff + 1; ++sweep) {
        tri_series next = base + invert_p(p, rhs_fbar(p, u), resonance_tol);
        if (next == u) {
            const double res = ubar_residual(p, u).max_abs_coeff();
            return ubar{std::move(u), cutoff, res, sweep};
        }
        u = std::move(next);
    }
    throw error(error_kind::convergence,
                "series coefficients not stationary after " + std::to_string(cutoff + 1) + " sweeps");
}

// H and its first three derivatives evaluated from the series.
struct series_point {
    double x;
    double h;
    double h1;
    double h2;
    double h3;
};

namespace detail {

// Visits every term of F = 1 + ubar along the curve as (weight, exponent of x in x^nu F).
template <class F>
void for_each_profile_term(const params& p, const ubar& u, double b, double mu, F&& visit)
{
    const grading g = p.grades();
    visit(1.0, p.nu);
    for (const auto& t : u.series.terms()) {
        const double w = t.coeff * std::pow(b, t.index.l) * std::pow(mu, t.index.m);
        if (w != 0.0) {
            visit(w, p.nu + grade(t.index, g));
        }
    }
}

} // namespace detail

inline series_point eval_series_profile(const params& p, const ubar& u, double b, double mu, double x)
{
    double d[4] = {0.0, 0.0, 0.0, 0.0};
    detail::for_each_profile_term(p, u, b, mu, [&](double w, double e) {
        double fall = 1.0;
        for (int k = 0; k < 4; ++k) {
            d[k] += w * fall * std::pow(x, e - k);
            fall *= e - k;
        }
    });
    const double pre = p.tw_prefactor();
    return {x, pre * d[0], pre * d[1], pre * d[2], pre * d[3]};
}

// Exact term-wise integral of H over (0, x).
inline double series_mass(const params& p, const ubar& u, double b, double mu, double x)
{
    double s = 0.0;
    detail::for_each_profile_term(p, u, b, mu,
                                  [&](double w, double e) { s += w * std::pow(x, e + 1.0) / (e + 1.0); });
    return p.tw_prefactor() * s;
}

// H^{n-1} H''' - (x - 1) - mu H^{n+1} H' from series values.
inline double series_ode_residual(const params& p, const series_point& s, double mu)
{
    return std::pow(s.h, p.n - 1.0) * s.h3 - (s.x - 1.0) - mu * std::pow(s.h, p.n + 1.0) * s.h1;
}

struct handoff_options {
    std::optional<double> fixed_eps; // empty: choose eps automatically
    double eps_start = 0.1;
    double tail_tol = 1e-10;
    int max_halvings = 30;
    double x_hat_scale = 1.0; // shrink the handoff abscissa below the admissible bound
};

struct handoff_state {
    double eps;
    double x_hat;
    double h;
    double h1;
    double h2;
    double h3;
    double mass0; // integral of H over (0, x_hat)
    double tail;  // relative contribution of the last degree shell at x_hat (heuristic)
};

// Upper end of the region where the series variables stay in their cube.
inline double admissible_x_hat(const params& p, double eps, double b, double mu)
{
    double x = eps * eps;
    if (b > 0.0) {
        x = std::min(x, std::pow(eps / b, 1.0 / p.beta));
    }
    x = std::min(x, std::pow(eps * eps / mu, 1.0 / p.gamma));
    return x;
}

inline double relative_tail(const params& p, const ubar& u, double b, double mu, double x)
{
    const grading g = p.grades();
    double shell = 0.0;
    double total = 1.0;
    for (const auto& t : u.series.terms()) {
        const double v = t.coeff * std::pow(b, t.index.l) * std::pow(mu, t.index.m) * std::pow(x, grade(t.index, g));
        total += v;
        if (t.index.degree() == u.cutoff) {
            shell += std::abs(v);
        }
    }
    return shell / std::abs(total);
}

inline handoff_state choose_handoff(const params& p, const ubar& u, double b, double mu,
                                    const handoff_options& opt = {})
{
    if (!(b >= 0.0) || !(mu > 0.0)) {
        throw error(error_kind::precondition, "handoff needs b >= 0 and mu > 0");
    }
    double eps = opt.fixed_eps.value_or(opt.eps_start);
    const int halvings = opt.fixed_eps ? 0 : opt.max_halvings;
    for (int attempt = 0;; ++attempt) {
        const double x_hat = opt.x_hat_scale * admissible_x_hat(p, eps, b, mu);
        const double tail = relative_tail(p, u, b, mu, x_hat);
        if (tail < opt.tail_tol) {
            const series_point s = eval_series_profile(p, u, b, mu, x_hat);
            if (!(s.h > 0.0) || !(s.h1 > 0.0)) {
                throw error(error_kind::handoff, "series profile not increasing at the handoff point");
            }
            return {eps, x_hat, s.h, s.h1, s.h2, s.h3, series_mass(p, u, b, mu, x_hat), tail};
        }
        if (attempt >= halvings) {
            throw error(error_kind::handoff, "series tail " + std::to_string(tail)
                                                 + " exceeds tolerance at the handoff point; "
                                                   "decrease eps or raise the cutoff");
        }
        eps *= 0.5;
    }
}

} // namespace droplet
