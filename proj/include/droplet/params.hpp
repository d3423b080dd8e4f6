#pragma once

#include <cmath>
#include <string>

#include "droplet/error.hpp"

namespace droplet {

// Scaling exponents of the graded Euler operator x1 d1 + beta x2 d2 + gamma x3 d3.
struct grading {
    double beta;
    double gamma;
};

// Every scalar constant of the construction, as a function of the mobility
// exponent n and the prescribed droplet mass. Immutable once derived.
struct params {
    double n;
    double nu;          // 3 / n
    double big_a;       // nu (nu - 1) (2 - nu), amplitude of the travelling wave
    double alpha;       // negative root of p
    double beta;        // root of p in (0, 1)
    double gamma;       // 2 (1 + nu)
    double mass_target;

    grading grades() const noexcept { return {beta, gamma}; }

    // A^{-nu/3}: prefactor of H_TW(x) = A^{-nu/3} x^nu.
    double tw_prefactor() const { return std::pow(big_a, -nu / 3.0); }
};

inline params derive_params(double n, double mass)
{
    if (!(n > 1.5 && n < 3.0)) {
        throw error(error_kind::domain,
                    "mobility exponent n must lie in the open interval (3/2, 3), got "
                        + std::to_string(n));
    }
    if (!(mass > 0.0) || !std::isfinite(mass)) {
        throw error(error_kind::domain, "mass must be positive and finite, got " + std::to_string(mass));
    }
    params p{};
    p.n = n;
    p.nu = 3.0 / n;
    p.big_a = p.nu * (p.nu - 1.0) * (2.0 - p.nu);
    const double disc = -3.0 * p.nu * p.nu + 12.0 * p.nu - 8.0;
    const double root = std::sqrt(disc);
    p.beta = (root - 3.0 * p.nu + 4.0) / 2.0;
    p.alpha = (-root - 3.0 * p.nu + 4.0) / 2.0;
    p.gamma = 2.0 * (1.0 + p.nu);
    p.mass_target = mass;
    return p;
}

// q(xi) = (xi + nu)(xi + nu - 1)(xi + nu - 2)
inline double eval_q(const params& p, double xi) noexcept
{
    return (xi + p.nu) * (xi + p.nu - 1.0) * (xi + p.nu - 2.0);
}

// Factored form (xi + 1)(xi - alpha)(xi - beta).
inline double eval_p(const params& p, double xi) noexcept
{
    return (xi + 1.0) * (xi - p.alpha) * (xi - p.beta);
}

// Expanded cubic; agrees with eval_p up to rounding.
inline double eval_p_expanded(const params& p, double xi) noexcept
{
    const double nu = p.nu;
    return ((xi + 3.0 * (nu - 1.0)) * xi + (3.0 * nu * nu - 6.0 * nu + 2.0)) * xi
           - 3.0 * (nu - 1.0) * (2.0 - nu);
}

} // namespace droplet
