#pragma once

// Shared oracles and generators for the test suite.

#include <cmath>
#include <functional>
#include <map>
#include <mutex>
#include <random>

#include "droplet/local_expansion.hpp"
#include "droplet/params.hpp"
#include "droplet/triseries.hpp"

namespace droplet::testing {

inline std::mt19937_64& rng()
{
    static std::mt19937_64 gen(20240611);
    return gen;
}

inline double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng()); }

inline int uniform_int(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng()); }

// Random series with roughly `fill` of the simplex populated.
inline tri_series random_series(int cutoff, double fill = 0.5, double scale = 1.0)
{
    tri_series s(cutoff);
    for (int k = 0; k <= cutoff; ++k) {
        for (int l = 0; k + l <= cutoff; ++l) {
            for (int m = 0; k + l + m <= cutoff; ++m) {
                if (uniform(0.0, 1.0) < fill) {
                    s.set({k, l, m}, uniform(-scale, scale));
                }
            }
        }
    }
    return s;
}

// Double-exponential quadrature on (0, 1); copes with integrable endpoint singularities.
inline double tanh_sinh_unit(const std::function<double(double)>& f, double step = 1.0 / 64, double t_max = 6.0)
{
    const double half_pi = 2.0 * std::atan(1.0);
    double sum = 0.0;
    for (double t = -t_max; t <= t_max + 1e-12; t += step) {
        const double u = half_pi * std::sinh(t);
        const double c = std::cosh(u);
        // x = (1 + tanh u)/2, dx = half_pi cosh t / (2 cosh^2 u) dt
        const double x = 0.5 * std::exp(u) / c;
        const double one_minus_x = 0.5 * std::exp(-u) / c;
        const double w = half_pi * std::cosh(t) / (2.0 * c * c);
        if (x <= 0.0 || one_minus_x <= 0.0) {
            continue;
        }
        sum += w * f(x);
    }
    return sum * step;
}

inline const ubar& cached_ubar(double n, int cutoff = 12)
{
    static std::map<std::pair<double, int>, ubar> cache;
    static std::mutex guard;
    std::lock_guard lock(guard);
    auto key = std::make_pair(n, cutoff);
    auto it = cache.find(key);
    if (it == cache.end()) {
        it = cache.emplace(key, compute_ubar(derive_params(n, 1.0), cutoff)).first;
    }
    return it->second;
}

} // namespace droplet::testing
