#pragma once

// From the shooting solution H on (0, 1] back to the physical droplet on [-a, a]
// and the self-similar height h(t, z) = t^{-1/(n+4)} Hcal(t^{-1/(n+4)} z).

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "droplet/error.hpp"
#include "droplet/ode_shooter.hpp"
#include "droplet/params.hpp"

namespace droplet {

inline double half_width_from_mu(const params& p, double mu)
{
    if (!(mu > 0.0)) {
        throw error(error_kind::precondition, "mu must be positive");
    }
    const double n = p.n;
    return std::pow(mu / (n + 3.0) * std::pow(n + 4.0, 2.0 / n), n / (2.0 * n + 8.0));
}

inline double mu_from_half_width(const params& p, double a)
{
    const double n = p.n;
    return (n + 3.0) * std::pow(n + 4.0, -2.0 / n) * std::pow(a, 2.0 + 8.0 / n);
}

// Hcal(a (x - 1)) = height_scale * H(x)
inline double height_scale(const params& p, double a) { return std::pow(p.n + 4.0, -1.0 / p.n) * std::pow(a, 4.0 / p.n); }

// Fritsch-Carlson monotone cubic Hermite interpolation.
class monotone_interpolant {
public:
    monotone_interpolant() = default;

    monotone_interpolant(std::vector<double> xs, std::vector<double> ys) : xs_(std::move(xs)), ys_(std::move(ys))
    {
        const std::size_t n = xs_.size();
        if (n < 2 || ys_.size() != n) {
            throw error(error_kind::usage, "interpolation needs at least two matching samples");
        }
        std::vector<double> delta(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            delta[i] = (ys_[i + 1] - ys_[i]) / (xs_[i + 1] - xs_[i]);
        }
        slopes_.assign(n, 0.0);
        slopes_[0] = delta[0];
        slopes_[n - 1] = delta[n - 2];
        for (std::size_t i = 1; i + 1 < n; ++i) {
            if (delta[i - 1] * delta[i] <= 0.0) {
                slopes_[i] = 0.0;
            } else {
                const double h0 = xs_[i] - xs_[i - 1];
                const double h1 = xs_[i + 1] - xs_[i];
                const double w1 = 2.0 * h1 + h0;
                const double w2 = h1 + 2.0 * h0;
                slopes_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
    }

    double operator()(double x) const
    {
        if (x <= xs_.front()) {
            return ys_.front();
        }
        if (x >= xs_.back()) {
            return ys_.back();
        }
        const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
        const std::size_t i = static_cast<std::size_t>(it - xs_.begin()) - 1;
        const double h = xs_[i + 1] - xs_[i];
        const double t = (x - xs_[i]) / h;
        const double t2 = t * t;
        const double t3 = t2 * t;
        return (2 * t3 - 3 * t2 + 1) * ys_[i] + (t3 - 2 * t2 + t) * h * slopes_[i] + (-2 * t3 + 3 * t2) * ys_[i + 1]
               + (t3 - t2) * h * slopes_[i + 1];
    }

private:
    std::vector<double> xs_;
    std::vector<double> ys_;
    std::vector<double> slopes_;
};

struct physical_sample {
    double y;
    double h;
};

struct physical_profile {
    double a;
    std::vector<physical_sample> samples; // ascending y on [-a, a], mirrored exactly
    double mass_check;
    double n;
    double mu_bar;
    monotone_interpolant interp;

    double operator()(double y) const { return std::abs(y) >= a ? 0.0 : interp(y); }
};

inline physical_profile physical_profile_from(const params& p, const shoot_result& shoot)
{
    const double a = half_width_from_mu(p, shoot.mu_bar);
    const double scale = height_scale(p, a);

    std::vector<physical_sample> left;
    left.reserve(shoot.profile.size() + 1);
    left.push_back({-a, 0.0});
    for (const auto& s : shoot.profile) {
        if (s.x > 0.0 && s.x <= 1.0) {
            left.push_back({a * (s.x - 1.0), scale * s.h});
        }
    }
    if (left.back().y != 0.0) {
        throw error(error_kind::usage, "profile table must end at x = 1");
    }

    physical_profile out{};
    out.a = a;
    out.n = p.n;
    out.mu_bar = shoot.mu_bar;
    out.samples = left;
    for (auto it = left.rbegin() + 1; it != left.rend(); ++it) {
        out.samples.push_back({-it->y, it->h});
    }
    out.samples.back().h = 0.0;

    // Exact series integral up to the handoff point, trapezoid with the Hermite
    // end correction beyond it (the table carries H').
    double integral = shoot.handoff.mass0;
    for (std::size_t i = 1; i < shoot.profile.size(); ++i) {
        const auto& s0 = shoot.profile[i - 1];
        const auto& s1 = shoot.profile[i];
        if (s0.x >= shoot.handoff.x_hat) {
            const double dx = s1.x - s0.x;
            integral += 0.5 * dx * (s0.h + s1.h) + dx * dx / 12.0 * (s0.h1 - s1.h1);
        }
    }
    out.mass_check = 2.0 * a * scale * integral;

    std::vector<double> ys, hs;
    ys.reserve(out.samples.size());
    hs.reserve(out.samples.size());
    for (const auto& s : out.samples) {
        ys.push_back(s.y);
        hs.push_back(s.h);
    }
    out.interp = monotone_interpolant(std::move(ys), std::move(hs));
    return out;
}

inline double self_similar_height(const physical_profile& prof, double t, double z)
{
    if (!(t > 0.0)) {
        throw error(error_kind::domain, "time must be positive");
    }
    const double s = std::pow(t, -1.0 / (prof.n + 4.0));
    return s * prof(s * z);
}

// Support edges Z_(+/-)(t) = +/- a t^{1/(n+4)}.
inline double contact_line(const physical_profile& prof, double t)
{
    return prof.a * std::pow(t, 1.0 / (prof.n + 4.0));
}

// Composite Simpson quadrature of h(t, .) over its support.
inline double self_similar_mass(const physical_profile& prof, double t, int intervals = 20000)
{
    const double edge = contact_line(prof, t);
    const int m = intervals + (intervals % 2);
    const double dz = 2.0 * edge / m;
    double s = self_similar_height(prof, t, -edge) + self_similar_height(prof, t, edge);
    for (int i = 1; i < m; ++i) {
        s += (i % 2 ? 4.0 : 2.0) * self_similar_height(prof, t, -edge + i * dz);
    }
    return s * dz / 3.0;
}

} // namespace droplet
