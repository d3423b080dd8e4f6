#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "droplet/error.hpp"
#include "droplet/ode_shooter.hpp"
#include "support.hpp"

using namespace droplet;
using droplet::testing::cached_ubar;

namespace {

const params& p2()
{
    static const params p = derive_params(2.0, 1.0);
    return p;
}

double tw(const params& p, double x) { return p.tw_prefactor() * std::pow(x, p.nu); }

std::vector<profile_sample> traced_samples(const params& p, double b, double mu, int count = 400)
{
    const ubar& u = cached_ubar(p.n);
    const trajectory t = shoot_profile(p, u, b, mu, stop_mode::detect_critical, {}, true);
    return sample_trajectory(p, u, t, clustered_grid(count));
}

const shoot_result& solved_n2()
{
    static const shoot_result r = find_mu_bar(p2(), cached_ubar(2.0));
    return r;
}

} // namespace

TEST(IntegrateProfile, NearConstantProfile)
{
    const params& p = p2();
    handoff_state start{};
    start.x_hat = 0.999;
    start.h = 1e3;
    const auto out = integrate_profile(p, start, 1e-12, stop_mode::to_end);
    EXPECT_EQ(out.kind, outcome_kind::reached_one);
    EXPECT_EQ(out.state.x, 1.0);
    EXPECT_NEAR(out.state.h, 1e3, 1e-9);
    EXPECT_NEAR(out.state.h1, 0.0, 1e-8);
    EXPECT_NEAR(out.state.mass, 1e3 * 1e-3, 1e-9);
}

TEST(IntegrateProfile, RejectsBadStart)
{
    handoff_state start{};
    start.x_hat = 0.5;
    start.h = -1.0;
    EXPECT_THROW(integrate_profile(p2(), start, 1.0, stop_mode::to_end), error);
}

TEST(IntegrateProfile, ZeroBNeverLosesSlope)
{
    const params& p = p2();
    const ubar& u = cached_ubar(2.0);
    for (double mu : {1e-3, 0.1, 1.0, 10.0, 100.0}) {
        const trajectory t = shoot_profile(p, u, 0.0, mu, stop_mode::detect_critical, {}, true);
        // Strong gravity may blow the profile up before x = 1; it must not turn over.
        EXPECT_NE(t.outcome.kind, outcome_kind::derivative_vanished) << "mu=" << mu;
        EXPECT_NE(t.outcome.kind, outcome_kind::touched_down) << "mu=" << mu;
        if (mu <= 10.0) {
            EXPECT_EQ(t.outcome.kind, outcome_kind::reached_one) << "mu=" << mu;
        }
        for (const auto& s : sample_trajectory(p, u, t, clustered_grid(300))) {
            ASSERT_GT(s.h, tw(p, s.x)) << "mu=" << mu << " x=" << s.x;
            ASSERT_GT(s.h1, 0.0);
        }
    }
}

TEST(IntegrateProfile, LargeBCollapsesEarly)
{
    const params& p = p2();
    const ubar& u = cached_ubar(2.0);
    const double b = 10.0 * std::pow(0.1, 1.0 - 2.0 * p.beta);
    const trajectory big = shoot_profile(p, u, b, 1.0, stop_mode::detect_critical);
    const trajectory one = shoot_profile(p, u, 1.0, 1.0, stop_mode::detect_critical);
    EXPECT_TRUE(big.hits_critical());
    EXPECT_TRUE(one.hits_critical());
    EXPECT_LT(big.outcome.state.x, one.outcome.state.x);
    EXPECT_LT(big.outcome.state.x, 0.1);
}

TEST(ShooterProperty, CriticalPointMovesLeftWithB)
{
    const params& p = p2();
    const ubar& u = cached_ubar(2.0);
    double last = 1.0;
    for (double b : {1.0, 2.0, 5.0, 20.0, 100.0, 1000.0}) {
        const trajectory t = shoot_profile(p, u, b, 1.0, stop_mode::detect_critical);
        ASSERT_TRUE(t.hits_critical()) << b;
        EXPECT_LT(t.outcome.state.x, last) << b;
        last = t.outcome.state.x;
    }
    EXPECT_LT(last, 0.2);
}

TEST(ShooterProperty, MonotoneInB)
{
    const params& p = p2();
    const double mu = 1.0;
    const double bs[] = {0.0, 0.25, 0.5, 0.75, 1.0};
    std::vector<std::vector<profile_sample>> runs;
    for (double b : bs) {
        runs.push_back(traced_samples(p, b, mu));
    }
    for (std::size_t j = 0; j + 1 < runs.size(); ++j) {
        const auto& lo = runs[j];
        const auto& hi = runs[j + 1];
        const std::size_t common = std::min(lo.size(), hi.size());
        ASSERT_GT(common, 50u);
        for (std::size_t i = 0; i < common; ++i) {
            ASSERT_EQ(lo[i].x, hi[i].x);
            EXPECT_GE(lo[i].h - hi[i].h, -1e-10) << "x=" << lo[i].x;
            EXPECT_GE(lo[i].h1 - hi[i].h1, -1e-10) << "x=" << lo[i].x;
            EXPECT_GE(lo[i].h2 - hi[i].h2, -1e-10 * std::max(1.0, std::abs(lo[i].h2))) << "x=" << lo[i].x;
        }
    }
}

TEST(ShooterProperty, HandoffIndependence)
{
    const params& p = p2();
    const ubar& u = cached_ubar(2.0);
    for (auto [b, mu] : {std::pair{1.0, 1.0}, std::pair{0.5, 1.0}, std::pair{0.9, 5.0}}) {
        shooter_options full, half;
        half.handoff.x_hat_scale = 0.5;
        const trajectory a = shoot_profile(p, u, b, mu, stop_mode::to_end, full);
        const trajectory c = shoot_profile(p, u, b, mu, stop_mode::to_end, half);
        ASSERT_EQ(a.outcome.kind, outcome_kind::reached_one);
        ASSERT_EQ(c.outcome.kind, outcome_kind::reached_one);
        EXPECT_NEAR(c.handoff.x_hat, 0.5 * a.handoff.x_hat, 1e-18);
        EXPECT_LT(std::abs(a.outcome.state.h1 - c.outcome.state.h1), 1e-6);
        EXPECT_LT(std::abs(a.handoff.mass0 + a.outcome.state.mass - c.handoff.mass0 - c.outcome.state.mass), 1e-8);
    }
}

TEST(FindBBar, PredicateEnds)
{
    const params& p = p2();
    const ubar& u = cached_ubar(2.0);
    EXPECT_FALSE(shoot_profile(p, u, 0.0, 1.0, stop_mode::detect_critical).hits_critical());
    EXPECT_TRUE(shoot_profile(p, u, 1e3, 1.0, stop_mode::detect_critical).hits_critical());
}

TEST(FindBBar, UnitMu)
{
    const params& p = p2();
    const ubar& u = cached_ubar(2.0);
    const b_bar_result r = find_b_bar(p, u, 1.0);
    EXPECT_EQ(r.shot.outcome.kind, outcome_kind::reached_one);
    EXPECT_LE(std::abs(r.shot.outcome.state.h1), 1e-8);
    EXPECT_LT(r.b_hi - r.b_lo, 1e-12 * (1.0 + r.b_bar));
    EXPECT_TRUE(shoot_profile(p, u, r.b_hi, 1.0, stop_mode::detect_critical).hits_critical());
    const auto y = profile_rhs(p, 1.0, 1.0, {r.shot.outcome.state.h, r.shot.outcome.state.h1, r.shot.outcome.state.h2, 0});
    EXPECT_LE(std::abs(y[2]), 1e-6);
    const auto samples = traced_samples(p, r.b_bar, 1.0, 201);
    ASSERT_EQ(samples.size(), 201u);
    for (std::size_t i = 0; i + 1 < samples.size(); ++i) {
        EXPECT_GT(samples[i].h1, 0.0) << samples[i].x;
    }
}

TEST(FindBBar, RejectsNonpositiveMu)
{
    EXPECT_THROW(find_b_bar(p2(), cached_ubar(2.0), 0.0), error);
}

TEST(FindBBar, OtherExponents)
{
    for (double n : {1.6, 2.5, 2.9}) {
        const params p = derive_params(n, 1.0);
        const b_bar_result r = find_b_bar(p, cached_ubar(n), 2.0);
        EXPECT_LE(std::abs(r.shot.outcome.state.h1), 1e-8) << n;
        EXPECT_GT(r.b_bar, 0.0);
    }
}

TEST(MassMap, VanishesAsMuShrinks)
{
    const params& p = p2();
    const ubar& u = cached_ubar(2.0);
    double last = mass_map(p, u, 1e-2).value;
    for (double mu : {1e-4, 1e-6}) {
        const double v = mass_map(p, u, mu).value;
        EXPECT_LT(v, last);
        EXPECT_GT(v, 0.0);
        last = v;
    }
    EXPECT_LT(last, 1e-3);
}

TEST(MassMap, LowerBoundAtLargeMu)
{
    const params& p = p2();
    const ubar& u = cached_ubar(2.0);
    for (double mu : {100.0, 1000.0}) {
        const mass_eval e = mass_map(p, u, mu);
        const double eps = e.inner.shot.handoff.eps;
        const double c = (1.0 - 2.0 * eps) * p.tw_prefactor() / 2.0;
        EXPECT_GE(e.integral, c * std::pow(e.inner.shot.handoff.x_hat, p.nu)) << mu;
    }
}

TEST(MassMap, Continuity)
{
    const params& p = p2();
    const ubar& u = cached_ubar(2.0);
    for (double mu : {0.3, 3.0, 30.0}) {
        const double a = mass_map(p, u, mu).value;
        const double b = mass_map(p, u, 1.01 * mu).value;
        EXPECT_LT(std::abs(b - a) / a, 0.2);
    }
}

TEST(FindMuBar, BracketAndBoundaryConditions)
{
    const params& p = p2();
    const shoot_result& r = solved_n2();
    EXPECT_LE(r.mu_lo, r.mu_bar);
    EXPECT_GE(r.mu_hi, r.mu_bar);
    double m_lo = 0, m_hi = 0;
    for (const auto& [mu, m] : r.history) {
        if (mu == r.mu_lo) {
            m_lo = m;
        }
        if (mu == r.mu_hi) {
            m_hi = m;
        }
    }
    EXPECT_LT(m_lo, p.mass_target);
    EXPECT_GE(m_hi, p.mass_target);
    EXPECT_EQ(r.iterations, static_cast<int>(r.history.size()));

    ASSERT_FALSE(r.profile.empty());
    const auto& first = r.profile.front();
    EXPECT_LT(first.h, 1e-8);
    EXPECT_LT(first.h1, 1e-2);
    EXPECT_EQ(r.profile.back().x, 1.0);
    EXPECT_LE(std::abs(r.hp_at_one), 1e-8);
    EXPECT_LE(std::abs(r.profile.back().h1), 1e-8);
    const double target = std::sqrt(p.n + 3.0) * p.mass_target / (2.0 * std::sqrt(r.mu_bar));
    EXPECT_LE(std::abs(r.mass - target) / target, 1e-6);
    EXPECT_NEAR(r.profile.back().mass_cum, r.mass, 1e-9);
    EXPECT_LE(r.residual_max, 1e-8);
}

TEST(FindMuBar, ProfileShape)
{
    const shoot_result& r = solved_n2();
    for (std::size_t i = 1; i < r.profile.size(); ++i) {
        EXPECT_GT(r.profile[i].x, r.profile[i - 1].x);
        EXPECT_GT(r.profile[i].mass_cum, r.profile[i - 1].mass_cum);
        if (i + 1 < r.profile.size()) {
            EXPECT_GT(r.profile[i].h1, 0.0);
        }
    }
    EXPECT_LE(std::abs(r.profile.back().h3), 1e-6);
}

TEST(FindMuBar, MassScaling)
{
    const shoot_result& base = solved_n2();
    for (double m : {0.25, 4.0}) {
        const params p = derive_params(2.0, m);
        const shoot_result r = find_mu_bar(p, cached_ubar(2.0), {}, 200);
        EXPECT_NE(r.mu_bar, base.mu_bar);
        const double target = std::sqrt(p.n + 3.0) * m / (2.0 * std::sqrt(r.mu_bar));
        EXPECT_LE(std::abs(r.mass - target) / target, 1e-8 * (1 + 1e-6));
        EXPECT_LE(std::abs(r.hp_at_one), 1e-8);
        if (m < 1.0) {
            EXPECT_LT(r.mu_bar, base.mu_bar);
        } else {
            EXPECT_GT(r.mu_bar, base.mu_bar);
        }
    }
}

TEST(FindMuBar, OtherExponent)
{
    const params p = derive_params(2.5, 1.0);
    const shoot_result r = find_mu_bar(p, cached_ubar(2.5), {}, 300);
    const double target = std::sqrt(p.n + 3.0) / (2.0 * std::sqrt(r.mu_bar));
    EXPECT_LE(std::abs(r.mass - target) / target, 1e-6);
    EXPECT_LE(std::abs(r.hp_at_one), 1e-8);
}

TEST(ClusteredGrid, Shape)
{
    const auto g = clustered_grid(100, 0.01234);
    EXPECT_EQ(g.size(), 101u);
    EXPECT_EQ(g.back(), 1.0);
    EXPECT_GT(g.front(), 0.0);
    EXPECT_TRUE(std::is_sorted(g.begin(), g.end()));
    EXPECT_NE(std::find(g.begin(), g.end(), 0.01234), g.end());
    EXPECT_LT(g[1] - g[0], g[50] - g[49]);
}
