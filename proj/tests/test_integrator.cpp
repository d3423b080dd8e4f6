#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "droplet/integrator.hpp"
#include "support.hpp"

using namespace droplet;
using droplet::testing::uniform;

TEST(Dopri5, Exponential)
{
    step_control c;
    const auto r = integrate_dopri5<1>([](double, const state<1>& y) { return state<1>{y[0]}; }, 0.0, {1.0}, 1.0, c);
    EXPECT_EQ(r.status, integration_status::completed);
    EXPECT_EQ(r.x, 1.0);
    EXPECT_NEAR(r.y[0], std::numbers::e, 1e-9 * std::numbers::e);
}

TEST(Dopri5, BackwardExponential)
{
    step_control c;
    const auto r =
        integrate_dopri5<1>([](double, const state<1>& y) { return state<1>{-y[0]}; }, 2.0, {1.0}, 0.0, c);
    EXPECT_EQ(r.status, integration_status::completed);
    EXPECT_NEAR(r.y[0], std::exp(2.0), 1e-9 * std::exp(2.0));
}

TEST(Dopri5, ToleranceScaling)
{
    auto err = [](double tol) {
        step_control c;
        c.rtol = tol;
        c.atol = tol * 1e-2;
        const auto r = integrate_dopri5<1>(
            [](double x, const state<1>& y) { return state<1>{std::cos(x) * y[0]}; }, 0.0, {1.0}, 10.0, c);
        return std::abs(r.y[0] - std::exp(std::sin(10.0)));
    };
    EXPECT_LT(err(1e-10), err(1e-5));
    EXPECT_LT(err(1e-10), 1e-8);
}

TEST(Dopri5, DenseOutputAccuracy)
{
    step_control c;
    double worst = 0.0;
    int steps = 0;
    const auto r = integrate_dopri5<2>(
        [](double, const state<2>& y) { return state<2>{y[1], -y[0]}; }, 0.0, {0.0, 1.0}, 2.0 * std::numbers::pi, c,
        [&](const dense_step<2>& s) {
            ++steps;
            for (int i = 0; i <= 8; ++i) {
                const double x = s.x0 + s.h * i / 8.0;
                const auto y = s(x);
                worst = std::max({worst, std::abs(y[0] - std::sin(x)), std::abs(y[1] - std::cos(x))});
            }
            const auto y0 = s(s.x0);
            const auto y1 = s(s.x1());
            EXPECT_EQ(y0[0], s.y0[0]);
            EXPECT_NEAR(y1[0], s.y1[0], 1e-15);
            return true;
        });
    EXPECT_EQ(r.status, integration_status::completed);
    EXPECT_GT(steps, 5);
    EXPECT_LT(worst, 1e-8);
    EXPECT_NEAR(r.y[0], 0.0, 1e-9);
    EXPECT_NEAR(r.y[1], 1.0, 1e-9);
}

TEST(Dopri5, ObserverStops)
{
    step_control c;
    int seen = 0;
    const auto r = integrate_dopri5<1>([](double, const state<1>&) { return state<1>{1.0}; }, 0.0, {0.0}, 100.0, c,
                                       [&](const dense_step<1>&) { return ++seen < 3; });
    EXPECT_EQ(r.status, integration_status::stopped);
    EXPECT_EQ(seen, 3);
    EXPECT_LT(r.x, 100.0);
}

TEST(Dopri5, NonFiniteRightHandSide)
{
    step_control c;
    const auto r = integrate_dopri5<1>(
        [](double x, const state<1>& y) { return state<1>{x > 0.5 ? std::nan("") : y[0]}; }, 0.0, {1.0}, 1.0, c);
    EXPECT_NE(r.status, integration_status::completed);
    EXPECT_LE(r.x, 0.5);
    EXPECT_TRUE(std::isfinite(r.y[0]));
}

TEST(Dopri5, BlowUpIsNotCompleted)
{
    // y' = y^2, y(0) = 1 blows up at x = 1.
    step_control c;
    const auto r =
        integrate_dopri5<1>([](double, const state<1>& y) { return state<1>{y[0] * y[0]}; }, 0.0, {1.0}, 2.0, c);
    EXPECT_NE(r.status, integration_status::completed);
    EXPECT_LT(r.x, 1.0);
    EXPECT_GT(r.y[0], 1e3);
}

namespace {

struct poly {
    std::vector<double> c;
    double operator()(double x) const
    {
        double s = 0.0;
        for (auto it = c.rbegin(); it != c.rend(); ++it) {
            s = s * x + *it;
        }
        return s;
    }
};

poly random_positive_poly()
{
    poly p;
    const int deg = droplet::testing::uniform_int(0, 3);
    for (int i = 0; i <= deg; ++i) {
        p.c.push_back(uniform(0.0, 2.0));
    }
    return p;
}

} // namespace

TEST(ComparisonProperty, ThirdDerivativeStaysNonnegative)
{
    // y''' = A y + B y' + C y'' + g with A, B, C, g >= 0 and nonnegative data.
    step_control c;
    for (int trial = 0; trial < 100; ++trial) {
        const poly a = random_positive_poly(), b = random_positive_poly(), cc = random_positive_poly(),
                   g = random_positive_poly();
        const state<3> y0{uniform(0.0, 1.0), uniform(0.0, 1.0), uniform(0.0, 1.0)};
        auto rhs = [&](double x, const state<3>& y) {
            return state<3>{y[1], y[2], a(x) * y[0] + b(x) * y[1] + cc(x) * y[2] + g(x)};
        };
        double worst = 0.0;
        const auto r = integrate_dopri5<3>(rhs, 0.0, y0, 1.0, c, [&](const dense_step<3>& s) {
            for (int i = 0; i <= 10; ++i) {
                const double x = s.x0 + s.h * i / 10.0;
                worst = std::min(worst, rhs(x, s(x))[2]);
            }
            return true;
        });
        ASSERT_EQ(r.status, integration_status::completed);
        EXPECT_GE(worst, -1e-9) << "trial " << trial;
    }
}
