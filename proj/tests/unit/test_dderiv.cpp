#include <cmath>

#include <gtest/gtest.h>

#include "gapmpcc/dderiv.hpp"
#include "gapmpcc/dgap.hpp"

using namespace gapmpcc;

namespace {

Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Index>(xs.size()));
    Index i = 0;
    for (double x : xs)
        v[i++] = x;
    return v;
}

const ScalarField sq = [](const Vec &x) { return x.squaredNorm(); };

} // namespace

TEST(LimitSchedule, DefaultIsGeometric) {
    const LimitSchedule s = LimitSchedule::geometric();
    ASSERT_EQ(s.t_values.size(), 13u);
    EXPECT_DOUBLE_EQ(s.t_values.front(), 0.1);
    EXPECT_DOUBLE_EQ(s.t_values.back(), 0.1 / 4096);
    EXPECT_NO_THROW(s.validate());
}

TEST(LimitSchedule, RejectsBadSchedules) {
    LimitSchedule s;
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s.t_values = {0.1, 0.2, 0.05};
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s.t_values = {0.1, 0.0};
    EXPECT_THROW(s.validate(), std::invalid_argument);
    s.t_values = {0.1, 0.05};
    EXPECT_THROW(s.validate(), std::invalid_argument); // richardson needs 3
    s.extrapolation = Extrapolation::none;
    EXPECT_NO_THROW(s.validate());
}

TEST(Dir1Limit, Examples) {
    EXPECT_NEAR(dir1_limit(sq, vec({1}), vec({1})).estimate, 2.0, 1e-9);
    const ScalarField abs1 = [](const Vec &x) { return std::abs(x[0]); };
    EXPECT_NEAR(dir1_limit(abs1, vec({0}), vec({-1})).estimate, 1.0, 1e-12);
    const ScalarField delta = [](const Vec &x) { return delta_ab(x[0], x[1]); };
    EXPECT_NEAR(dir1_limit(delta, vec({1, 1}), vec({0, 1})).estimate, 0.5, 1e-9);
}

TEST(Dir1Limit, WithoutExtrapolationConvergesLinearly) {
    const ScalarField cube = [](const Vec &x) { return x[0] * x[0] * x[0]; };
    LimitSchedule s = LimitSchedule::geometric(0.1, 12, Extrapolation::none);
    const LimitEstimate e = dir1_limit(cube, vec({1}), vec({1}), s);
    // Quotient is 3 + 3t + t^2 at the last t.
    const double t = s.t_values.back();
    EXPECT_NEAR(e.estimate, 3.0 + 3.0 * t + t * t, 1e-9);
    EXPECT_GT(e.error, 0.0);
}

TEST(Dir2Limit, Examples) {
    const ScalarField half = [](const Vec &x) { return 0.5 * x.squaredNorm(); };
    EXPECT_NEAR(dir2_limit(half, vec({0}), vec({1}), vec({0}), 0.0).estimate, 0.5, 1e-9);
    const ScalarField maxsq = [](const Vec &x) { return std::pow(std::max(x[0], 0.0), 2); };
    EXPECT_NEAR(dir2_limit(maxsq, vec({0}), vec({1}), vec({0}), 0.0).estimate, 1.0, 1e-9);
}

TEST(Dir2Limit, GapAtRegionDPoint) {
    // At (1, 1.5) in direction (1, 1): delta(x + t d) = delta(x) + 0.75 t + 0.25 t^2.
    const ScalarField delta = [](const Vec &x) { return delta_ab(x[0], x[1]); };
    const Vec x = vec({1, 1.5}), d = vec({1, 1});
    const double d1 = dir1_limit(delta, x, d).estimate;
    EXPECT_NEAR(d1, 0.75, 1e-9);
    EXPECT_NEAR(dir2_limit(delta, x, d, vec({0, 0}), d1).estimate, 0.25, 1e-4);
    EXPECT_NEAR(dir2_limit(delta, x, d, d, d1).estimate, 0.25 + 0.75, 1e-4);
}

TEST(Dir2Limit, SmoothFunctionsGiveHalfHessianForm) {
    // f = x0^2 x1 + sin(x0) + exp(x1).
    const ScalarField f = [](const Vec &x) { return x[0] * x[0] * x[1] + std::sin(x[0]) + std::exp(x[1]); };
    const Vec x = vec({0.3, -0.7});
    for (const Vec &d : {vec({1, 0}), vec({0.6, -0.8}), vec({-1, 2})}) {
        const double grad0 = 2 * x[0] * x[1] + std::cos(x[0]), grad1 = x[0] * x[0] + std::exp(x[1]);
        const double d1 = grad0 * d[0] + grad1 * d[1];
        Eigen::Matrix2d hess;
        hess << 2 * x[1] - std::sin(x[0]), 2 * x[0], 2 * x[0], std::exp(x[1]);
        const double expect = 0.5 * d.dot(hess * d);
        EXPECT_NEAR(dir2_limit(f, x, d, vec({0, 0}), d1).estimate, expect, 1e-5);
    }
}

TEST(Dir2Limit, ErrorEstimatesShrinkUnderRefinement) {
    // Truncation dominated range: each halving step shrinks the error estimate.
    const ScalarField f = [](const Vec &x) { return std::exp(x[0]) * std::cos(x[1]); };
    const Vec x = vec({0.2, 0.1}), d = vec({1, -0.5});
    const double d1 = std::exp(0.2) * std::cos(0.1) * 1.0 + std::exp(0.2) * -std::sin(0.1) * -0.5;
    double prev_dir1 = INFINITY, prev_dir2 = INFINITY;
    for (int k = 4; k <= 8; ++k) {
        const LimitSchedule s = LimitSchedule::geometric(0.5, k);
        const double e1 = dir1_limit(f, x, d, s).error;
        const double e2 = dir2_limit(f, x, d, vec({0, 0}), d1, s).error;
        EXPECT_LT(e1, prev_dir1) << k;
        EXPECT_LT(e2, prev_dir2) << k;
        prev_dir1 = e1;
        prev_dir2 = e2;
    }
}

TEST(Dir1Limit, NonFiniteValuesThrow) {
    const ScalarField bad = [](const Vec &x) { return x[0] > 0 ? std::log(-1.0) : 0.0; };
    EXPECT_THROW(dir1_limit(bad, vec({0}), vec({1})), std::domain_error);
    EXPECT_THROW(dir1_limit(sq, vec({0, 1}), vec({1})), DimensionError);
}

TEST(GradFd, Examples) {
    const Vec g = grad_fd(sq, vec({1, 2}));
    EXPECT_NEAR(g[0], 2.0, 1e-8);
    EXPECT_NEAR(g[1], 4.0, 1e-8);
    const ScalarField phi = [](const Vec &x) { return phi_ab(x.head(1), x.tail(1)); };
    // (1, 1) sits on the kink line eta = lambda, so the central difference
    // straddles two branches and is only first-order accurate there.
    const Vec gp = grad_fd(phi, vec({1, 1}));
    EXPECT_NEAR(gp[0], 0.0, 1e-6);
    EXPECT_NEAR(gp[1], 0.5, 1e-6);
    const Vec gs = grad_fd(phi, vec({1, 1.5}));
    EXPECT_NEAR(gs[0], 0.5, 1e-8);
    EXPECT_NEAR(gs[1], 0.25, 1e-8);
    const ScalarField konst = [](const Vec &) { return 3.0; };
    EXPECT_EQ(grad_fd(konst, vec({1, 2, 3})).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_THROW(grad_fd(sq, vec({1}), 0.0), std::invalid_argument);
}
