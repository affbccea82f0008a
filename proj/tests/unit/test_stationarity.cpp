#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "gapmpcc/inner.hpp"
#include "gapmpcc/outer.hpp"
#include "gapmpcc/problems.hpp"
#include "gapmpcc/stationarity.hpp"
#include "oracles.hpp"

using namespace gapmpcc;

namespace {

Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Index>(xs.size()));
    Index i = 0;
    for (double x : xs)
        v[i++] = x;
    return v;
}

Vec scholtes_d_root() { return vec({296.0 / 5296.0, 396.0 / 5296.0}); }

int rank(StationarityClass c) { return static_cast<int>(c); }

} // namespace

TEST(Classify, ScholtesBranchPoint) {
    const MpccProblem sch = builtin("scholtes_toy");
    StationarityCertificate c = classify(sch, vec({1, 0}), Vec(0), vec({0}), vec({-2}));
    EXPECT_EQ(c.klass, StationarityClass::strong);
    EXPECT_EQ(c.index_sets.eta_active, std::vector<Index>{0});
    EXPECT_TRUE(c.biactive_products.empty());

    c = classify(sch, vec({1, 0}), Vec(0), vec({0}), vec({0}));
    EXPECT_EQ(c.klass, StationarityClass::none);
    EXPECT_DOUBLE_EQ(c.stat_residual, 2.0);
    EXPECT_TRUE(c.feasible);
}

TEST(Classify, ScholtesOriginIsClarke) {
    const MpccProblem sch = builtin("scholtes_toy");
    const StationarityCertificate c = classify(sch, vec({0, 0}), Vec(0), vec({-2}), vec({-2}));
    EXPECT_EQ(c.klass, StationarityClass::clarke);
    EXPECT_TRUE(c.ulsc);
    EXPECT_TRUE(c.licq);
    ASSERT_EQ(c.biactive_products.size(), 1u);
    EXPECT_EQ(c.biactive_products[0].v * c.biactive_products[0].w, 4.0);
}

TEST(Classify, BilinearOriginIsStrong) {
    const MpccProblem bil = builtin("bilinear_min");
    EXPECT_EQ(classify(bil, vec({0, 0}), Vec(0), vec({1}), vec({1})).klass, StationarityClass::strong);
}

TEST(Classify, WeakWhenBiactiveSignsDisagree) {
    // J = -lambda + eta: grad (-1, 1) gives v = -1, w = 1 at the origin.
    QuadraticMpccSpec s = builtin_spec("bilinear_min");
    s.q << -1.0, 1.0;
    const MpccProblem p = make_problem(s);
    const StationarityCertificate c = classify(p, vec({0, 0}), Vec(0), vec({-1}), vec({1}));
    EXPECT_EQ(c.klass, StationarityClass::weak);
    EXPECT_TRUE(c.ulsc);
}

TEST(Classify, InfeasiblePointIsNone) {
    const MpccProblem sch = builtin("scholtes_toy");
    const StationarityCertificate c = classify(sch, vec({1, 1}), Vec(0), vec({0}), vec({0}));
    EXPECT_FALSE(c.feasible);
    EXPECT_EQ(c.klass, StationarityClass::none);
    const StationarityCertificate neg = classify(sch, vec({-0.5, 0}), Vec(0), vec({0}), vec({0}));
    EXPECT_FALSE(neg.feasible);
    const MpccProblem ct = builtin("constrained_toy");
    EXPECT_FALSE(classify(ct, vec({1, 0, 0}), vec({0}), vec({0}), vec({0})).feasible);
}

TEST(Classify, MultiplierOnWrongSetBlocksWeak) {
    // At (1, 0) pair 0 is in I_eta, so v must vanish even when stationarity holds.
    QuadraticMpccSpec s = builtin_spec("scholtes_toy");
    s.q[0] = -1.5; // grad J = (0.5, -2) at (1, 0)
    const MpccProblem p = make_problem(s);
    const StationarityCertificate c = classify(p, vec({1, 0}), Vec(0), vec({0.5}), vec({-2}));
    EXPECT_EQ(c.stat_residual, 0.0);
    EXPECT_EQ(c.klass, StationarityClass::none);
}

TEST(Classify, MonotoneInToleranceAndNested) {
    std::mt19937_64 rng(21);
    const MpccProblem p = builtin("bilinear_min");
    for (int s = 0; s < 2000; ++s) {
        const double v = oracle::uniform(rng, -2, 2), w = oracle::uniform(rng, -2, 2);
        // Gradient (1, 1) fixed by the cost; perturb the multipliers around it.
        const double pv = oracle::uniform(rng, 0, 1) < 0.5 ? v : 1.0 + 1e-7 * v;
        const double pw = oracle::uniform(rng, 0, 1) < 0.5 ? w : 1.0 + 1e-7 * w;
        int prev = -1;
        for (double tol : {1e-9, 1e-7, 1e-6, 1e-4, 1e-1, 10.0}) {
            const StationarityCertificate c = classify(p, vec({0, 0}), Vec(0), vec({pv}), vec({pw}), tol);
            ASSERT_GE(rank(c.klass), prev) << pv << " " << pw << " tol " << tol;
            prev = rank(c.klass);
            if (c.klass == StationarityClass::strong) {
                // Strong multipliers pass the Clarke product test too.
                const double tol_sign = tol * (1.0 + std::max(std::abs(pv), std::abs(pw)));
                ASSERT_GE(pv * pw, -tol_sign * std::max(std::abs(pv), std::abs(pw)));
            }
        }
    }
}

TEST(Ulsc, Examples) {
    IndexSets bi;
    bi.biactive = {0};
    EXPECT_TRUE(ulsc_check(vec({-2}), vec({-2}), bi, 1e-12));
    EXPECT_FALSE(ulsc_check(vec({0}), vec({3}), bi, 1e-12));
    EXPECT_TRUE(ulsc_check(vec({0}), vec({3}), IndexSets{}, 1e-12));
}

TEST(FitMultipliers, RecoversHandMultipliers) {
    const MpccProblem sch = builtin("scholtes_toy");
    MultiplierFit f = fit_multipliers(sch, vec({0, 0}), index_sets(sch, vec({0, 0})));
    EXPECT_NEAR(f.v[0], -2.0, 1e-12);
    EXPECT_NEAR(f.w[0], -2.0, 1e-12);
    EXPECT_LE(f.residual, 1e-12);
    f = fit_multipliers(sch, vec({1, 0}), index_sets(sch, vec({1, 0})));
    EXPECT_NEAR(f.v[0], 0.0, 1e-12);
    EXPECT_NEAR(f.w[0], -2.0, 1e-12);

    const MpccProblem ct = builtin("constrained_toy");
    const Vec z = vec({0.5, 0.5, 0});
    f = fit_multipliers(ct, z, index_sets(ct, z));
    // grad J = (1, -1, -2); u from the x row, w from the eta row.
    EXPECT_NEAR(f.u[0], -1.0, 1e-12);
    EXPECT_NEAR(f.w[0], -3.0, 1e-12);
    EXPECT_EQ(classify(ct, z, f.u, f.v, f.w).klass, StationarityClass::strong);
}

TEST(SecondOrderValue, Examples) {
    const MpccProblem bil = builtin("bilinear_min");
    const double mu = 100;
    EXPECT_NEAR(second_order_value(bil, vec({-2 / mu, -3 / mu}), Vec(0), mu, vec({1, -1})), 250.0, 1e-9);
    const MpccProblem sch = builtin("scholtes_toy");
    EXPECT_NEAR(second_order_value(sch, scholtes_d_root(), Vec(0), mu, vec({1, -1})), -173.0, 1e-9);
    EXPECT_EQ(second_order_value(sch, vec({0.3, 0.1}), Vec(0), mu, vec({0, 0})), 0.0);
}

TEST(SecondOrderValue, PositivelyHomogeneous) {
    std::mt19937_64 rng(22);
    const MpccProblem sch = builtin("scholtes_toy");
    for (int s = 0; s < 500; ++s) {
        const Vec z = vec({oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1)});
        const Vec d = vec({oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1)});
        const double t = oracle::uniform(rng, 0.01, 10);
        const double base = second_order_value(sch, z, Vec(0), 10, d);
        ASSERT_NEAR(second_order_value(sch, z, Vec(0), 10, t * d), t * t * base, 1e-11 * t * t * (1 + std::abs(base)));
    }
}

TEST(SecondOrderValue, RejectsDirectionsOffTheKernel) {
    const MpccProblem ct = builtin("constrained_toy");
    EXPECT_THROW(second_order_value(ct, vec({0, 0, 0}), vec({0}), 1, vec({1, 0, 0})), std::invalid_argument);
    EXPECT_NO_THROW(second_order_value(ct, vec({0, 0, 0}), vec({0}), 1, vec({1, 1, 0})));
}

TEST(SecondOrderCheck, BilinearRootFamilyHasNoNegativeCurvature) {
    const MpccProblem bil = builtin("bilinear_min");
    for (double mu : {10.0, 100.0, 1000.0, 10000.0}) {
        const SecondOrderProbe pr = second_order_check(bil, vec({-2 / mu, -3 / mu}), Vec(0), mu, {}, 1000, 5);
        EXPECT_GE(pr.min_value, 0.0) << mu;
    }
}

TEST(SecondOrderCheck, ScholtesSaddleHasWitness) {
    const MpccProblem sch = builtin("scholtes_toy");
    const SecondOrderProbe pr = second_order_check(sch, scholtes_d_root(), Vec(0), 100);
    // Over unit directions the value is a quadratic form; its matrix is
    // 50 * D block + I with D = [[-1, 1], [1, -1/2]].
    Eigen::Matrix2d m;
    m << -49, 50, 50, -24;
    const double lowest = Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(m).eigenvalues()[0];
    EXPECT_GE(pr.min_value, lowest - 1e-9);
    // The biactive probe (1, -1)/sqrt(2) alone gives -86.5.
    EXPECT_LE(pr.min_value, -86.5);
    EXPECT_NEAR(pr.min_value, lowest, 1e-2);
    EXPECT_NEAR(pr.argmin_d.norm(), 1.0, 1e-12);
    EXPECT_LT(pr.argmin_d[0] * pr.argmin_d[1], 0.0);
}

TEST(SecondOrderCheck, QuadraticToyConvex) {
    const MpccProblem quad = builtin("quadratic_toy");
    EXPECT_GE(second_order_check(quad, vec({0, 0}), Vec(0), 10).min_value, 0.0);
}

TEST(SecondOrderCheck, SeedIsReproducible) {
    const MpccProblem ct = builtin("constrained_toy");
    const Vec z = vec({0.2, 0.3, 0.1});
    const SecondOrderProbe a = second_order_check(ct, z, vec({0}), 10, {}, 64, 3);
    const SecondOrderProbe b = second_order_check(ct, z, vec({0}), 10, {}, 64, 3);
    EXPECT_EQ(a.min_value, b.min_value);
    EXPECT_TRUE(a.argmin_d == b.argmin_d);
    Mat jac = ct.constraint_jacobian(z);
    EXPECT_LE(std::abs((jac * a.argmin_d)(0)), 1e-12);
}

TEST(FindNegativeCurvature, ScholtesSaddle) {
    const MpccProblem sch = builtin("scholtes_toy");
    IndexSets bi;
    bi.biactive = {0};
    const NegativeCurvature nc = find_negative_curvature(sch, scholtes_d_root(), Vec(0), 100, bi);
    ASSERT_EQ(nc.status, CurvatureSearch::found);
    EXPECT_NEAR(nc.d[0], 1.0, 1e-12);
    EXPECT_NEAR(nc.d[1], -1.0, 1e-12);
    EXPECT_NEAR(nc.value, -173.0, 1e-9);
}

TEST(FindNegativeCurvature, NothingAtBilinearRoot) {
    const MpccProblem bil = builtin("bilinear_min");
    IndexSets bi;
    bi.biactive = {0};
    const NegativeCurvature nc = find_negative_curvature(bil, vec({-0.02, -0.03}), Vec(0), 100, bi);
    EXPECT_EQ(nc.status, CurvatureSearch::not_found);
    EXPECT_NEAR(nc.value, 250.0, 1e-9);
}

TEST(FindNegativeCurvature, NoBiactiveAndLicqFailure) {
    const MpccProblem sch = builtin("scholtes_toy");
    EXPECT_EQ(find_negative_curvature(sch, vec({1, 0}), Vec(0), 100, index_sets(sch, vec({1, 0}))).status,
              CurvatureSearch::no_biactive);
    const MpccProblem lf = builtin("licq_fail");
    IndexSets bi;
    bi.biactive = {0};
    EXPECT_EQ(find_negative_curvature(lf, vec({0, 0}), vec({0}), 100, bi).status, CurvatureSearch::licq_failure);
}

TEST(FindNegativeCurvature, RespectsEqualityConstraints) {
    // x - lambda + eta = 0: pinning (1, -1) forces x = 2.
    const MpccProblem ct = builtin("constrained_toy");
    IndexSets bi;
    bi.biactive = {0};
    const NegativeCurvature nc = find_negative_curvature(ct, vec({0, 0, 0}), vec({0}), 100, bi);
    ASSERT_NE(nc.status, CurvatureSearch::licq_failure);
    EXPECT_NEAR(nc.d[0], 2.0, 1e-12);
    EXPECT_NEAR(nc.d[1], 1.0, 1e-12);
    EXPECT_NEAR(nc.d[2], -1.0, 1e-12);
}

TEST(StationarityIdentity, RecoveredMultipliersCloseTheResidual) {
    // At a converged inner point, grad J + jac' u - v e_lambda - w e_eta = 0.
    const std::pair<const char *, Vec> cases[] = {{"scholtes_toy", vec({0.3, 2})},
                                                  {"constrained_toy", vec({0.1, 0.4, 0.2})},
                                                  {"bilinear_min", vec({1, 1})}};
    for (const auto &[name, z0] : cases) {
        const MpccProblem p = builtin(name);
        for (double mu : {1.0, 100.0}) {
            const KktPoint kp = solve_pgap(p, mu, z0, Vec::Zero(p.n_h));
            ASSERT_EQ(kp.status, KktStatus::converged);
            const auto [v, w] = recover_multipliers(p, kp.z, mu);
            const Vec r = stationarity_vector(p, kp.z, kp.u, v, w);
            EXPECT_LE(detail::inf_norm(r), 10 * 1e-8) << name;
        }
    }
}
