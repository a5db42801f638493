#include <gtest/gtest.h>

#include <cmath>

#include "fedgc/theory.hpp"
#include "oracles.hpp"

using namespace fedgc;

namespace {

Matrix s(double x) { return Matrix::Constant(1, 1, x); }
Vector v(double x) { return Vector::Constant(1, x); }
CounterRng test_rng(std::uint64_t id) { return CounterRng(41, {static_cast<std::uint64_t>(StreamKind::test), id}); }

// Affine map Delta -> Delta' given by one federation round for focal client m.
oracles::AffineProbe probe_round(const FederationSetup& setup, std::size_t m, std::size_t t,
                                 const std::vector<Matrix>& thetas, const BlockGrid& grid, double eta1,
                                 double eta2, double gamma) {
    const DeltaLayout layout(setup.spec, m);
    auto f = [&](const Vector& d) {
        const UnstackedDelta u = unstack_delta(layout, d);
        BlockGrid g = grid;
        for (std::size_t i = 0; i < layout.partners.size(); ++i) g[m][layout.partners[i]] = u.a_hat_row[i];
        std::vector<Matrix> th = thetas;
        th[m] = u.theta;
        const RoundUpdate upd = federation_round(setup, th, ServerModel(setup.spec, setup.a_diag, gamma, g), t, eta1, eta2);
        return stack_delta(layout, upd.A_hat, upd.thetas[m]);
    };
    return oracles::probe_affine(f, layout.size);
}

Matrix random_h(CounterRng& rng, Index n, double rho) {
    Matrix h = oracles::random_matrix(rng, n, n);
    return h * (rho / spectral_radius(h));
}

}  // namespace

TEST(DeltaLayout, DimensionBookkeeping) {
    const BlockSpec spec({1, 2, 1}, {2, 1, 1});
    const DeltaLayout l0(spec, 0);
    EXPECT_EQ(l0.partners, (std::vector<std::size_t>{1, 2}));
    EXPECT_EQ(l0.size, 1 * 2 + 1 * 1 + 1 * 2);
    const DeltaLayout l1(spec, 1);
    EXPECT_EQ(l1.size, 2 * 1 + 2 * 1 + 2 * 1);
    EXPECT_EQ(l1.theta_offset, 4);

    CounterRng rng = test_rng(1);
    BlockGrid grid = zero_off_diagonal(spec);
    grid[1][0] = oracles::random_matrix(rng, 2, 1);
    grid[1][2] = oracles::random_matrix(rng, 2, 1);
    const Matrix theta = oracles::random_matrix(rng, 2, 1);
    const UnstackedDelta u = unstack_delta(l1, stack_delta(l1, grid, theta));
    EXPECT_TRUE(exactly_equal(u.a_hat_row[0], grid[1][0]));
    EXPECT_TRUE(exactly_equal(u.a_hat_row[1], grid[1][2]));
    EXPECT_TRUE(exactly_equal(u.theta, theta));
    EXPECT_THROW(unstack_delta(l1, Vector::Zero(5)), std::invalid_argument);
}

TEST(BuildRecurrence, AllRatesOffIsIdentity) {
    const BlockSpec spec({1, 2}, {1, 2});
    const FederationSetup setup = oracles::simulated_setup(oracles::random_system(spec, 3), 10, 3);
    for (std::size_t m = 0; m < 2; ++m) {
        const RecurrenceSystem rs = build_recurrence(spec, m, 5, recurrence_inputs(setup, m, 5), 0, 0, 0);
        EXPECT_TRUE(rs.H.isIdentity(0.0));
        EXPECT_TRUE(rs.J.isZero(0.0));
    }
}

TEST(BuildRecurrence, ScalarHandEvaluation) {
    const double a = 0.6, c = 1.3, hm = 0.4, hn = -0.7, yp = 1.1, yt = 0.9;
    const double eta1 = 0.03, eta2 = 0.02, gamma = 0.05;
    const BlockSpec spec({1, 1}, {1, 1});
    const RecurrenceInputs in{s(a), s(c), {v(hm), v(hn)}, v(yp), v(yt)};
    const RecurrenceSystem rs = build_recurrence(spec, 0, 1, in, eta1, eta2, gamma);
    ASSERT_EQ(rs.H.rows(), 2);
    EXPECT_NEAR(rs.H(0, 0), 1 - 2 * gamma * hn * hn, 1e-15);
    EXPECT_NEAR(rs.H(0, 1), 2 * gamma * a * yp * hn, 1e-15);
    EXPECT_NEAR(rs.H(1, 0), 2 * eta2 * a * yp * hn, 1e-15);
    EXPECT_NEAR(rs.H(1, 1), 1 - yp * yp * (2 * eta1 * a * a * c * c + 2 * eta2 * a * a), 1e-15);
    EXPECT_NEAR(rs.J(0), 0.0, 0.0);
    EXPECT_NEAR(rs.J(1), 2 * eta1 * c * a * (yt - c * a * hm) * yp, 1e-15);
    EXPECT_NEAR(rs.R(0, 0), 2 * a, 0.0);
    EXPECT_NEAR(rs.G(0, 0), yp * yp, 1e-16);
}

TEST(BuildRecurrence, RejectsInconsistentInputs) {
    const BlockSpec spec({1, 1}, {1, 1});
    const RecurrenceInputs missing{s(1), s(1), {v(1)}, v(1), v(1)};
    EXPECT_THROW(build_recurrence(spec, 0, 1, missing, 0.1, 0.1, 0.1), std::invalid_argument);
    const RecurrenceInputs wrong{s(1), s(1), {v(1), Vector::Zero(2)}, v(1), v(1)};
    EXPECT_THROW(build_recurrence(spec, 0, 1, wrong, 0.1, 0.1, 0.1), std::invalid_argument);
}

TEST(Recurrence, EquivalentToFederationRound) {
    double worst_step = 0.0, worst_h = 0.0;
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        CounterRng rng = test_rng(100 + seed);
        const std::size_t M = 2 + seed % 2;
        std::vector<Index> dims, obs;
        for (std::size_t m = 0; m < M; ++m) {
            dims.push_back(static_cast<Index>(1 + rng() % 2));
            obs.push_back(static_cast<Index>(1 + rng() % 2));
        }
        const BlockSpec spec(dims, obs);
        const FederationSetup setup = oracles::simulated_setup(oracles::random_system(spec, seed), 15, seed);
        std::vector<Matrix> thetas;
        for (std::size_t m = 0; m < M; ++m) thetas.push_back(oracles::random_matrix(rng, dims[m], obs[m]));
        BlockGrid grid = zero_off_diagonal(spec);
        for (std::size_t m = 0; m < M; ++m)
            for (std::size_t n = 0; n < M; ++n)
                if (m != n) grid[m][n] = oracles::random_matrix(rng, dims[m], dims[n]);
        const std::size_t t = 1 + rng() % 15;
        const double eta1 = 0.04, eta2 = 0.015, gamma = 0.03;
        const RoundUpdate upd = federation_round(setup, thetas, ServerModel(spec, setup.a_diag, gamma, grid), t, eta1, eta2);
        for (std::size_t m = 0; m < M; ++m) {
            const RecurrenceSystem rs = build_recurrence(spec, m, t, recurrence_inputs(setup, m, t), eta1, eta2, gamma);
            const Vector predicted = recurrence_step(rs.H, rs.J, stack_delta(rs.layout, grid, thetas[m]));
            const Vector actual = stack_delta(rs.layout, upd.A_hat, upd.thetas[m]);
            worst_step = std::max(worst_step, (predicted - actual).cwiseAbs().maxCoeff());
            const oracles::AffineProbe probe = probe_round(setup, m, t, thetas, grid, eta1, eta2, gamma);
            worst_h = std::max({worst_h, (probe.H - rs.H).cwiseAbs().maxCoeff(), (probe.J - rs.J).cwiseAbs().maxCoeff()});
        }
    }
    EXPECT_LT(worst_step, 1e-10);
    EXPECT_LT(worst_h, 1e-10);
}

TEST(RecurrenceStep, Examples) {
    EXPECT_EQ(recurrence_step(Matrix::Zero(2, 2), Vector::Constant(2, 3), Vector::Constant(2, 9)), Vector::Constant(2, 3));
    Vector d = v(0);
    const double expect[] = {1, 1.5, 1.75};
    for (double e : expect) {
        d = recurrence_step(s(0.5), v(1), d);
        EXPECT_DOUBLE_EQ(d(0), e);
    }
    EXPECT_THROW(recurrence_step(s(0.5), v(1), Vector::Zero(2)), std::invalid_argument);
}

TEST(ConvergenceVerdict, Examples) {
    const ConvergenceVerdict half = convergence_verdict(0.5 * Matrix::Identity(2, 2), Vector::Constant(2, 2));
    EXPECT_TRUE(half.convergent);
    ASSERT_TRUE(half.delta_star.has_value());
    EXPECT_NEAR((*half.delta_star - Vector::Constant(2, 4)).cwiseAbs().maxCoeff(), 0.0, 1e-14);

    const ConvergenceVerdict twice = convergence_verdict(2 * Matrix::Identity(2, 2), Vector::Ones(2));
    EXPECT_FALSE(twice.convergent);
    EXPECT_FALSE(twice.delta_star.has_value());
    EXPECT_THROW(gd_form_residual(2 * Matrix::Identity(2, 2), Vector::Ones(2), twice, Vector::Zero(2)),
                 std::invalid_argument);

    const ConvergenceVerdict edge = convergence_verdict(s(1 - 1e-15), v(1));
    EXPECT_TRUE(edge.near_singular);
    EXPECT_FALSE(edge.delta_star.has_value());
}

TEST(ConvergenceVerdict, IterationLandsOnFixedPoint) {
    CounterRng rng = test_rng(2);
    for (int i = 0; i < 10; ++i) {
        const Matrix h = random_h(rng, 6, 0.8);
        const Vector j = oracles::random_vector(rng, 6);
        const ConvergenceVerdict verdict = convergence_verdict(h, j);
        ASSERT_TRUE(verdict.delta_star.has_value());
        EXPECT_LT((h * *verdict.delta_star + j - *verdict.delta_star).norm(), 1e-9);
        Vector d = Vector::Zero(6);
        for (int k = 0; k < 300; ++k) d = recurrence_step(h, j, d);
        EXPECT_LT((d - *verdict.delta_star).norm(), 1e-8);
    }
}

TEST(GdFormResidual, AlgebraicIdentity) {
    const ConvergenceVerdict scalar = convergence_verdict(s(0.5), v(1));
    EXPECT_EQ(gd_form_residual(s(0.5), v(1), scalar, v(0)), 0.0);
    CounterRng rng = test_rng(3);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        const Index n = 1 + i % 5;
        const Matrix h = random_h(rng, n, 0.3 + 0.6 * std::abs(std::sin(i)));
        const Vector j = oracles::random_vector(rng, n);
        const ConvergenceVerdict verdict = convergence_verdict(h, j);
        worst = std::max(worst, gd_form_residual(h, j, verdict, oracles::random_vector(rng, n)));
    }
    EXPECT_LT(worst, 1e-9);
}

TEST(RateCheck, Examples) {
    const RateCheck id = rate_check(Matrix::Identity(3, 3), 1.0, 0.5);
    EXPECT_EQ(id.norm, 0.0);
    EXPECT_TRUE(id.sublinear_ok);
    EXPECT_TRUE(*id.linear_ok);

    const RateCheck equal = rate_check(s(0.2), 2.0, 2.0);
    EXPECT_DOUBLE_EQ(*equal.linear_threshold, 1.0);

    const RateCheck half = rate_check(0.5 * Matrix::Identity(2, 2), 2.0, 1.0);
    EXPECT_NEAR(half.norm, 0.5, 1e-15);
    EXPECT_NEAR(*half.linear_threshold, 4.0 / 3.0, 1e-15);
    EXPECT_TRUE(*half.linear_ok);

    const RateCheck far = rate_check(s(-1.5), 1.0);
    EXPECT_FALSE(far.sublinear_ok);
    EXPECT_FALSE(far.linear_ok.has_value());

    EXPECT_THROW(rate_check(s(0), 0.0), std::invalid_argument);
    EXPECT_THROW(rate_check(s(0), 1.0, 2.0), std::invalid_argument);
    EXPECT_THROW(rate_check(s(0), 1.0, -1.0), std::invalid_argument);
}

TEST(JointSettling, ThetaAndAHatSettleTogether) {
    const BlockSpec spec({1, 2}, {1, 2});
    const DeltaLayout layout(spec, 1);
    CounterRng rng = test_rng(4);
    for (double rho : {0.5, 0.8, 0.95, 1.05, 1.2, 1.5}) {
        for (int i = 0; i < 5; ++i) {
            const Matrix h = random_h(rng, layout.size, rho);
            const Vector j = oracles::random_vector(rng, layout.size);
            const JointSettling js = joint_settling(h, j, layout, Vector::Zero(layout.size));
            EXPECT_EQ(js.theta_settled, js.a_hat_settled) << "rho " << rho;
            EXPECT_EQ(js.theta_settled, rho < 1.0) << "rho " << rho;
            EXPECT_EQ(js.diverged, rho > 1.0);
        }
    }
}

TEST(OptimalityResiduals, VanishOnConstructedStationaryData) {
    const BlockSpec spec({1, 1}, {1, 1});
    const double a0 = 0.6, a1 = 0.5, c0 = 1.2, c1 = 0.8, th0 = 0.3, th1 = -0.4, a01 = 0.7, a10 = -0.5;
    const std::size_t T = 30;
    FederationSetup setup{spec, {s(a0), s(a1)}, {s(c0), s(c1)}, {s(0), s(0)}, {{}, {}}, {ClientTrace{}, ClientTrace{}}};
    double y0 = 1.0, y1 = -0.8;
    for (std::size_t t = 0; t <= T; ++t) {
        // Estimates chosen so that A_mm theta_m y_m = A_hat_mn h_n for both clients.
        const double h1 = a0 * th0 * y0 / a01, h0 = a1 * th1 * y1 / a10;
        setup.measurements[0].push_back(v(y0));
        setup.measurements[1].push_back(v(y1));
        setup.traces[0].estimates.push_back(v(h0));
        setup.traces[1].estimates.push_back(v(h1));
        y0 = c0 * a0 * (h0 + th0 * y0);
        y1 = c1 * a1 * (h1 + th1 * y1);
    }
    for (auto& tr : setup.traces) {
        tr.predictions.assign(T + 1, v(0));
        tr.residuals.assign(T + 1, v(0));
    }
    BlockGrid grid = zero_off_diagonal(spec);
    grid[0][1] = s(a01);
    grid[1][0] = s(a10);
    const OptimalityResiduals res = optimality_residuals(setup, {s(th0), s(th1)}, grid, 20);
    EXPECT_LT(res.cond1[0], 1e-8);
    EXPECT_LT(res.cond1[1], 1e-8);
    EXPECT_LT(res.cond2[0][1], 1e-8);
    EXPECT_LT(res.cond2[1][0], 1e-8);

    grid[0][1] = s(a01 + 0.1);
    const double off = optimality_residuals(setup, {s(th0), s(th1)}, grid, 20).cond2[0][1];
    EXPECT_GT(off, 0.0);
    EXPECT_GT(off, 1e3 * res.cond2[0][1]);
}
