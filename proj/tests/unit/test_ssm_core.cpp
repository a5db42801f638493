#include <gtest/gtest.h>

#include <cmath>

#include "fedgc/block_system.hpp"
#include "fedgc/csv.hpp"
#include "fedgc/linalg.hpp"
#include "fedgc/rng.hpp"
#include "oracles.hpp"

using namespace fedgc;

namespace {

CounterRng test_rng(std::uint64_t id) { return CounterRng(2024, {static_cast<std::uint64_t>(StreamKind::test), id}); }

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
    Index i = 0;
    for (const auto& r : rows) {
        Index j = 0;
        for (double x : r) m(i, j++) = x;
        ++i;
    }
    return m;
}

BlockSystem scalar_pair(const Matrix& a, double q, double r) {
    return BlockSystem(BlockSpec({1, 1}, {1, 1}), a, Matrix::Identity(2, 2), q, r);
}

}  // namespace

TEST(BlockSpec, RejectsInvalidPartitions) {
    EXPECT_THROW(BlockSpec({}, {}), std::invalid_argument);
    EXPECT_THROW(BlockSpec({1, 2}, {1}), std::invalid_argument);
    EXPECT_THROW(BlockSpec({1, 0}, {1, 1}), std::invalid_argument);
    const BlockSpec spec({1, 2, 1}, {2, 1, 1});
    EXPECT_EQ(spec.state_dim(), 4);
    EXPECT_EQ(spec.obs_dim(), 4);
    EXPECT_EQ(spec.state_offset(2), 3);
    EXPECT_EQ(spec.obs_offset(1), 2);
    EXPECT_FALSE(spec.scalar());
    EXPECT_TRUE(BlockSpec({1, 1}, {1, 1}).scalar());
}

TEST(BlockSystem, RequiresBlockDiagonalC) {
    const BlockSpec spec({1, 1}, {1, 1});
    EXPECT_THROW(BlockSystem(spec, Matrix::Zero(2, 2), mat({{1, 1e-300}, {0, 1}}), 0, 0), std::invalid_argument);
    EXPECT_THROW(BlockSystem(spec, Matrix::Zero(3, 3), Matrix::Identity(2, 2), 0, 0), std::invalid_argument);
    EXPECT_THROW(BlockSystem(spec, Matrix::Zero(2, 2), Matrix::Identity(2, 2), -1, 0), std::invalid_argument);
    EXPECT_NO_THROW(BlockSystem(spec, Matrix::Zero(2, 2), Matrix::Identity(2, 2), 0, 0));
}

TEST(Simulate, NoiselessGeometricDecay) {
    const BlockSystem sys(BlockSpec({1}, {1}), mat({{0.5}}), mat({{1}}), 0, 0);
    const Trajectory traj = simulate(sys, 3, 1, Vector::Ones(1));
    ASSERT_EQ(traj.horizon(), 3u);
    const double expect[] = {1, 0.5, 0.25, 0.125};
    for (int t = 0; t < 4; ++t) {
        EXPECT_EQ(traj.states[t](0), expect[t]);
        EXPECT_EQ(traj.measurements[t](0), expect[t]);
    }
}

TEST(Simulate, ZeroMatrixKillsState) {
    const BlockSystem sys = scalar_pair(Matrix::Zero(2, 2), 0, 0);
    const Trajectory traj = simulate(sys, 4, 1, Vector::Constant(2, 3.7));
    for (std::size_t t = 1; t <= 4; ++t) EXPECT_TRUE(traj.states[t].isZero(0.0));
}

TEST(Simulate, RejectsBadInputs) {
    const BlockSystem sys = scalar_pair(Matrix::Zero(2, 2), 0, 0);
    EXPECT_THROW(simulate(sys, 0, 1, Vector::Zero(2)), std::invalid_argument);
    EXPECT_THROW(simulate(sys, 3, 1, Vector::Zero(3)), std::invalid_argument);
    EXPECT_THROW(simulate(sys, 3, 1, Vector::Zero(2), RegimeSwitch{1, Matrix::Zero(3, 3)}), std::invalid_argument);
}

TEST(Simulate, DeterministicPerSeed) {
    const BlockSystem sys = scalar_pair(mat({{0.5, 0.2}, {0.1, 0.3}}), 1, 0.5);
    const Trajectory a = simulate(sys, 50, 9, Vector::Zero(2));
    const Trajectory b = simulate(sys, 50, 9, Vector::Zero(2));
    const Trajectory c = simulate(sys, 50, 10, Vector::Zero(2));
    bool differs = false;
    for (std::size_t t = 0; t <= 50; ++t) {
        EXPECT_TRUE(exactly_equal(a.states[t], b.states[t]));
        EXPECT_TRUE(exactly_equal(a.measurements[t], b.measurements[t]));
        differs = differs || !exactly_equal(a.states[t], c.states[t]);
    }
    EXPECT_TRUE(differs);
}

TEST(Simulate, RegimeSwitchChangesDynamics) {
    const BlockSystem sys = scalar_pair(mat({{0.5, 0}, {0, 0.5}}), 0, 0);
    const Trajectory traj = simulate(sys, 4, 1, Vector::Ones(2), RegimeSwitch{3, mat({{1, 0}, {0, 1}})});
    EXPECT_DOUBLE_EQ(traj.states[2](0), 0.25);
    EXPECT_DOUBLE_EQ(traj.states[3](0), 0.25);
    EXPECT_DOUBLE_EQ(traj.states[4](0), 0.25);
}

TEST(Simulate, MonteCarloCovarianceMatchesLyapunov) {
    const Matrix a = mat({{0.5, 0.2}, {0.1, 0.3}});
    const BlockSystem sys = scalar_pair(a, 1.0, 0.0);
    const Trajectory traj = simulate(sys, 200000, 5, Vector::Zero(2));
    const Matrix emp = oracles::sample_covariance(traj.states, 100);
    const Matrix sigma = steady_state_covariance(a, 1.0).sigma;
    for (Index i = 0; i < 2; ++i)
        for (Index j = 0; j < 2; ++j) EXPECT_LT(std::abs(emp(i, j) - sigma(i, j)) / std::abs(sigma(i, j)), 0.05);
}

TEST(SplitMeasurements, PartitionsByObsDims) {
    const BlockSpec spec({1, 1}, {2, 1});
    const std::vector<Vector> ys{Vector::LinSpaced(3, 1, 3)};
    const auto parts = split_measurements(spec, ys);
    EXPECT_EQ(parts[0][0], Vector::LinSpaced(2, 1, 2));
    EXPECT_EQ(parts[1][0](0), 3.0);
    EXPECT_THROW(split_measurements(spec, {Vector::Zero(2)}), std::invalid_argument);
}

TEST(Vec, ColumnStacking) {
    EXPECT_EQ(vec(mat({{1, 2}, {3, 4}})), (Vector(4) << 1, 3, 2, 4).finished());
    EXPECT_EQ(vec(mat({{7}})), Vector::Constant(1, 7));
    CounterRng rng = test_rng(1);
    for (int i = 0; i < 50; ++i) {
        const Matrix z = oracles::random_matrix(rng, 1 + i % 4, 1 + (i / 4) % 4);
        EXPECT_TRUE(exactly_equal(unvec(vec(z), z.rows(), z.cols()), z));
        EXPECT_TRUE(exactly_equal(vec(z), oracles::brute_vec(z)));
    }
    EXPECT_THROW(unvec(Vector::Zero(5), 2, 2), std::invalid_argument);
}

TEST(Kron, MatchesEntryFormulaAndVecIdentity) {
    EXPECT_EQ(kron(Matrix::Identity(2, 2), Matrix::Identity(2, 2)), Matrix::Identity(4, 4));
    const Matrix x = mat({{2}}), y = mat({{3}}), z = mat({{4}});
    EXPECT_EQ(vec(x * y * z)(0), 24.0);
    EXPECT_EQ((kron(z.transpose(), x) * vec(y))(0), 24.0);

    CounterRng rng = test_rng(2);
    auto dim = [&] { return static_cast<Index>(1 + rng() % 4); };
    double worst = 0.0;
    for (int i = 0; i < 200; ++i) {
        const Index a = dim(), b = dim(), c = dim(), d = dim();
        const Matrix X = oracles::random_matrix(rng, a, b);
        const Matrix Y = oracles::random_matrix(rng, b, c);
        const Matrix Z = oracles::random_matrix(rng, c, d);
        EXPECT_TRUE(exactly_equal(kron(X, Z), oracles::brute_kron(X, Z)));
        worst = std::max(worst, (oracles::brute_vec(X * Y * Z) - oracles::brute_kron(Z.transpose(), X) * vec(Y))
                                    .cwiseAbs()
                                    .maxCoeff());
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(SpectralRadius, Examples) {
    EXPECT_NEAR(spectral_radius(mat({{0, 1}, {0, 0}})), 0.0, 1e-12);
    EXPECT_NEAR(spectral_radius(mat({{2, 0}, {0, 0.5}})), 2.0, 1e-12);
    EXPECT_NEAR(spectral_radius(mat({{0, -0.9}, {0.9, 0}})), 0.9, 1e-12);
    EXPECT_THROW(spectral_radius(Matrix::Zero(2, 3)), std::invalid_argument);
}

TEST(SpectralRadius, HomogeneousUnderScaling) {
    CounterRng rng = test_rng(3);
    for (int i = 0; i < 20; ++i) {
        const Matrix a = oracles::random_matrix(rng, 4, 4);
        const double base = spectral_radius(a);
        for (double c : {-2.5, 0.3, 7.0}) EXPECT_NEAR(spectral_radius(c * a), std::abs(c) * base, 1e-10 * std::abs(c) * base);
    }
}

TEST(SpectralRadius, PowerIterationAgreesWithDense) {
    CounterRng rng = test_rng(4);
    for (int i = 0; i < 10; ++i) {
        const Matrix a = oracles::random_matrix(rng, 12, 12);
        const double dense = spectral_radius(a);
        EXPECT_NEAR(spectral_radius_power(a, 1e-12, 100000), dense, 1e-6 * dense);
        SpectralRadiusOptions opts;
        opts.dense_limit = 4;
        opts.power_tolerance = 1e-12;
        opts.power_max_iterations = 100000;
        EXPECT_NEAR(spectral_radius(a, opts), dense, 1e-6 * dense);
    }
}

TEST(SpectralNorm, LargestSingularValue) {
    EXPECT_NEAR(spectral_norm(mat({{3, 0}, {0, -4}})), 4.0, 1e-12);
    EXPECT_EQ(spectral_norm(Matrix(0, 0)), 0.0);
}

TEST(Lyapunov, ClosedFormsAndFixedPoint) {
    EXPECT_NEAR(steady_state_covariance(mat({{0.5}}), 1.0).sigma(0, 0), 4.0 / 3.0, 1e-12);
    const SteadyStateCovariance zero = steady_state_covariance(Matrix::Zero(3, 3), 2.5);
    EXPECT_TRUE(zero.sigma.isApprox(2.5 * Matrix::Identity(3, 3), 1e-15));

    const Matrix a = mat({{0.5, 0.2}, {0.1, 0.3}});
    const SteadyStateCovariance cov = steady_state_covariance(a, 1.0);
    EXPECT_LT((cov.sigma - oracles::lyapunov_fixed_point(a, 1.0)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT(cov.relative_residual, 1e-9);

    CounterRng rng = test_rng(5);
    for (int i = 0; i < 20; ++i) {
        Matrix m = oracles::random_matrix(rng, 3, 3);
        m *= 0.9 / spectral_radius(m);
        const SteadyStateCovariance c = steady_state_covariance(m, 0.7);
        EXPECT_LT((c.sigma - oracles::lyapunov_fixed_point(m, 0.7)).cwiseAbs().maxCoeff(), 1e-10);
        EXPECT_LT(c.relative_residual, 1e-9);
    }
}

TEST(Lyapunov, RejectsUnstable) {
    try {
        steady_state_covariance(mat({{1.0}}), 1.0);
        FAIL() << "expected NumericalError";
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("unstable system, no steady state"), std::string::npos);
    }
    EXPECT_THROW(steady_state_covariance(Matrix::Zero(2, 3), 1.0), std::invalid_argument);
}

TEST(NonIid, Diagnostics) {
    const BlockSpec spec({1, 1}, {1, 1});
    const NonIidReport same = non_iid_diagnostics(steady_state_covariance(mat({{0.5, 0}, {0, 0.5}}), 1), spec);
    EXPECT_TRUE(same.identical);
    EXPECT_TRUE(same.independent);

    const NonIidReport coupled = non_iid_diagnostics(steady_state_covariance(mat({{0.5, 0.2}, {0.1, 0.3}}), 1), spec);
    EXPECT_FALSE(coupled.independent);
    EXPECT_FALSE(coupled.identical);

    const NonIidReport apart = non_iid_diagnostics(steady_state_covariance(mat({{0.9, 0}, {0, 0.1}}), 1), spec);
    EXPECT_FALSE(apart.identical);
    EXPECT_TRUE(apart.independent);
    EXPECT_NEAR(apart.variance_gap, 1 / (1 - 0.81) - 1 / (1 - 0.01), 1e-9);
}

TEST(Csv, RoundTripsAndQuotes) {
    for (double x : {0.1, -1e-300, 1.0 / 3.0, 6.02214076e23, 0.0}) EXPECT_EQ(parse_double(format_double(x)), x);
    EXPECT_EQ(format_double(std::nan("")), "nan");
    EXPECT_EQ(format_double(-HUGE_VAL), "-inf");
    EXPECT_TRUE(std::isinf(parse_double("inf")));
    EXPECT_THROW(parse_double("1.5x"), std::invalid_argument);
    EXPECT_EQ(csv_escape("plain"), "plain");
    EXPECT_EQ(csv_escape("a,b"), "\"a,b\"");
    EXPECT_EQ(csv_escape("say \"hi\""), "\"say \"\"hi\"\"\"");

    std::ostringstream out;
    write_csv_row(out, {"a", "b,c", "line\nbreak"});
    write_csv_row(out, {"1", "", "\""});
    const auto rows = parse_csv(out.str());
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0], (CsvRow{"a", "b,c", "line\nbreak"}));
    EXPECT_EQ(rows[1], (CsvRow{"1", "", "\""}));
    EXPECT_EQ(parse_csv("x,y\r\n1,2\r\n").size(), 2u);
}

TEST(CounterRng, StreamsAreReproducibleAndDistinct) {
    CounterRng a(1, {2, 3}), b(1, {2, 3}), c(1, {2, 4});
    const Vector va = a.normal_vector(16), vb = b.normal_vector(16), vc = c.normal_vector(16);
    EXPECT_TRUE(exactly_equal(va, vb));
    EXPECT_FALSE(exactly_equal(va, vc));
    EXPECT_NE(stream_key(1, {2, 3}), stream_key(1, {3, 2}));
}
