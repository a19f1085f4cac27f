#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "lanekoop/edmd.hpp"

using namespace lanekoop;
using lanekoop::testing::max_abs_diff;
using lanekoop::testing::planted_map;
using lanekoop::testing::planted_pair;
using lanekoop::testing::random_matrix;

namespace {

LiftedTrajectory block(std::initializer_list<double> s, const BasisSpec& basis = BasisSpec::monomial(2)) {
    std::vector<double> sv(s), yv;
    for (double v : sv) yv.push_back(2.0 + 0.1 * v);
    return lift_points(sv, yv, basis);
}

SvdFactors factors_with(std::initializer_list<double> sigma, std::size_t rows, std::size_t cols) {
    SvdFactors f;
    f.sigma = Eigen::Map<const Eigen::VectorXd>(sigma.begin(), static_cast<Eigen::Index>(sigma.size()));
    f.u = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(rows), f.sigma.size());
    f.v = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(cols), f.sigma.size());
    f.source_rows = rows;
    f.source_cols = cols;
    return f;
}

}  // namespace

TEST(Snapshots, ColumnCounts) {
    const std::vector<LiftedTrajectory> one{block({0, 1, 2, 3, 4})};
    const auto p1 = build_snapshots(one);
    EXPECT_EQ(p1.x.rows(), 4);
    EXPECT_EQ(p1.x.cols(), 4);
    EXPECT_EQ(p1.x_shift.cols(), 4);

    const std::vector<LiftedTrajectory> two{block({0, 1, 2}), block({10, 11, 12, 13})};
    const auto p2 = build_snapshots(two);
    EXPECT_EQ(p2.columns(), 5u);
    EXPECT_EQ(p2.block_columns, (std::vector<std::size_t>{2, 3}));
}

TEST(Snapshots, ShiftIdentityWithinBlocksOnly) {
    const std::vector<LiftedTrajectory> two{block({0, 1, 2}), block({10, 11, 12, 13})};
    const auto p = build_snapshots(two);
    // Block boundary after column 1: x_shift(:,1) is the last state of block 0.
    for (Eigen::Index j : {0, 2, 3}) EXPECT_EQ(p.x_shift.col(j), p.x.col(j + 1));
    EXPECT_EQ(p.x_shift(0, 1), 2.0);
    EXPECT_EQ(p.x(0, 2), 10.0);
    EXPECT_EQ(p.x_shift(0, 4), 13.0);
}

TEST(Snapshots, RejectsShortOrMismatched) {
    const std::vector<LiftedTrajectory> short_one{block({0, 1}), block({5})};
    EXPECT_THROW(build_snapshots(short_one), std::invalid_argument);
    const std::vector<LiftedTrajectory> mixed{block({0, 1}), block({0, 1, 2}, BasisSpec::monomial(3))};
    EXPECT_THROW(build_snapshots(mixed), std::invalid_argument);
}

TEST(Svd, DiagonalAndOuterProduct) {
    RowMatrix d(2, 2);
    d << 3, 0, 0, 2;
    const auto f = svd_thin(d);
    ASSERT_EQ(f.rank(), 2u);
    EXPECT_NEAR(f.sigma(0), 3.0, 1e-15);
    EXPECT_NEAR(f.sigma(1), 2.0, 1e-15);

    Eigen::Vector4d g(1, -2, 0.5, 3);
    Eigen::VectorXd h(7);
    h << 2, 1, 0, -1, 4, 0.25, 1;
    const RowMatrix outer = g * h.transpose();
    const auto f1 = svd_thin(outer);
    ASSERT_EQ(f1.rank(), 1u);
    EXPECT_NEAR(f1.sigma(0), g.norm() * h.norm(), 1e-12);
}

TEST(Svd, FactorInvariantsOnRandomMatrix) {
    std::mt19937_64 rng(1);
    const RowMatrix x = random_matrix(4, 50, rng);
    const auto f = svd_thin(x);
    ASSERT_EQ(f.rank(), 4u);
    const Eigen::MatrixXd recon = f.u * f.sigma.asDiagonal() * f.v.transpose();
    EXPECT_LE((Eigen::MatrixXd(x) - recon).norm(), 1e-10 * x.norm());
    EXPECT_LE((f.u.transpose() * f.u - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((f.v.transpose() * f.v - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-10);
    for (int i = 0; i < 3; ++i) EXPECT_GE(f.sigma(i), f.sigma(i + 1));
    for (int c = 0; c < 4; ++c) {
        Eigen::Index at = 0;
        f.u.col(c).cwiseAbs().maxCoeff(&at);
        EXPECT_GT(f.u(at, c), 0.0);
    }
}

TEST(Svd, DeterministicAndRejectsZero) {
    std::mt19937_64 rng(2);
    const RowMatrix x = random_matrix(4, 30, rng);
    const auto a = svd_thin(x);
    const auto b = svd_thin(x);
    EXPECT_EQ(a.u, b.u);
    EXPECT_EQ(a.sigma, b.sigma);
    EXPECT_EQ(a.v, b.v);
    EXPECT_THROW(svd_thin(RowMatrix::Zero(4, 5)), NumericalError);
}

TEST(PseudoInverse, Identity) {
    const RowMatrix eye = RowMatrix::Identity(4, 4);
    EXPECT_LE(max_abs_diff(pseudo_inverse_normal(eye), Eigen::MatrixXd::Identity(4, 4)), 1e-15);
    EXPECT_LE(max_abs_diff(pseudo_inverse_svd(svd_thin(eye)), Eigen::MatrixXd::Identity(4, 4)), 1e-15);
}

TEST(PseudoInverse, MoorePenroseOnRandomMatrices) {
    std::mt19937_64 rng(3);
    for (Eigen::Index m : {4, 10, 40, 100}) {
        for (int trial = 0; trial < 5; ++trial) {
            const RowMatrix x = random_matrix(4, m, rng);
            const auto pinv = pseudo_inverse_svd(svd_thin(x));
            EXPECT_LE(penrose_residuals(x, pinv).worst(), 1e-8) << "m=" << m;
            const auto normal = pseudo_inverse_normal(x);
            EXPECT_LE(penrose_residuals(x, normal).worst(), 1e-8) << "m=" << m;
            EXPECT_LE(max_abs_diff(normal, pinv), 1e-8) << "m=" << m;
        }
    }
}

TEST(PseudoInverse, RankDeficientGivesProjector) {
    std::mt19937_64 rng(4);
    const RowMatrix a = random_matrix(4, 2, rng);
    const RowMatrix b = random_matrix(2, 30, rng);
    const RowMatrix x = a * b;  // rank 2
    const auto f = svd_thin(x);
    EXPECT_EQ(f.rank(), 2u);
    const Eigen::MatrixXd pinv = pseudo_inverse_svd(f);
    const Eigen::MatrixXd p = pinv * x;
    EXPECT_LE(max_abs_diff(p * p, p), 1e-8);
    EXPECT_LE(penrose_residuals(x, pinv).worst(), 1e-8);
    EXPECT_THROW(pseudo_inverse_normal(x), NumericalError);
}

TEST(PseudoInverse, PenroseResidualsDetectWrongInverse) {
    std::mt19937_64 rng(5);
    const RowMatrix x = random_matrix(4, 60, rng);
    Eigen::MatrixXd pinv = pseudo_inverse_svd(svd_thin(x));
    pinv(3, 1) += 1e-3;
    EXPECT_GT(penrose_residuals(x, pinv).worst(), 1e-6);
}

TEST(LowRankProductNorm, MatchesDirectProduct) {
    std::mt19937_64 rng(6);
    const Eigen::MatrixXd l = random_matrix(300, 6, rng);
    const Eigen::MatrixXd r = random_matrix(300, 6, rng);
    const double direct = (l * r.transpose()).norm();
    EXPECT_NEAR(low_rank_product_norm(l, r), direct, 1e-10 * direct);
}

TEST(Energy, Profiles) {
    EXPECT_EQ(energy_profile(Eigen::VectorXd::Constant(1, 5.0)), Eigen::VectorXd::Constant(1, 100.0));
    const Eigen::Vector2d s(3, 1);
    const Eigen::VectorXd e = energy_profile(s);
    EXPECT_DOUBLE_EQ(e(0), 75.0);
    EXPECT_DOUBLE_EQ(e(1), 100.0);
    const Eigen::VectorXd sq = energy_profile(s, true);
    EXPECT_DOUBLE_EQ(sq(0), 90.0);

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.01, 10.0);
    for (int t = 0; t < 50; ++t) {
        Eigen::VectorXd sig(6);
        for (auto& v : sig) v = u(rng);
        std::sort(sig.begin(), sig.end(), std::greater<>());
        const auto prof = energy_profile(sig);
        for (int i = 1; i < 6; ++i) EXPECT_GE(prof(i), prof(i - 1));
        EXPECT_NEAR(prof(5), 100.0, 1e-12);
    }
}

TEST(Omega, KnownValuesAndMonotone) {
    EXPECT_NEAR(omega_beta(1.0), 2.86, 1e-12);
    EXPECT_NEAR(omega_beta(0.01), 1.448105560, 1e-9);
    double prev = 0.0;
    for (int i = 1; i <= 1000; ++i) {
        const double w = omega_beta(i / 1000.0);
        EXPECT_GT(w, prev);
        prev = w;
    }
    EXPECT_THROW(omega_beta(0.0), DomainError);
    EXPECT_THROW(omega_beta(1.5), DomainError);
}

TEST(Omega, OrientationIndependent) {
    std::mt19937_64 rng(8);
    const RowMatrix x = random_matrix(4, 40, rng);
    const double a = hard_threshold_value(svd_thin(x));
    EXPECT_NEAR(a, hard_threshold_value(svd_thin(x.transpose())), 1e-12 * a);
}

TEST(SelectRank, EnergyExamples) {
    const auto f = factors_with({89, 7, 3, 1}, 4, 400);
    EXPECT_EQ(select_rank(f, EnergyRule{90.0}), 2u);
    EXPECT_EQ(select_rank(f, EnergyRule{89.0}), 1u);
    EXPECT_EQ(select_rank(f, EnergyRule{90.0, 1.5}), 1u);
    EXPECT_EQ(select_rank(f, EnergyRule{99.0}), 3u);
    EXPECT_EQ(select_rank(f, EnergyRule{100.0}), 4u);
    EXPECT_EQ(select_rank(f, EnergyRule{99.0, 0.0, true}), 1u);
}

TEST(SelectRank, HardThresholdExamples) {
    const auto f = factors_with({100, 1, 1, 1}, 4, 400);
    for (auto sem : {HtSemantics::RankBound, HtSemantics::Count}) {
        EXPECT_EQ(select_rank(f, HardThresholdRule{sem}), 1u);
    }
    // Threshold above the rank count: full rank under the rank-bound reading.
    const auto big = factors_with({900, 300, 30, 10}, 4, 400);
    EXPECT_EQ(select_rank(big, HardThresholdRule{HtSemantics::RankBound}), 4u);
    EXPECT_EQ(select_rank(big, HardThresholdRule{HtSemantics::Count}), 2u);
}

TEST(SelectRank, FixedAndFull) {
    const auto f = factors_with({5, 4, 3, 2}, 4, 50);
    EXPECT_EQ(select_rank(f, FullRule{}), 4u);
    EXPECT_EQ(select_rank(f, FixedRule{2}), 2u);
    EXPECT_EQ(select_rank(f, FixedRule{9}), 4u);
    EXPECT_EQ(rule_label(EnergyRule{90}), "E90");
    EXPECT_EQ(rule_label(EnergyRule{99.5}), "E99.5");
    EXPECT_EQ(rule_label(HardThresholdRule{}), "HT");
    EXPECT_EQ(rule_label(FixedRule{3}), "r3");
}

TEST(Truncate, EckartYoungTail) {
    std::mt19937_64 rng(9);
    const RowMatrix x = random_matrix(4, 80, rng);
    const auto f = svd_thin(x);
    double prev = INFINITY;
    for (std::size_t r = 1; r <= 4; ++r) {
        const auto t = truncate(f, r);
        const Eigen::MatrixXd xr = t.u * t.sigma.asDiagonal() * t.v.transpose();
        const double err2 = (Eigen::MatrixXd(x) - xr).squaredNorm();
        const double tail = f.sigma.tail(4 - static_cast<Eigen::Index>(r)).squaredNorm();
        if (r < 4) EXPECT_NEAR(err2, tail, 1e-8 * tail);
        else EXPECT_LE(err2, 1e-20 * x.squaredNorm());
        EXPECT_LE(err2, prev);
        prev = err2;
    }
    EXPECT_THROW(truncate(f, 0), std::out_of_range);
    EXPECT_THROW(truncate(f, 5), std::out_of_range);
    const auto same = truncate(f, 4);
    EXPECT_EQ(same.u, f.u);
}

TEST(SystemMatrix, PlantedMapRecovered) {
    std::mt19937_64 rng(10);
    const Eigen::MatrixXd l = planted_map(4, rng);
    const auto pair = planted_pair(l, 200, rng);
    const auto model = full_system_matrix(pair);
    EXPECT_LE(max_abs_diff(model.a, l), 1e-8);
    EXPECT_EQ(model.rank_used, 4u);
    EXPECT_EQ(model.r_max, 4u);
    EXPECT_GT(model.timing_ns, 0);
}

TEST(SystemMatrix, SelfShiftActsAsIdentity) {
    std::mt19937_64 rng(11);
    SnapshotPair p;
    p.x = random_matrix(4, 25, rng);
    p.x_shift = p.x;
    const auto model = full_system_matrix(p);
    EXPECT_LE((model.a * Eigen::MatrixXd(p.x) - Eigen::MatrixXd(p.x)).norm(), 1e-8 * p.x.norm());
}

TEST(SystemMatrix, LeastSquaresOptimal) {
    std::mt19937_64 rng(12);
    SnapshotPair p;
    p.x = random_matrix(4, 60, rng);
    p.x_shift = random_matrix(4, 60, rng);
    const auto model = full_system_matrix(p);
    const Eigen::MatrixXd x = p.x, xs = p.x_shift;
    const double best = (xs - model.a * x).norm();
    for (int t = 0; t < 100; ++t) {
        const Eigen::MatrixXd m = model.a + Eigen::MatrixXd(random_matrix(4, 4, rng, 1e-3));
        EXPECT_LE(best, (xs - m * x).norm() + 1e-8);
    }
}

TEST(SystemMatrix, TruncationProperties) {
    std::mt19937_64 rng(13);
    SnapshotPair p;
    p.x = random_matrix(4, 90, rng);
    p.x_shift = random_matrix(4, 90, rng);
    const auto f = svd_thin(p.x);
    const auto full = full_system_matrix(p, f);
    const auto same = truncated_system_matrix(p, f, 4);
    EXPECT_LE(max_abs_diff(same.a, full.a), 1e-10);

    const auto r1 = truncated_system_matrix(p, f, 1);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(r1.a);
    EXPECT_LE(svd.singularValues()(1), 1e-8 * svd.singularValues()(0));
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            EXPECT_LE(std::abs(r1.a(i, j) * r1.a(i + 1, j + 1) - r1.a(i, j + 1) * r1.a(i + 1, j)), 1e-8);
        }
    }

    for (std::size_t r = 1; r <= 4; ++r) {
        const auto t = truncate(f, r);
        const Eigen::MatrixXd xr = t.u * t.sigma.asDiagonal() * t.v.transpose();
        const auto model = truncated_system_matrix(p, f, r);
        EXPECT_LE(max_abs_diff(model.a * xr, full.a * xr), 1e-8);
        EXPECT_EQ(model.rank_used, r);
    }
    EXPECT_THROW(truncated_system_matrix(p, f, 5), std::out_of_range);
}

TEST(SystemMatrix, FlopCountFollowsRank) {
    std::mt19937_64 rng(14);
    SnapshotPair p;
    p.x = random_matrix(4, 500, rng);
    p.x_shift = random_matrix(4, 500, rng);
    const auto f = svd_thin(p.x);
    SolveStats full, one;
    solve_system(p, f, 4, &full);
    solve_system(p, f, 1, &one);
    EXPECT_EQ(full.flops, solve_flops(4, 500, 4));
    EXPECT_EQ(one.flops, solve_flops(4, 500, 1));
    EXPECT_LT(one.flops, full.flops);
    EXPECT_EQ(solve_flops(4, 500, 2), 2u * 4 * 500 * 2 + 4 * 2 + 2 * 16 * 2);
}

TEST(Predict, IdentityLinearityAndMismatch) {
    IdentifiedModel eye;
    eye.a = Eigen::MatrixXd::Identity(4, 4);
    const Eigen::Vector4d u(1, 2, 3, 4), v(-1, 0.5, 2, 8);
    EXPECT_EQ(predict_next(eye, Eigen::VectorXd(u)), Eigen::VectorXd(u));

    std::mt19937_64 rng(15);
    IdentifiedModel m;
    m.a = random_matrix(4, 4, rng);
    const Eigen::VectorXd lhs = predict_next(m, Eigen::VectorXd(2.5 * u - 0.75 * v));
    const Eigen::VectorXd rhs = 2.5 * predict_next(m, Eigen::VectorXd(u)) - 0.75 * predict_next(m, Eigen::VectorXd(v));
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_THROW(predict_next(m, Eigen::VectorXd::Ones(3)), std::invalid_argument);
}

TEST(Rollout, ZeroStepsIdentityAndPlanted) {
    IdentifiedModel eye;
    eye.a = Eigen::MatrixXd::Identity(4, 4);
    const auto start = lift({1.5, 2.5}, BasisSpec::monomial(2));
    const auto zero = rollout(eye, start, 0);
    ASSERT_EQ(zero.size(), 1u);
    EXPECT_EQ(zero[0], (StatePoint{1.5, 2.5}));
    for (const auto& p : rollout(eye, start, 5)) EXPECT_EQ(p, (StatePoint{1.5, 2.5}));

    std::mt19937_64 rng(16);
    const Eigen::MatrixXd l = planted_map(4, rng);
    const auto model = full_system_matrix(planted_pair(l, 100, rng));
    const auto out = rollout(model, start, 1);
    const Eigen::VectorXd want = l * start.values;
    EXPECT_NEAR(out[1].s, want(0), 1e-8);
    EXPECT_NEAR(out[1].y, want(1), 1e-8);
}

TEST(Rollout, DivergenceReportsStep) {
    IdentifiedModel grow;
    grow.a = 1000.0 * Eigen::MatrixXd::Identity(4, 4);
    const auto start = lift({1.0, 1.0}, BasisSpec::monomial(2));
    try {
        rollout(grow, start, 10);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_EQ(e.step, 5u);
    }
}
