#include <gtest/gtest.h>

#include <cmath>

#include <embedllm/regression.hpp>
#include <embedllm/synthgen.hpp>

#include "oracles.hpp"

using namespace embedllm;

namespace {

Matrix random_matrix(std::uint64_t seed, Eigen::Index rows, Eigen::Index cols) {
    Rng rng(seed);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

/// Targets affine in E, rescaled into [0.1, 0.9].
std::vector<double> linear_targets(const Matrix& e, std::uint64_t seed) {
    Rng rng(seed);
    Vector a(e.cols());
    for (Eigen::Index k = 0; k < a.size(); ++k) a(k) = rng.normal();
    const Vector raw = e * a;
    const double lo = raw.minCoeff(), hi = raw.maxCoeff();
    std::vector<double> y(static_cast<std::size_t>(raw.size()));
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.1 + 0.8 * (raw(static_cast<Eigen::Index>(i)) - lo) / (hi - lo);
    return y;
}

void expect_kendall(const std::vector<double>& x, const std::vector<double>& y, double tau, double p) {
    const auto r = kendall_tau(x, y);
    EXPECT_NEAR(r.tau, tau, 1e-14);
    EXPECT_NEAR(r.p_value, p, 1e-12 * std::max(1.0, p) + 1e-15);
}

}  // namespace

TEST(FitRegression, RecoversOneDimensionalLine) {
    Matrix e(3, 1);
    e << 1, 2, 3;
    const std::vector<double> y = {0.2, 0.4, 0.6};
    const auto m = fit_regression(e, y, 0.0);
    EXPECT_NEAR(m.weights(0), 0.2, 1e-14);
    EXPECT_NEAR(m.intercept, 0.0, 1e-14);
    Eigen::RowVectorXd four(1);
    four << 4.0;
    EXPECT_NEAR(m.predict(four), 0.8, 1e-14);
}

TEST(FitRegression, ConstantTargetsGiveZeroWeights) {
    const auto e = random_matrix(1, 10, 4);
    const std::vector<double> y(10, 0.37);
    for (double lambda : {0.0, 1e-2, 1.0}) {
        const auto m = fit_regression(e, y, lambda);
        EXPECT_LT(m.weights.norm(), 1e-12);
        EXPECT_NEAR(m.intercept, 0.37, 1e-12);
    }
}

TEST(FitRegression, MatchesNormalEquationOracle) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Eigen::Index n = 8 + static_cast<Eigen::Index>(seed) * 3, d = 2 + static_cast<Eigen::Index>(seed % 5);
        const auto e = random_matrix(seed, n, d);
        const auto y = linear_targets(random_matrix(seed + 100, n, d), seed);
        for (double lambda : {1e-3, 1e-2, 0.5}) {
            const auto m = fit_regression(e, y, lambda);
            const auto o = oracle::ridge(e, y, lambda);
            for (Eigen::Index k = 0; k < d; ++k) EXPECT_NEAR(m.weights(k), o[static_cast<std::size_t>(k)], 1e-8);
            EXPECT_NEAR(m.intercept, o.back(), 1e-8);
        }
    }
}

TEST(FitRegression, DuplicatingRowsLeavesWeightsUnchanged) {
    const auto e = random_matrix(3, 12, 5);
    const auto y = linear_targets(random_matrix(4, 12, 5), 5);
    Matrix twice(24, 5);
    twice << e, e;
    std::vector<double> yy = y;
    yy.insert(yy.end(), y.begin(), y.end());
    for (double lambda : {1e-3, 1e-2, 1.0}) {
        const auto a = fit_regression(e, y, lambda), b = fit_regression(twice, yy, lambda);
        EXPECT_TRUE(a.weights.isApprox(b.weights, 1e-10));
        EXPECT_NEAR(a.intercept, b.intercept, 1e-10);
    }
}

TEST(FitRegression, ZeroLambdaTakesMinimumNormOnRankDeficientInput) {
    // Two identical columns: any (a, 2-a) interpolates, the minimum-norm answer is (1, 1).
    Matrix e(4, 2);
    e << 0.1, 0.1, 0.2, 0.2, 0.3, 0.3, 0.4, 0.4;
    const std::vector<double> y = {0.2, 0.4, 0.6, 0.8};
    const auto m = fit_regression(e, y, 0.0);
    EXPECT_NEAR(m.weights(0), 1.0, 1e-12);
    EXPECT_NEAR(m.weights(1), 1.0, 1e-12);
    EXPECT_NEAR(m.intercept, 0.0, 1e-12);

    // More features than rows: exact interpolation with weights orthogonal to the null space.
    const auto wide = random_matrix(9, 4, 7);
    const std::vector<double> t = {0.1, 0.5, 0.9, 0.3};
    const auto w = fit_regression(wide, t, 0.0);
    for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(w.predict(wide.row(i)), t[static_cast<std::size_t>(i)], 1e-10);
    const Matrix centered = wide.rowwise() - wide.colwise().mean();
    const Matrix kernel = Eigen::FullPivLU<Matrix>(centered).kernel();
    EXPECT_LT((kernel.transpose() * w.weights).norm(), 1e-10);
}

TEST(FitRegression, Errors) {
    Matrix one(1, 2);
    one << 1, 2;
    EXPECT_THROW(fit_regression(one, std::vector<double>{0.5}, 0.1), DomainError);
    const auto e = random_matrix(1, 3, 2);
    EXPECT_THROW(fit_regression(e, std::vector<double>{0.5, 1.5, 0.2}, 0.1), DomainError);
    EXPECT_THROW(fit_regression(e, std::vector<double>{0.5, 0.5, 0.2}, -1.0), DomainError);
    EXPECT_THROW(fit_regression(e, std::vector<double>{0.5, 0.5}, 0.1), DomainError);
}

TEST(Kendall, MatchesReferenceValues) {
    expect_kendall({1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, {2, 1, 4, 3, 6, 5, 8, 7, 10, 9}, 0.7777777777777777,
                   0.001745118699528905);
    expect_kendall({1, 1, 2, 2, 3, 3, 4, 5, 5, 6}, {1, 2, 2, 3, 3, 3, 5, 4, 6, 6}, 0.8642633970683908,
                   0.001142796855306664);
    expect_kendall({0.3, -1.2, 2.5, 0.7, 0.0, 1.1, -0.4, 3.3}, {0.1, -0.5, 1.9, 0.2, 0.4, 0.8, -0.9, 2.0},
                   0.7857142857142856, 0.006492857745083887);
    expect_kendall({1, 1, 2}, {3, 4, 5}, 0.816496580927726, 0.22067136191984693);
    expect_kendall({5, 3, 1, 4, 2, 6, 7}, {1, 4, 6, 2, 5, 3, 0}, -0.8095238095238096, 0.01067401811831371);
    expect_kendall({1, 2}, {1, 2}, 1.0, 0.31731050786291415);
}

TEST(Kendall, MatchesPairEnumeration) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng.below(60);
        const std::size_t levels = 1 + rng.below(12);
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = static_cast<double>(rng.below(levels + 1));
            y[i] = static_cast<double>(rng.below(levels + 2));
        }
        const auto c = oracle::count_pairs(x, y);
        const std::int64_t total = static_cast<std::int64_t>(n * (n - 1) / 2);
        if (c.x_only_ties + c.joint_ties == total || c.y_only_ties + c.joint_ties == total) {
            EXPECT_THROW(kendall_tau(x, y), UndefinedTauError);
            continue;
        }
        const auto r = kendall_tau(x, y);
        EXPECT_EQ(r.score, c.concordant - c.discordant);
        EXPECT_EQ(r.joint_ties, c.joint_ties);
        EXPECT_EQ(r.x_ties, c.x_only_ties + c.joint_ties);
        EXPECT_EQ(r.y_ties, c.y_only_ties + c.joint_ties);
        EXPECT_DOUBLE_EQ(r.tau, oracle::tau_b(c));
    }
}

TEST(Kendall, NegatingOneSideFlipsTheSign) {
    Rng rng(12);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 3 + rng.below(40);
        std::vector<double> x(n), y(n), neg(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = static_cast<double>(rng.below(5));
            y[i] = rng.normal();
            neg[i] = -y[i];
        }
        if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
        const auto a = kendall_tau(x, y), b = kendall_tau(x, neg);
        EXPECT_DOUBLE_EQ(a.tau, -b.tau);
        EXPECT_DOUBLE_EQ(a.p_value, b.p_value);
    }
}

TEST(Kendall, Errors) {
    EXPECT_THROW(kendall_tau(std::vector<double>{1, 2}, std::vector<double>{1}), DomainError);
    EXPECT_THROW(kendall_tau(std::vector<double>{1}, std::vector<double>{1}), DomainError);
    EXPECT_THROW(kendall_tau(std::vector<double>{1, NAN}, std::vector<double>{1, 2}), DomainError);
    EXPECT_THROW(kendall_tau(std::vector<double>{3, 3, 3}, std::vector<double>{1, 2, 3}), UndefinedTauError);
}

TEST(EvaluateSplits, DeterministicForFixedSeed) {
    const auto e = random_matrix(20, 30, 4);
    const auto y = linear_targets(random_matrix(21, 30, 4), 22);
    SplitProtocol p;
    p.n_splits = 25;
    p.seed = 8;
    const auto a = evaluate_splits(e, y, p), b = evaluate_splits(e, y, p);
    ASSERT_EQ(a.splits.size(), 25u);
    for (std::size_t s = 0; s < 25; ++s) {
        EXPECT_EQ(std::isnan(a.splits[s].tau), std::isnan(b.splits[s].tau));
        if (!std::isnan(a.splits[s].tau)) EXPECT_EQ(a.splits[s].tau, b.splits[s].tau);
        EXPECT_EQ(a.splits[s].test_mse, b.splits[s].test_mse);
    }
    EXPECT_EQ(a.significance_count, b.significance_count);
    EXPECT_LE(a.significance_count, a.n_splits);
    p.seed = 9;
    EXPECT_NE(evaluate_splits(e, y, p).total_test_mse, a.total_test_mse);
}

TEST(EvaluateSplits, TooFewHeldOutModels) {
    const auto e = random_matrix(1, 4, 2);
    SplitProtocol p;
    p.n_splits = 3;
    EXPECT_THROW(evaluate_splits(e, std::vector<double>{0.1, 0.2, 0.3, 0.4}, p), SplitError);
    const auto ten = random_matrix(2, 10, 2);
    EXPECT_NO_THROW(evaluate_splits(ten, linear_targets(ten, 3), p));
}

TEST(EvaluateSplits, LinearWorldIsAlwaysSignificant) {
    const auto e = random_matrix(30, 112, 8);
    const auto y = linear_targets(e, 31);
    SplitProtocol p;
    p.lambda = 1e-6;
    const auto r = evaluate_splits(e, y, p);
    EXPECT_EQ(r.significance_count, 100u);
    EXPECT_LT(r.mean_test_mse, 1e-6);
}

TEST(PredictBenchmark, UsesPerModelAccuracyOnTheTarget) {
    WorldConfig wc;
    wc.models = 30;
    wc.questions = 200;
    wc.benchmarks = 2;
    wc.seed = 4;
    const auto w = generate(wc);
    SplitProtocol p;
    p.n_splits = 10;
    const auto r = predict_benchmark(w.data, w.truth.model_table, "bench_1", p);
    EXPECT_EQ(r.benchmark, "bench_1");
    const std::size_t b[] = {1};
    const auto direct = evaluate_splits(w.truth.model_table, accuracy_by_model(w.data, w.data.questions_in(b)), p);
    EXPECT_EQ(r.total_test_mse, direct.total_test_mse);
    EXPECT_THROW(predict_benchmark(w.data, w.truth.model_table, "nope", p), Error);
}
