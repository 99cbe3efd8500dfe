#pragma once

// Benchmark accuracy prediction from model embeddings: ridge regression on
// embeddings, Kendall's tau-b between predicted and actual accuracies on
// held-out models, repeated over random model splits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "random.hpp"

namespace embedllm {

struct RegressionModel {
    Vector weights;
    double intercept = 0.0;
    double lambda = 0.0;

    double predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const { return row.dot(weights) + intercept; }
};

/// Minimizes (1/N) Σ (y_i - e_i·a - b)² + λ ||a||², intercept unpenalized.
/// λ = 0 takes the minimum-norm least-squares solution, so rank deficiency
/// (more features than models, duplicate rows) never throws.
inline RegressionModel fit_regression(const Matrix& features, std::span<const double> targets, double lambda) {
    const auto n = features.rows();
    if (n < 2) throw DomainError("fit_regression: need at least 2 training rows");
    if (static_cast<std::size_t>(n) != targets.size()) throw DomainError("fit_regression: row/target count mismatch");
    if (!(lambda >= 0.0)) throw DomainError("fit_regression: lambda must be >= 0");
    for (double y : targets)
        if (!(y >= 0.0 && y <= 1.0)) throw DomainError("fit_regression: targets must lie in [0, 1]");
    if (!features.allFinite()) throw NumericError("fit_regression: non-finite feature");

    const Eigen::Map<const Vector> y(targets.data(), n);
    const Eigen::RowVectorXd mean_row = features.colwise().mean();
    const double mean_y = y.mean();
    const Matrix centered = features.rowwise() - mean_row;
    const Vector yc = y.array() - mean_y;

    RegressionModel model;
    model.lambda = lambda;
    if (lambda > 0.0) {
        const auto d = features.cols();
        const double inv_n = 1.0 / static_cast<double>(n);
        Matrix gram = centered.transpose() * centered * inv_n;
        gram.diagonal().array() += lambda;
        const Vector rhs = centered.transpose() * yc * inv_n;
        model.weights = gram.ldlt().solve(rhs);
        if (model.weights.size() != d || !model.weights.allFinite())
            throw NumericError("fit_regression: ridge solve failed");
    } else {
        model.weights = centered.completeOrthogonalDecomposition().solve(yc);
    }
    model.intercept = mean_y - mean_row.dot(model.weights);
    return model;
}

// ---------------------------------------------------------------------------
// Kendall's tau-b

struct KendallResult {
    double tau = 0.0;
    double p_value = 1.0;
    std::int64_t score = 0;  // concordant - discordant
    std::int64_t pairs = 0;  // n(n-1)/2
    std::int64_t x_ties = 0;
    std::int64_t y_ties = 0;
    std::int64_t joint_ties = 0;
};

namespace detail {

struct TieSums {
    std::int64_t pairs = 0;  // Σ t(t-1)/2
    double cubic = 0.0;      // Σ t(t-1)(t-2)
    double variance = 0.0;   // Σ t(t-1)(2t+5)
};

inline TieSums tie_sums(std::span<const double> sorted) {
    TieSums s;
    std::size_t i = 0;
    while (i < sorted.size()) {
        std::size_t j = i + 1;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        const auto t = static_cast<std::int64_t>(j - i);
        if (t > 1) {
            const auto td = static_cast<double>(t);
            s.pairs += t * (t - 1) / 2;
            s.cubic += td * (td - 1.0) * (td - 2.0);
            s.variance += td * (td - 1.0) * (2.0 * td + 5.0);
        }
        i = j;
    }
    return s;
}

/// Stable merge sort of `v` counting pairs i < j with v[i] > v[j].
inline std::int64_t count_inversions(std::vector<double>& v) {
    std::vector<double> buf(v.size());
    std::int64_t swaps = 0;
    for (std::size_t width = 1; width < v.size(); width *= 2) {
        for (std::size_t lo = 0; lo < v.size(); lo += 2 * width) {
            const std::size_t mid = std::min(lo + width, v.size());
            const std::size_t hi = std::min(lo + 2 * width, v.size());
            std::size_t a = lo, b = mid, k = lo;
            while (a < mid && b < hi) {
                if (v[b] < v[a]) {
                    swaps += static_cast<std::int64_t>(mid - a);
                    buf[k++] = v[b++];
                } else {
                    buf[k++] = v[a++];
                }
            }
            while (a < mid) buf[k++] = v[a++];
            while (b < hi) buf[k++] = v[b++];
        }
        v.swap(buf);
    }
    return swaps;
}

}  // namespace detail

/// Tau-b and its two-sided p-value from the normal approximation of the
/// tie-corrected variance of S = concordant - discordant. O(n log n).
inline KendallResult kendall_tau(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DomainError("kendall_tau: length mismatch");
    if (x.size() < 2) throw DomainError("kendall_tau: need at least 2 observations");
    for (std::size_t i = 0; i < x.size(); ++i)
        if (std::isnan(x[i]) || std::isnan(y[i])) throw DomainError("kendall_tau: NaN input");

    const std::size_t n = x.size();
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return x[a] != x[b] ? x[a] < x[b] : y[a] < y[b];
    });
    std::vector<double> xs(n), ys(n);
    for (std::size_t i = 0; i < n; ++i) {
        xs[i] = x[idx[i]];
        ys[i] = y[idx[i]];
    }

    KendallResult r;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i + 1;
        while (j < n && xs[j] == xs[i] && ys[j] == ys[i]) ++j;
        const auto t = static_cast<std::int64_t>(j - i);
        r.joint_ties += t * (t - 1) / 2;
        i = j;
    }
    const auto xt = detail::tie_sums(xs);
    const std::int64_t discordant = detail::count_inversions(ys);
    const auto yt = detail::tie_sums(ys);

    const auto nn = static_cast<std::int64_t>(n);
    r.pairs = nn * (nn - 1) / 2;
    r.x_ties = xt.pairs;
    r.y_ties = yt.pairs;
    if (r.x_ties == r.pairs || r.y_ties == r.pairs) throw UndefinedTauError("kendall_tau: a sequence is fully tied");
    r.score = r.pairs - r.x_ties - r.y_ties + r.joint_ties - 2 * discordant;
    r.tau = static_cast<double>(r.score) / std::sqrt(static_cast<double>(r.pairs - r.x_ties)) /
            std::sqrt(static_cast<double>(r.pairs - r.y_ties));
    r.tau = std::clamp(r.tau, -1.0, 1.0);

    const double nd = static_cast<double>(n);
    const double m = nd * (nd - 1.0);
    double var = (m * (2.0 * nd + 5.0) - xt.variance - yt.variance) / 18.0 +
                 2.0 * static_cast<double>(r.x_ties) * static_cast<double>(r.y_ties) / m;
    if (n > 2) var += xt.cubic * yt.cubic / (9.0 * m * (nd - 2.0));
    const double z = static_cast<double>(r.score) / std::sqrt(var);
    r.p_value = std::erfc(std::abs(z) / std::sqrt(2.0));
    return r;
}

// ---------------------------------------------------------------------------
// Repeated model splits

struct SplitOutcome {
    double tau;      // NaN when predictions or targets are fully tied
    double p_value;  // 1 in that case
    double test_mse;
};

struct BenchmarkPredictionReport {
    std::string benchmark;
    std::size_t n_splits = 0;
    std::size_t significance_count = 0;
    double mean_test_mse = 0.0;
    double total_test_mse = 0.0;
    double lambda = 0.0;
    std::uint64_t seed = 0;
    std::vector<SplitOutcome> splits;
};

struct SplitProtocol {
    std::size_t n_splits = 100;
    double lambda = 1e-2;
    double train_fraction = 0.8;
    double alpha = 0.05;
    std::uint64_t seed = 0;
};

/// Fit on a random train fraction of models, rank-correlate predictions with
/// the truth on the rest, repeat. Each split draws from its own stream
/// derive_seed(seed, {split}).
inline BenchmarkPredictionReport evaluate_splits(const Matrix& embeddings, std::span<const double> accuracies,
                                                 const SplitProtocol& protocol) {
    const auto m = static_cast<std::size_t>(embeddings.rows());
    if (accuracies.size() != m) throw DomainError("evaluate_splits: one accuracy per model required");
    if (!(protocol.train_fraction > 0.0 && protocol.train_fraction < 1.0))
        throw ConfigError("train_fraction must lie in (0, 1)");
    const double ratios[2] = {protocol.train_fraction, 1.0 - protocol.train_fraction};
    const auto sizes = apportion(m, ratios);
    if (sizes[1] < 2)
        throw SplitError("held-out side has " + std::to_string(sizes[1]) + " models; at least 2 are required");
    if (sizes[0] < 2) throw SplitError("training side has fewer than 2 models");

    BenchmarkPredictionReport report;
    report.n_splits = protocol.n_splits;
    report.lambda = protocol.lambda;
    report.seed = protocol.seed;
    std::vector<std::size_t> order(m);
    for (std::size_t s = 0; s < protocol.n_splits; ++s) {
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(protocol.seed, {0x4d4f44454cULL, s}));
        rng.shuffle(std::span<std::size_t>(order));

        Matrix train_x(static_cast<Eigen::Index>(sizes[0]), embeddings.cols());
        std::vector<double> train_y(sizes[0]);
        for (std::size_t i = 0; i < sizes[0]; ++i) {
            train_x.row(static_cast<Eigen::Index>(i)) = embeddings.row(static_cast<Eigen::Index>(order[i]));
            train_y[i] = accuracies[order[i]];
        }
        const auto model = fit_regression(train_x, train_y, protocol.lambda);

        std::vector<double> predicted, actual;
        double se = 0.0;
        for (std::size_t i = sizes[0]; i < m; ++i) {
            const double p = model.predict(embeddings.row(static_cast<Eigen::Index>(order[i])));
            predicted.push_back(p);
            actual.push_back(accuracies[order[i]]);
            se += (p - actual.back()) * (p - actual.back());
        }
        SplitOutcome outcome{std::numeric_limits<double>::quiet_NaN(), 1.0, se / static_cast<double>(actual.size())};
        try {
            const auto k = kendall_tau(predicted, actual);
            outcome.tau = k.tau;
            outcome.p_value = k.p_value;
        } catch (const UndefinedTauError&) {
            // A constant ranking carries no evidence; counted as not significant.
        }
        if (outcome.p_value < protocol.alpha) ++report.significance_count;
        report.total_test_mse += outcome.test_mse;
        report.splits.push_back(outcome);
    }
    if (protocol.n_splits > 0) report.mean_test_mse = report.total_test_mse / static_cast<double>(protocol.n_splits);
    return report;
}

/// Predict per-model accuracy on `target` from embeddings trained without it.
inline BenchmarkPredictionReport predict_benchmark(const CorrectnessDataset& data, const Matrix& model_embeddings,
                                                   const std::string& target, const SplitProtocol& protocol) {
    if (static_cast<std::size_t>(model_embeddings.rows()) != data.model_count())
        throw DomainError("predict_benchmark: one embedding row per model required");
    const std::size_t b[] = {data.benchmark_index(target)};
    const auto questions = data.questions_in(b);
    const auto accuracies = accuracy_by_model(data, questions);
    auto report = evaluate_splits(model_embeddings, accuracies, protocol);
    report.benchmark = target;
    return report;
}

}  // namespace embedllm
