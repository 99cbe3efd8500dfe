#pragma once

// Correctness-score routing: send each question to the model with the
// highest predicted correctness, and compare against the single-best model
// and the frequency-matched random router.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "mf.hpp"

namespace embedllm {

struct AccuracyTriple {
    double mf = 0.0;
    double single_best = 0.0;
    double weighted_random = 0.0;
};

struct BenchmarkAccuracy {
    std::string benchmark;
    std::size_t questions = 0;
    AccuracyTriple accuracy;
    std::size_t single_best_model = 0;
};

struct RouterReport {
    AccuracyTriple overall;
    std::size_t single_best_model = 0;
    double oracle_ceiling = 0.0;  // fraction of questions some model answers correctly
    std::vector<BenchmarkAccuracy> per_benchmark;
    std::vector<double> selection_frequencies;  // π, one entry per model
    std::vector<std::size_t> questions;         // evaluated question ids
    std::vector<std::size_t> routed_model;      // parallel to `questions`
};

namespace detail {

/// Argmax over `models` of a key; ties go to the lowest model index.
template <typename Key>
std::size_t argmax_model(std::span<const std::size_t> models, Key&& key) {
    std::size_t best = models[0];
    double best_key = key(best);
    for (std::size_t i = 1; i < models.size(); ++i) {
        const double k = key(models[i]);
        if (k > best_key || (k == best_key && models[i] < best)) {
            best = models[i];
            best_key = k;
        }
    }
    return best;
}

}  // namespace detail

/// Model with the highest correctness score for one question.
inline std::size_t route(const MFParams& params, std::span<const double> q, std::span<const std::size_t> models) {
    if (models.empty()) throw DomainError("route: empty model set");
    check_question(params, q);
    for (auto m : models)
        if (m >= params.model_count()) throw DomainError("route: model id out of range");
    const Vector p = project(params, q);
    const Eigen::RowVectorXd diff = params.head_weight.row(1) - params.head_weight.row(0);
    return detail::argmax_model(models, [&](std::size_t m) {
        return diff.dot(params.model_table.row(static_cast<Eigen::Index>(m)).cwiseProduct(p.transpose()));
    });
}

/// Route every row of `questions` (n x d_q) in one pass.
inline std::vector<std::size_t> route_batch(const MFParams& params, const Matrix& questions,
                                            std::span<const std::size_t> models) {
    if (questions.rows() == 0) return {};
    if (models.empty()) throw DomainError("route: empty model set");
    for (auto m : models)
        if (m >= params.model_count()) throw DomainError("route: model id out of range");
    const Scorer scorer(params, questions);
    const Matrix keys = scorer.keys();
    std::vector<std::size_t> out(static_cast<std::size_t>(questions.rows()));
    for (Eigen::Index q = 0; q < keys.rows(); ++q)
        out[static_cast<std::size_t>(q)] =
            detail::argmax_model(models, [&](std::size_t m) { return keys(q, static_cast<Eigen::Index>(m)); });
    return out;
}

struct TimedRouting {
    std::vector<std::size_t> assignments;
    double median_seconds = 0.0;
    std::vector<double> samples;
};

inline TimedRouting route_batch_timed(const MFParams& params, const Matrix& questions,
                                      std::span<const std::size_t> models, std::size_t repeats = 50) {
    TimedRouting out;
    const std::size_t runs = std::max<std::size_t>(repeats, 1);
    for (std::size_t r = 0; r < runs; ++r) {
        const auto start = std::chrono::steady_clock::now();
        auto assignments = route_batch(params, questions, models);
        const auto stop = std::chrono::steady_clock::now();
        out.samples.push_back(std::chrono::duration<double>(stop - start).count());
        if (r == 0) out.assignments = std::move(assignments);
    }
    auto sorted = out.samples;
    std::sort(sorted.begin(), sorted.end());
    const auto n = sorted.size();
    out.median_seconds = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    return out;
}

/// Σ π_i acc_i, the expected accuracy of a router that spends the same
/// per-model call budget as the MF router but assigns questions at random.
inline double weighted_expected_accuracy(std::span<const double> frequencies, std::span<const double> accuracies) {
    if (frequencies.size() != accuracies.size()) throw DomainError("frequency/accuracy length mismatch");
    double total = 0.0;
    for (std::size_t i = 0; i < frequencies.size(); ++i) total += frequencies[i] * accuracies[i];
    return total;
}

namespace detail {

struct SliceResult {
    AccuracyTriple accuracy;
    std::size_t single_best_model = 0;
    std::size_t ceiling_hits = 0;
};

/// Accuracies over a question slice from integer counts, so that
/// weighted_random <= single_best holds exactly in floating point.
inline SliceResult score_slice(const CorrectnessDataset& data, std::span<const std::size_t> questions,
                               std::span<const std::size_t> routed) {
    const std::size_t m = data.model_count();
    const auto Q = static_cast<std::uint64_t>(questions.size());
    std::vector<std::uint64_t> correct(m, 0), chosen(m, 0);
    std::uint64_t routed_correct = 0;
    SliceResult out;
    for (std::size_t k = 0; k < questions.size(); ++k) {
        bool any = false;
        for (std::size_t i = 0; i < m; ++i) {
            const int y = data.label(i, questions[k]);
            correct[i] += static_cast<std::uint64_t>(y);
            any = any || y == 1;
        }
        out.ceiling_hits += any;
        ++chosen[routed[k]];
        routed_correct += static_cast<std::uint64_t>(data.label(routed[k], questions[k]));
    }
    std::uint64_t best = 0, weighted = 0;
    for (std::size_t i = 0; i < m; ++i) {
        if (correct[i] > best) {
            best = correct[i];
            out.single_best_model = i;
        }
        weighted += chosen[i] * correct[i];
    }
    const double q = static_cast<double>(Q);
    out.accuracy.mf = static_cast<double>(routed_correct) / q;
    out.accuracy.single_best = static_cast<double>(best) / q;
    out.accuracy.weighted_random = static_cast<double>(weighted) / (q * q);
    return out;
}

}  // namespace detail

/// Route every test question over all models and score the three routers,
/// overall and per benchmark (single-best re-selected within each benchmark).
inline RouterReport router_accuracy(const MFParams& params, const CorrectnessDataset& data,
                                    const QuestionEmbeddingTable& embeddings,
                                    std::span<const std::size_t> test_questions) {
    if (test_questions.empty()) throw DomainError("router_accuracy: empty test set");
    if (params.model_count() != data.model_count()) throw DomainError("parameters and dataset disagree on models");
    for (auto q : test_questions)
        for (std::size_t i = 0; i < data.model_count(); ++i)
            if (!data.has_label(i, q))
                throw CoverageError("model '" + data.model_keys()[i] + "' has no label for test question '" +
                                    data.question_keys()[q] + "'");

    Matrix qs(static_cast<Eigen::Index>(test_questions.size()), static_cast<Eigen::Index>(embeddings.dim()));
    for (std::size_t k = 0; k < test_questions.size(); ++k)
        qs.row(static_cast<Eigen::Index>(k)) = embeddings.vectors.row(static_cast<Eigen::Index>(test_questions[k]));
    std::vector<std::size_t> all(data.model_count());
    std::iota(all.begin(), all.end(), 0);

    RouterReport report;
    report.questions.assign(test_questions.begin(), test_questions.end());
    report.routed_model = route_batch(params, qs, all);

    const auto overall = detail::score_slice(data, report.questions, report.routed_model);
    report.overall = overall.accuracy;
    report.single_best_model = overall.single_best_model;
    report.oracle_ceiling = static_cast<double>(overall.ceiling_hits) / static_cast<double>(test_questions.size());
    report.selection_frequencies.assign(data.model_count(), 0.0);
    for (auto m : report.routed_model) report.selection_frequencies[m] += 1.0;
    for (auto& f : report.selection_frequencies) f /= static_cast<double>(test_questions.size());

    for (std::size_t b = 0; b < data.benchmarks().size(); ++b) {
        std::vector<std::size_t> qb, rb;
        for (std::size_t k = 0; k < report.questions.size(); ++k)
            if (data.question_benchmark(report.questions[k]) == b) {
                qb.push_back(report.questions[k]);
                rb.push_back(report.routed_model[k]);
            }
        if (qb.empty()) continue;
        const auto slice = detail::score_slice(data, qb, rb);
        report.per_benchmark.push_back({data.benchmarks()[b], qb.size(), slice.accuracy, slice.single_best_model});
    }
    return report;
}

}  // namespace embedllm
