#pragma once

// KNN correctness baseline: a model's answer on an unseen question is the
// majority of its labels on the k nearest training questions. Exhaustive scan.

#include <algorithm>
#include <span>
#include <utility>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"

namespace embedllm {

enum class KnnDistance { squared_euclidean };

struct KNNConfig {
    std::size_t k = 5;
    KnnDistance distance = KnnDistance::squared_euclidean;
};

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] - b[i];
        d += t * t;
    }
    return d;
}

struct Neighbor {
    double distance;
    std::size_t question;
};

/// Every training question ordered by (distance, question id).
inline std::vector<Neighbor> rank_neighbors(const QuestionEmbeddingTable& embeddings,
                                            std::span<const std::size_t> train_questions,
                                            std::span<const double> query) {
    if (query.size() != embeddings.dim()) throw DomainError("query dim does not match embedding table");
    std::vector<Neighbor> ranked;
    ranked.reserve(train_questions.size());
    for (auto q : train_questions) ranked.push_back({squared_distance(embeddings.row(q), query), q});
    std::sort(ranked.begin(), ranked.end(), [](const Neighbor& a, const Neighbor& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.question < b.question;
    });
    return ranked;
}

/// Majority label of `model` over its first k labelled neighbours; even-k ties vote 1.
/// Returns -1 when fewer than k labelled neighbours exist.
inline int vote(const CorrectnessDataset& data, std::size_t model, std::span<const Neighbor> ranked, std::size_t k) {
    std::size_t used = 0, ones = 0;
    for (const auto& n : ranked) {
        const int y = data.label(model, n.question);
        if (y < 0) continue;
        ones += static_cast<std::size_t>(y);
        if (++used == k) break;
    }
    if (used < k) return -1;
    return 2 * ones >= k ? 1 : 0;
}

inline int knn_predict(const CorrectnessDataset& data, const QuestionEmbeddingTable& embeddings,
                       std::span<const std::size_t> train_questions, std::size_t model,
                       std::span<const double> query, const KNNConfig& config) {
    if (config.k < 1) throw ConfigError("k must be >= 1");
    if (model >= data.model_count()) throw DomainError("model id out of range");
    const auto ranked = rank_neighbors(embeddings, train_questions, query);
    const int y = vote(data, model, ranked, config.k);
    if (y < 0)
        throw ConfigError("k=" + std::to_string(config.k) + " exceeds the labelled training questions of model '" +
                          data.model_keys()[model] + "'");
    return y;
}

/// Accuracy of every k in `ks` over the records of `eval_questions`, sharing one scan per question.
inline std::vector<double> knn_accuracies(const CorrectnessDataset& data, const QuestionEmbeddingTable& embeddings,
                                          std::span<const std::size_t> train_questions,
                                          std::span<const std::size_t> eval_questions,
                                          std::span<const std::size_t> ks) {
    if (eval_questions.empty()) throw DomainError("knn: empty evaluation set");
    for (auto k : ks)
        if (k < 1) throw ConfigError("k must be >= 1");
    std::vector<std::size_t> correct(ks.size(), 0);
    std::size_t seen = 0;
    for (auto q : eval_questions) {
        const auto ranked = rank_neighbors(embeddings, train_questions, embeddings.row(q));
        for (std::size_t m = 0; m < data.model_count(); ++m) {
            const int y = data.label(m, q);
            if (y < 0) continue;
            ++seen;
            for (std::size_t i = 0; i < ks.size(); ++i) {
                const int pred = vote(data, m, ranked, ks[i]);
                if (pred < 0)
                    throw ConfigError("k=" + std::to_string(ks[i]) +
                                      " exceeds the labelled training questions of model '" +
                                      data.model_keys()[m] + "'");
                correct[i] += pred == y;
            }
        }
    }
    if (seen == 0) throw DomainError("knn: evaluation set has no records");
    std::vector<double> acc(ks.size());
    for (std::size_t i = 0; i < ks.size(); ++i) acc[i] = static_cast<double>(correct[i]) / static_cast<double>(seen);
    return acc;
}

/// Fraction of test records predicted correctly from the train questions.
inline double knn_accuracy(const CorrectnessDataset& data, const QuestionEmbeddingTable& embeddings,
                           const SplitAssignment& split, const KNNConfig& config) {
    if (split.test.empty()) throw DomainError("knn_accuracy: empty test set");
    const std::size_t ks[] = {config.k};
    return knn_accuracies(data, embeddings, split.train, split.test, ks)[0];
}

}  // namespace embedllm
