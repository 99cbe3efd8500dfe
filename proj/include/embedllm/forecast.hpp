#pragma once

// Correctness-forecasting experiments: tune MF (embedding dim) and KNN (k) on
// the validation questions, report test accuracy, across nested random
// subsets of the training questions.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "knn.hpp"
#include "mf.hpp"

namespace embedllm {

struct TuneResult {
    std::size_t best = 0;  // embedding dim for MF, k for KNN
    double validation_accuracy = 0.0;
    double test_accuracy = 0.0;
};

/// Train one model per candidate embedding dim; keep the best on validation (first wins ties).
inline TuneResult tune_mf(const CorrectnessDataset& data, const QuestionEmbeddingTable& embeddings,
                          const SplitAssignment& split, const TrainConfig& base,
                          std::span<const std::size_t> dims) {
    if (dims.empty()) throw ConfigError("tune_mf: no candidate embedding dims");
    if (split.validation.empty() || split.test.empty())
        throw DomainError("tune_mf: needs validation and test questions");
    TuneResult best{0, -1.0, 0.0};
    for (auto d : dims) {
        TrainConfig c = base;
        c.embedding_dim = d;
        const auto result = train(data, embeddings, split, c);
        const double val = test_accuracy(result.params, data, embeddings, split.validation);
        if (val > best.validation_accuracy)
            best = {d, val, test_accuracy(result.params, data, embeddings, split.test)};
    }
    return best;
}

/// Candidate ks larger than the training set are skipped.
inline TuneResult tune_knn(const CorrectnessDataset& data, const QuestionEmbeddingTable& embeddings,
                           const SplitAssignment& split, std::span<const std::size_t> ks) {
    std::vector<std::size_t> usable;
    for (auto k : ks)
        if (k >= 1 && k <= split.train.size()) usable.push_back(k);
    if (usable.empty()) throw ConfigError("tune_knn: no candidate k fits the training set");
    const auto val = knn_accuracies(data, embeddings, split.train, split.validation, usable);
    const auto it = std::max_element(val.begin(), val.end());
    const auto i = static_cast<std::size_t>(it - val.begin());
    const std::size_t k[] = {usable[i]};
    return {usable[i], *it, knn_accuracies(data, embeddings, split.train, split.test, k)[0]};
}

/// First `size` questions of a seeded permutation of `train`; smaller sizes
/// are prefixes of larger ones, so subsets nest.
inline std::vector<std::size_t> nested_subset(std::vector<std::size_t> train, std::size_t size, std::uint64_t seed) {
    if (size > train.size())
        throw ConfigError("subset size " + std::to_string(size) + " exceeds the " + std::to_string(train.size()) +
                          " training questions");
    Rng rng(derive_seed(seed, {0x535542ULL}));
    rng.shuffle(std::span<std::size_t>(train));
    train.resize(size);
    std::sort(train.begin(), train.end());
    return train;
}

struct ForecastRow {
    std::string size_label;  // the requested size, or "full"
    std::size_t train_questions = 0;
    std::string algorithm;  // "knn" or "mf"
    TuneResult result;
};

struct ForecastStudy {
    std::vector<std::size_t> mf_dims{8, 16, 32, 64, 128};
    std::vector<std::size_t> knn_ks{1, 5, 11, 21, 51, 101};
    std::uint64_t subset_seed = 0;
    bool run_mf = true;
    bool run_knn = true;
};

/// One row per (size, algorithm). A size of nullopt means the full training split.
inline std::vector<ForecastRow> scaling_study(const CorrectnessDataset& data, const QuestionEmbeddingTable& embeddings,
                                              const SplitAssignment& split, const TrainConfig& base,
                                              const std::vector<std::optional<std::size_t>>& sizes,
                                              const ForecastStudy& study) {
    std::vector<ForecastRow> rows;
    for (const auto& size : sizes) {
        SplitAssignment sub = split;
        if (size) sub.train = nested_subset(split.train, *size, study.subset_seed);
        const std::string label = size ? std::to_string(*size) : "full";
        if (study.run_knn) rows.push_back({label, sub.train.size(), "knn", tune_knn(data, embeddings, sub, study.knn_ks)});
        if (study.run_mf)
            rows.push_back({label, sub.train.size(), "mf", tune_mf(data, embeddings, sub, base, study.mf_dims)});
    }
    return rows;
}

}  // namespace embedllm
