#pragma once

// Leave-benchmarks-out embedding training and the contributor x testee
// matrix C_ij = e_removed - e_added of total test MSE.

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "mf.hpp"
#include "regression.hpp"

namespace embedllm {

/// Fraction of the kept questions held out for checkpoint selection.
inline constexpr double leave_out_validation_fraction = 0.1;

/// Train MF on every question of `benchmarks` minus `excluded` and return the model table.
inline Matrix train_leave_out_embeddings(const CorrectnessDataset& data, const QuestionEmbeddingTable& embeddings,
                                         std::span<const std::size_t> benchmarks,
                                         std::span<const std::size_t> excluded, const TrainConfig& config) {
    std::vector<std::size_t> kept_benchmarks;
    for (auto b : benchmarks)
        if (std::find(excluded.begin(), excluded.end(), b) == excluded.end()) kept_benchmarks.push_back(b);
    auto kept = data.questions_in(kept_benchmarks);

    std::vector<std::size_t> per_model(data.model_count(), 0);
    for (auto q : kept)
        for (std::size_t m = 0; m < data.model_count(); ++m) per_model[m] += data.has_label(m, q);
    for (std::size_t m = 0; m < data.model_count(); ++m)
        if (per_model[m] == 0)
            throw CoverageError("model '" + data.model_keys()[m] + "' has no training questions after leaving out " +
                                std::to_string(excluded.size()) + " benchmark(s)");

    const double ratios[2] = {1.0 - leave_out_validation_fraction, leave_out_validation_fraction};
    const auto sizes = apportion(kept.size(), ratios);
    Rng rng(derive_seed(config.seed, {0x484f4c44ULL}));
    rng.shuffle(std::span<std::size_t>(kept));
    SplitAssignment split;
    split.seed = config.seed;
    split.train.assign(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(sizes[0]));
    split.validation.assign(kept.begin() + static_cast<std::ptrdiff_t>(sizes[0]), kept.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    return train(data, embeddings, split, config).params.model_table;
}

struct ContributionMatrix {
    std::vector<std::string> benchmarks;
    Matrix contribution;            // [contributor i][testee j], zero diagonal
    Vector row_sums;                // Σ_j C_ij: total help of adding benchmark i
    Vector column_sums;             // Σ_i C_ij: total help received by benchmark j
    Vector error_added;             // e_added per testee j
    Matrix error_removed;           // e_removed per (i, j), zero diagonal
};

/// Every off-diagonal cell trains MF twice (S \ {B_j} and S \ {B_i, B_j}) and
/// compares total test MSE of predicting B_j accuracies. The same TrainConfig
/// and, per testee, the same model splits are used on both sides.
inline ContributionMatrix contribution_matrix(const CorrectnessDataset& data,
                                              const QuestionEmbeddingTable& embeddings,
                                              const std::vector<std::string>& benchmark_names,
                                              const SplitProtocol& protocol, const TrainConfig& config) {
    const std::size_t k = benchmark_names.size();
    if (k < 3) throw DomainError("contribution_matrix: need at least 3 benchmarks");
    std::vector<std::size_t> ids;
    for (const auto& name : benchmark_names) ids.push_back(data.benchmark_index(name));
    if (std::set<std::size_t>(ids.begin(), ids.end()).size() != k)
        throw DomainError("contribution_matrix: repeated benchmark");

    ContributionMatrix out;
    out.benchmarks = benchmark_names;
    out.contribution = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    out.error_removed = Matrix::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
    out.error_added = Vector::Zero(static_cast<Eigen::Index>(k));

    auto testee_protocol = [&](std::size_t j) {
        SplitProtocol p = protocol;
        p.seed = derive_seed(protocol.seed, {0x54455354ULL, j});
        return p;
    };
    // S \ {B_i, B_j} is symmetric in (i, j): train once per unordered pair.
    std::map<std::pair<std::size_t, std::size_t>, Matrix> removed_cache;
    for (std::size_t j = 0; j < k; ++j) {
        const std::size_t ex_added[] = {ids[j]};
        const Matrix added = train_leave_out_embeddings(data, embeddings, ids, ex_added, config);
        const auto e_added = predict_benchmark(data, added, benchmark_names[j], testee_protocol(j)).total_test_mse;
        out.error_added(static_cast<Eigen::Index>(j)) = e_added;
        for (std::size_t i = 0; i < k; ++i) {
            if (i == j) continue;
            const auto key = std::minmax(i, j);
            auto it = removed_cache.find(key);
            if (it == removed_cache.end()) {
                const std::size_t ex_removed[] = {ids[i], ids[j]};
                it = removed_cache
                         .emplace(key, train_leave_out_embeddings(data, embeddings, ids, ex_removed, config))
                         .first;
            }
            const auto e_removed =
                predict_benchmark(data, it->second, benchmark_names[j], testee_protocol(j)).total_test_mse;
            const auto I = static_cast<Eigen::Index>(i), J = static_cast<Eigen::Index>(j);
            out.error_removed(I, J) = e_removed;
            out.contribution(I, J) = e_removed - e_added;
        }
    }
    out.row_sums = out.contribution.rowwise().sum();
    out.column_sums = out.contribution.colwise().sum().transpose();
    return out;
}

}  // namespace embedllm
