#pragma once

#include <string>
#include <vector>

#include <embedllm/dataset.hpp>

namespace fixture {

/// labels[m][q], -1 for a missing record. Question q goes to benchmark bench[q] (all 0 when empty).
inline embedllm::CorrectnessDataset dataset(const std::vector<std::vector<int>>& labels,
                                            const std::vector<std::size_t>& bench = {}, std::size_t benchmarks = 1) {
    const std::size_t m = labels.size(), n = labels.empty() ? 0 : labels[0].size();
    std::vector<std::string> mk, qk, bk;
    for (std::size_t i = 0; i < m; ++i) mk.push_back("m" + std::to_string(i));
    for (std::size_t q = 0; q < n; ++q) qk.push_back("q" + std::to_string(q));
    for (std::size_t b = 0; b < benchmarks; ++b) bk.push_back("b" + std::to_string(b));
    std::vector<embedllm::CorrectnessRecord> records;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t q = 0; q < n; ++q)
            if (labels[i][q] >= 0)
                records.push_back({i, q, static_cast<std::uint32_t>(bench.empty() ? 0 : bench[q]), labels[i][q]});
    return {mk, qk, bk, records};
}

inline embedllm::QuestionEmbeddingTable table(const std::vector<std::vector<double>>& rows) {
    embedllm::QuestionEmbeddingTable t;
    t.vectors.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.at(0).size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        t.keys.push_back("q" + std::to_string(i));
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            t.vectors(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return t;
}

inline std::vector<std::size_t> iota(std::size_t n, std::size_t from = 0) {
    std::vector<std::size_t> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = from + i;
    return v;
}

}  // namespace fixture
