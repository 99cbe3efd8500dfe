#pragma once

// Sanity probes over learned model embeddings.

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "linalg.hpp"

namespace embedllm {

struct CommunityStats {
    std::string label;
    double intra_mean_l2 = 0.0;  // mean over unordered member pairs
    double inter_mean_l2 = 0.0;  // mean over member x non-member pairs
    std::size_t member_count = 0;
};

struct CommunityReport {
    std::vector<CommunityStats> communities;
};

inline double l2_distance(const Matrix& e, std::size_t a, std::size_t b) {
    return (e.row(static_cast<Eigen::Index>(a)) - e.row(static_cast<Eigen::Index>(b))).norm();
}

inline CommunityReport community_distances(const Matrix& embeddings, const std::vector<std::set<std::string>>& tags,
                                           const std::vector<std::string>& labels) {
    const auto m = static_cast<std::size_t>(embeddings.rows());
    if (tags.size() != m) throw DomainError("community_distances: one tag set per model required");
    CommunityReport report;
    for (const auto& label : labels) {
        std::vector<std::size_t> in, out;
        for (std::size_t i = 0; i < m; ++i) (tags[i].count(label) ? in : out).push_back(i);
        if (in.size() < 2)
            throw CommunityError("community '" + label + "' has " + std::to_string(in.size()) +
                                 " member(s); at least 2 are required");
        if (out.empty()) throw CommunityError("community '" + label + "' has no non-members");
        double intra = 0.0, inter = 0.0;
        for (std::size_t a = 0; a < in.size(); ++a)
            for (std::size_t b = a + 1; b < in.size(); ++b) intra += l2_distance(embeddings, in[a], in[b]);
        for (auto a : in)
            for (auto b : out) inter += l2_distance(embeddings, a, b);
        const double intra_pairs = static_cast<double>(in.size() * (in.size() - 1) / 2);
        const double inter_pairs = static_cast<double>(in.size() * out.size());
        report.communities.push_back({label, intra / intra_pairs, inter / inter_pairs, in.size()});
    }
    return report;
}

struct RankedModel {
    std::size_t model;
    double distance;
};

/// The top_k closest other models, ascending L2, ties to the lower index.
inline std::vector<RankedModel> nearest_models(const Matrix& embeddings, std::size_t model, std::size_t top_k) {
    const auto m = static_cast<std::size_t>(embeddings.rows());
    if (model >= m) throw DomainError("nearest_models: model id out of range");
    if (top_k >= m) throw DomainError("nearest_models: top_k must be smaller than the model count");
    std::vector<RankedModel> all;
    for (std::size_t i = 0; i < m; ++i)
        if (i != model) all.push_back({i, l2_distance(embeddings, model, i)});
    std::sort(all.begin(), all.end(), [](const RankedModel& a, const RankedModel& b) {
        return a.distance != b.distance ? a.distance < b.distance : a.model < b.model;
    });
    all.resize(top_k);
    return all;
}

}  // namespace embedllm
