#pragma once

// Planted worlds: correctness data generated from known parameters, so that
// every learned quantity has a ground truth to be checked against.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "mf.hpp"
#include "random.hpp"

namespace embedllm {

enum class LabelRule {
    deterministic,  // 1 iff true score >= 0.5
    bernoulli,      // 1 with probability = true score
};

struct WorldConfig {
    std::size_t models = 20;
    std::size_t questions = 500;
    std::size_t embedding_dim = 8;
    std::size_t question_dim = 16;
    std::size_t benchmarks = 1;
    double noise_rate = 0.0;  // probability of flipping each label
    LabelRule rule = LabelRule::deterministic;
    std::uint64_t seed = 0;
    double head_scale = 3.0;
    /// Scale of a per-benchmark mean added to question vectors; 0 keeps them standard normal.
    double benchmark_shift = 0.0;
    /// Replace the labels of the last benchmark so that each model's accuracy on it
    /// is an affine function of its true embedding, rescaled into [0.1, 0.9] and
    /// rounded to the nearest whole question. Noise and the label rule do not apply there.
    bool linear_last_benchmark = false;
};

struct PlantedWorld {
    MFParams truth;
    QuestionEmbeddingTable questions;
    CorrectnessDataset data;
    WorldConfig config;
    std::vector<std::size_t> question_benchmark;
    std::vector<double> model_accuracy;  // per-model mean label over all questions
    std::vector<double> linear_accuracy; // planted accuracy on the last benchmark, when linear
};

inline std::string padded_key(const std::string& prefix, std::size_t i, std::size_t count) {
    const std::size_t width = std::to_string(count > 0 ? count - 1 : 0).size();
    std::string digits = std::to_string(i);
    return prefix + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

inline double oracle_score(const PlantedWorld& world, std::size_t model, std::size_t question) {
    return forward(world.truth, model, world.questions.row(question)).score;
}

namespace detail {

inline void plant_linear_benchmark(PlantedWorld& world, std::vector<CorrectnessRecord>& records) {
    const auto& config = world.config;
    const std::size_t n = config.questions, last = config.benchmarks - 1;
    std::vector<std::size_t> bench;
    for (std::size_t q = 0; q < n; ++q)
        if (world.question_benchmark[q] == last) bench.push_back(q);
    Rng rng(derive_seed(config.seed, {0x4c494e4541ULL}));
    Vector direction(static_cast<Eigen::Index>(config.embedding_dim));
    for (auto& x : direction) x = rng.normal();
    const Vector raw = world.truth.model_table * direction;
    const double lo = raw.minCoeff(), hi = raw.maxCoeff();
    world.linear_accuracy.assign(config.models, 0.5);
    for (std::size_t i = 0; i < config.models; ++i) {
        if (hi > lo) world.linear_accuracy[i] = 0.1 + 0.8 * (raw(static_cast<Eigen::Index>(i)) - lo) / (hi - lo);
        const auto correct =
            static_cast<std::size_t>(std::llround(world.linear_accuracy[i] * static_cast<double>(bench.size())));
        auto order = bench;
        rng.shuffle(std::span<std::size_t>(order));
        std::size_t ones = 0;
        for (std::size_t q = 0; q < n; ++q) ones += static_cast<std::size_t>(records[i * n + q].label);
        for (std::size_t k = 0; k < order.size(); ++k) {
            auto& label = records[i * n + order[k]].label;
            ones -= static_cast<std::size_t>(label);
            label = k < correct ? 1 : 0;
            ones += static_cast<std::size_t>(label);
        }
        world.model_accuracy[i] = static_cast<double>(ones) / static_cast<double>(n);
    }
}

}  // namespace detail

inline PlantedWorld generate(const WorldConfig& config) {
    if (config.models < 1 || config.questions < 1 || config.embedding_dim < 1 || config.question_dim < 1 ||
        config.benchmarks < 1)
        throw ConfigError("generate: all counts must be >= 1");
    if (config.benchmarks > config.questions) throw ConfigError("generate: more benchmarks than questions");
    if (!(config.noise_rate >= 0.0 && config.noise_rate < 0.5)) throw ConfigError("noise_rate must lie in [0, 0.5)");

    PlantedWorld world;
    world.config = config;
    TrainConfig init;
    init.embedding_dim = config.embedding_dim;
    init.seed = derive_seed(config.seed, {0x5452555448ULL});
    world.truth = init_params(config.models, config.question_dim, init);
    world.truth.head_weight *= config.head_scale;

    const auto n = config.questions, d_q = config.question_dim;
    Rng qrng(derive_seed(config.seed, {0x5155455354ULL}));
    Matrix shifts(static_cast<Eigen::Index>(config.benchmarks), static_cast<Eigen::Index>(d_q));
    for (Eigen::Index i = 0; i < shifts.size(); ++i) shifts.data()[i] = config.benchmark_shift * qrng.normal();
    world.questions.vectors.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d_q));
    world.question_benchmark.resize(n);
    for (std::size_t q = 0; q < n; ++q) {
        const std::size_t b = q * config.benchmarks / n;
        world.question_benchmark[q] = b;
        for (std::size_t k = 0; k < d_q; ++k)
            world.questions.vectors(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(k)) =
                qrng.normal() + shifts(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(k));
        world.questions.keys.push_back(padded_key("q", q, n));
    }

    std::vector<std::string> model_keys, bench_keys;
    for (std::size_t i = 0; i < config.models; ++i) model_keys.push_back(padded_key("model_", i, config.models));
    for (std::size_t b = 0; b < config.benchmarks; ++b) bench_keys.push_back(padded_key("bench_", b, config.benchmarks));

    Rng label_rng(derive_seed(config.seed, {0x4c4142454cULL}));
    Rng noise_rng(derive_seed(config.seed, {0x4e4f495345ULL}));
    // Same arithmetic as oracle_score, so labels agree with it bit for bit.
    std::vector<Vector> projected;
    projected.reserve(n);
    for (std::size_t q = 0; q < n; ++q) projected.push_back(project(world.truth, world.questions.row(q)));
    std::vector<CorrectnessRecord> records;
    records.reserve(config.models * n);
    world.model_accuracy.assign(config.models, 0.0);
    for (std::size_t i = 0; i < config.models; ++i) {
        std::size_t ones = 0;
        for (std::size_t q = 0; q < n; ++q) {
            const double s = forward_projected(world.truth, i, projected[q]).score;
            int y = config.rule == LabelRule::deterministic ? (s >= 0.5 ? 1 : 0) : (label_rng.bernoulli(s) ? 1 : 0);
            if (noise_rng.bernoulli(config.noise_rate)) y = 1 - y;
            ones += static_cast<std::size_t>(y);
            records.push_back({i, q, static_cast<std::uint32_t>(world.question_benchmark[q]), y});
        }
        world.model_accuracy[i] = static_cast<double>(ones) / static_cast<double>(n);
    }
    if (config.linear_last_benchmark) detail::plant_linear_benchmark(world, records);
    world.data = CorrectnessDataset(std::move(model_keys), world.questions.keys, std::move(bench_keys),
                                    std::move(records));
    return world;
}

}  // namespace embedllm
