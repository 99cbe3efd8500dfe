#include <gtest/gtest.h>

#include <embedllm/synthgen.hpp>

using namespace embedllm;

TEST(Synthgen, DeterministicLabelsFollowTheTrueScore) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        WorldConfig wc;
        wc.models = 7;
        wc.questions = 90;
        wc.benchmarks = 3;
        wc.seed = seed;
        const auto w = generate(wc);
        for (std::size_t m = 0; m < 7; ++m)
            for (std::size_t q = 0; q < 90; ++q)
                EXPECT_EQ(w.data.label(m, q), oracle_score(w, m, q) >= 0.5 ? 1 : 0);
        EXPECT_EQ(w.data.records().size(), 7u * 90u);
        EXPECT_EQ(w.data.benchmarks(), (std::vector<std::string>{"bench_0", "bench_1", "bench_2"}));
        EXPECT_EQ(w.data.question_benchmark(0), 0u);
        EXPECT_EQ(w.data.question_benchmark(89), 2u);
    }
}

TEST(Synthgen, SameSeedSameWorld) {
    WorldConfig wc;
    wc.noise_rate = 0.2;
    wc.rule = LabelRule::bernoulli;
    wc.seed = 17;
    const auto a = generate(wc), b = generate(wc);
    EXPECT_EQ(a.truth, b.truth);
    EXPECT_EQ(a.questions.vectors, b.questions.vectors);
    ASSERT_EQ(a.data.records().size(), b.data.records().size());
    for (std::size_t i = 0; i < a.data.records().size(); ++i)
        EXPECT_EQ(a.data.records()[i].label, b.data.records()[i].label);
    wc.seed = 18;
    EXPECT_FALSE(generate(wc).truth == a.truth);
}

TEST(Synthgen, KeysAreZeroPadded) {
    EXPECT_EQ(padded_key("model_", 3, 20), "model_03");
    EXPECT_EQ(padded_key("q", 7, 500), "q007");
    EXPECT_EQ(padded_key("bench_", 0, 1), "bench_0");
}

TEST(Synthgen, ZeroModelRowScoresOneHalf) {
    WorldConfig wc;
    wc.models = 3;
    wc.questions = 10;
    auto w = generate(wc);
    w.truth.model_table.row(1).setZero();
    for (std::size_t q = 0; q < 10; ++q) EXPECT_EQ(oracle_score(w, 1, q), 0.5);
}

TEST(Synthgen, BernoulliLabelsMatchScoresOnAverage) {
    WorldConfig wc;
    wc.rule = LabelRule::bernoulli;
    wc.seed = 3;
    const auto w = generate(wc);  // 20 x 500 = 10^4 draws
    double labels = 0.0, scores = 0.0;
    for (std::size_t m = 0; m < wc.models; ++m)
        for (std::size_t q = 0; q < wc.questions; ++q) {
            labels += w.data.label(m, q);
            scores += oracle_score(w, m, q);
        }
    const double n = static_cast<double>(wc.models * wc.questions);
    EXPECT_NEAR(labels / n, scores / n, 0.02);
}

TEST(Synthgen, NoiseFlipsTheConfiguredFraction) {
    WorldConfig wc;
    wc.seed = 5;
    const auto clean = generate(wc);
    wc.noise_rate = 0.2;
    const auto noisy = generate(wc);
    std::size_t flips = 0;
    for (std::size_t m = 0; m < wc.models; ++m)
        for (std::size_t q = 0; q < wc.questions; ++q) flips += clean.data.label(m, q) != noisy.data.label(m, q);
    EXPECT_NEAR(static_cast<double>(flips) / 1e4, 0.2, 0.02);
}

TEST(Synthgen, MoreNoiseNeverHelpsTrainedAccuracy) {
    int agree = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        std::vector<double> acc;
        for (double noise : {0.0, 0.1, 0.2}) {
            WorldConfig wc;
            wc.noise_rate = noise;
            wc.seed = seed;
            const auto w = generate(wc);
            const auto split = split_questions(w.data, {}, seed);
            TrainConfig c;
            c.embedding_dim = 8;
            c.learning_rate = 1e-2;
            c.batch_size = 64;
            c.epochs = 40;
            c.seed = seed;
            acc.push_back(test_accuracy(train(w.data, w.questions, split, c).params, w.data, w.questions, split.test));
        }
        agree += acc[0] >= acc[1] && acc[1] >= acc[2];
    }
    EXPECT_GE(agree, 8);
}

TEST(Synthgen, RejectsBadConfigs) {
    WorldConfig wc;
    wc.noise_rate = 0.5;
    EXPECT_THROW(generate(wc), ConfigError);
    wc.noise_rate = -0.1;
    EXPECT_THROW(generate(wc), ConfigError);
    wc = {};
    wc.models = 0;
    EXPECT_THROW(generate(wc), ConfigError);
    wc = {};
    wc.questions = 2;
    wc.benchmarks = 3;
    EXPECT_THROW(generate(wc), ConfigError);
}

TEST(Synthgen, LinearLastBenchmarkHasPlantedAccuracies) {
    WorldConfig wc;
    wc.models = 15;
    wc.questions = 400;
    wc.benchmarks = 2;
    wc.noise_rate = 0.1;
    wc.linear_last_benchmark = true;
    wc.seed = 6;
    const auto w = generate(wc);
    const std::size_t b[] = {1};
    const auto acc = accuracy_by_model(w.data, w.data.questions_in(b));
    ASSERT_EQ(w.linear_accuracy.size(), 15u);
    for (std::size_t i = 0; i < 15; ++i) EXPECT_NEAR(acc[i], w.linear_accuracy[i], 0.5 / 200 + 1e-12);
    EXPECT_NEAR(*std::min_element(w.linear_accuracy.begin(), w.linear_accuracy.end()), 0.1, 1e-12);
    EXPECT_NEAR(*std::max_element(w.linear_accuracy.begin(), w.linear_accuracy.end()), 0.9, 1e-12);
    std::vector<std::size_t> all(400);
    std::iota(all.begin(), all.end(), 0);
    const auto overall = accuracy_by_model(w.data, all);
    for (std::size_t i = 0; i < 15; ++i) EXPECT_DOUBLE_EQ(overall[i], w.model_accuracy[i]);
}
