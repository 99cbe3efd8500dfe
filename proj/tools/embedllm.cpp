// embedllm: command-line front end for every pipeline stage.
//
// Each subcommand writes a JSON report (stdout, or --report <path>) carrying a
// provenance block. Exit codes: 0 success, 1 runtime failure, 2 usage error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <embedllm/embedllm.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace embedllm;

namespace {

/// Flat JSON object as a config file: {"seed": 7, "subset-sizes": [100, "full"]}.
/// Underscores in keys are accepted in place of dashes. Keys apply to the
/// subcommand chosen on the command line.
class FlatJsonConfig : public CLI::Config {
public:
    explicit FlatJsonConfig(const CLI::App* root) : root_(root) {}

    std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
        json j = json::object();
        for (const CLI::Option* opt : app->get_options({})) {
            if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
            const auto& name = opt->get_lnames().front();
            if (opt->count() > 0)
                j[name] = opt->results().size() == 1 ? json(opt->results().front()) : json(opt->results());
            else if (default_also && !opt->get_default_str().empty())
                j[name] = opt->get_default_str();
        }
        return j.dump(2) + "\n";
    }

    std::vector<CLI::ConfigItem> from_config(std::istream& in) const override {
        json j;
        try {
            j = json::parse(in);
        } catch (const json::exception& e) {
            throw CLI::ConversionError("config", std::string("invalid JSON: ") + e.what());
        }
        if (!j.is_object()) throw CLI::ConversionError("config", "expected a flat JSON object");
        std::vector<CLI::ConfigItem> items;
        for (const auto& [key, value] : j.items()) {
            CLI::ConfigItem item;
            for (const CLI::App* sub : root_->get_subcommands()) item.parents.push_back(sub->get_name());
            item.name = key;
            std::replace(item.name.begin(), item.name.end(), '_', '-');
            auto add = [&](const json& v) {
                if (v.is_string())
                    item.inputs.push_back(v.get<std::string>());
                else if (v.is_boolean())
                    item.inputs.push_back(v.get<bool>() ? "true" : "false");
                else if (v.is_number() || v.is_null())
                    item.inputs.push_back(v.dump());
                else
                    throw CLI::ConversionError(key, "nested values are not supported");
            };
            if (value.is_array())
                for (const auto& v : value) add(v);
            else
                add(value);
            items.push_back(std::move(item));
        }
        return items;
    }

private:
    const CLI::App* root_;
};

struct Common {
    std::string report;
};

struct DataPaths {
    std::string data;
    std::string qemb;
};

struct TrainFlags {
    TrainConfig config;
    std::optional<std::uint64_t> split_seed;

    void add(CLI::App* app) {
        app->add_option("--embedding-dim", config.embedding_dim, "Model embedding dimension d_e")->capture_default_str();
        app->add_option("--learning-rate", config.learning_rate, "Adam learning rate")->capture_default_str();
        app->add_option("--epochs", config.epochs, "Training epochs")->capture_default_str();
        app->add_option("--batch-size", config.batch_size, "Mini-batch size")->capture_default_str();
        app->add_option("--weight-decay", config.weight_decay, "L2 weight decay")->capture_default_str();
        app->add_option("--seed", config.seed, "Seed for initialization, shuffling and splits")->capture_default_str();
        app->add_option("--split-seed", split_seed, "Seed for the question split (defaults to --seed)");
    }
    std::uint64_t split() const { return split_seed.value_or(config.seed); }
};

void emit(const json& report, const std::string& path) {
    const auto text = report.dump(2) + "\n";
    if (path.empty()) {
        std::cout << text;
        return;
    }
    auto out = csv::open_output(path);
    out << text;
}

json provenance(const json& config, const json& seeds, const std::vector<std::string>& inputs) {
    json files = json::object();
    for (const auto& p : inputs)
        if (!p.empty()) files[p] = csv::hex64(csv::file_checksum(p));
    return {{"config_hash", csv::hex64(csv::fnv1a(config.dump()))},
            {"config", config},
            {"seeds", seeds},
            {"dataset_checksum", files}};
}

struct Loaded {
    CorrectnessDataset data;
    QuestionEmbeddingTable embeddings;
};

Loaded load(const DataPaths& paths) {
    Loaded l{load_correctness(paths.data), {}};
    if (!paths.qemb.empty()) l.embeddings = align_embeddings(load_question_embeddings(paths.qemb), l.data);
    return l;
}

std::vector<std::size_t> benchmark_ids(const CorrectnessDataset& data, const std::vector<std::string>& names) {
    std::vector<std::size_t> ids;
    for (const auto& n : names) ids.push_back(data.benchmark_index(n));
    return ids;
}

/// Questions outside the excluded benchmarks, split with the given seed.
SplitAssignment kept_split(const CorrectnessDataset& data, const std::vector<std::string>& excluded,
                           std::uint64_t seed) {
    if (excluded.empty()) return split_questions(data, {}, seed);
    const auto skip = benchmark_ids(data, excluded);
    std::vector<std::size_t> keep;
    for (std::size_t b = 0; b < data.benchmarks().size(); ++b)
        if (std::find(skip.begin(), skip.end(), b) == skip.end()) keep.push_back(b);
    return split_subset(data.questions_in(keep), {}, seed);
}

json history_json(const TrainHistory& h) {
    json val = json::array();
    for (double v : h.validation_accuracy) val.push_back(std::isnan(v) ? json(nullptr) : json(v));
    return {{"train_loss", h.train_loss}, {"validation_accuracy", val}, {"best_epoch", h.best_epoch}};
}

json tune_json(const TuneResult& r) {
    return {{"best", r.best}, {"validation_accuracy", r.validation_accuracy}, {"test_accuracy", r.test_accuracy}};
}

// ---------------------------------------------------------------------------

struct GenSynthetic {
    WorldConfig world;
    std::string rule = "deterministic";
    std::string out_dir;

    void add(CLI::App* app) {
        app->add_option("--models", world.models, "Number of models")->capture_default_str();
        app->add_option("--questions", world.questions, "Number of questions")->capture_default_str();
        app->add_option("--embedding-dim", world.embedding_dim, "True model embedding dimension")->capture_default_str();
        app->add_option("--question-dim", world.question_dim, "Question embedding dimension")->capture_default_str();
        app->add_option("--benchmarks", world.benchmarks, "Number of contiguous benchmarks")->capture_default_str();
        app->add_option("--noise-rate", world.noise_rate, "Label flip probability in [0, 0.5)")->capture_default_str();
        app->add_option("--rule", rule, "Label rule")->check(CLI::IsMember({"deterministic", "bernoulli"}))
            ->capture_default_str();
        app->add_option("--seed", world.seed, "World seed")->capture_default_str();
        app->add_option("--head-scale", world.head_scale, "Scale of the true head weights")->capture_default_str();
        app->add_option("--benchmark-shift", world.benchmark_shift, "Per-benchmark question mean scale")
            ->capture_default_str();
        app->add_flag("--linear-benchmark", world.linear_last_benchmark,
                      "Make accuracy on the last benchmark linear in the true model embeddings");
        app->add_option("--out-dir", out_dir, "Output directory")->required();
    }

    json run() {
        world.rule = rule == "bernoulli" ? LabelRule::bernoulli : LabelRule::deterministic;
        const auto w = generate(world);
        fs::create_directories(out_dir);
        const auto dir = fs::path(out_dir);
        const auto data_path = (dir / "correctness.csv").string();
        const auto qemb_path = (dir / "question_embeddings.csv").string();
        const auto truth_path = (dir / "true_params.csv").string();
        const auto emb_path = (dir / "true_model_embeddings.csv").string();
        save_correctness(w.data, data_path);
        save_question_embeddings(w.questions, qemb_path);
        TrainConfig tc;
        tc.embedding_dim = world.embedding_dim;
        tc.seed = world.seed;
        save_params(w.truth, truth_path, tc, w.data.model_keys());
        save_model_embeddings({w.data.model_keys(), w.truth.model_table}, emb_path);
        const json config = {{"models", world.models},
                             {"questions", world.questions},
                             {"embedding_dim", world.embedding_dim},
                             {"question_dim", world.question_dim},
                             {"benchmarks", world.benchmarks},
                             {"noise_rate", world.noise_rate},
                             {"rule", rule},
                             {"head_scale", world.head_scale},
                             {"benchmark_shift", world.benchmark_shift},
                             {"linear_benchmark", world.linear_last_benchmark}};
        json report = {{"command", "gen-synthetic"},
                       {"provenance", provenance(config, {{"seed", world.seed}}, {})},
                       {"files",
                        {{"correctness", data_path},
                         {"question_embeddings", qemb_path},
                         {"true_params", truth_path},
                         {"true_model_embeddings", emb_path}}},
                       {"model_accuracy", w.model_accuracy}};
        if (world.linear_last_benchmark) report["linear_accuracy"] = w.linear_accuracy;
        report["provenance"]["dataset_checksum"] = {{data_path, csv::hex64(csv::file_checksum(data_path))},
                                                    {qemb_path, csv::hex64(csv::file_checksum(qemb_path))}};
        return report;
    }
};

struct Train {
    DataPaths paths;
    TrainFlags flags;
    std::vector<std::string> exclude;
    std::string out;

    void add(CLI::App* app) {
        app->add_option("--data", paths.data, "Correctness CSV")->required()->check(CLI::ExistingFile);
        app->add_option("--qemb", paths.qemb, "Question embedding CSV")->required()->check(CLI::ExistingFile);
        app->add_option("--exclude-benchmarks", exclude, "Benchmarks left out of training")->delimiter(',');
        app->add_option("--out", out, "Output parameter file (a .json sidecar is written next to it)")->required();
        flags.add(app);
    }

    json run() {
        const auto l = load(paths);
        const auto split = kept_split(l.data, exclude, flags.split());
        const auto result = train(l.data, l.embeddings, split, flags.config);
        save_params(result.params, out, flags.config, l.data.model_keys());
        json accuracy = json::object();
        accuracy["train"] = test_accuracy(result.params, l.data, l.embeddings, split.train);
        if (!split.validation.empty())
            accuracy["validation"] = test_accuracy(result.params, l.data, l.embeddings, split.validation);
        if (!split.test.empty()) accuracy["test"] = test_accuracy(result.params, l.data, l.embeddings, split.test);
        json config = to_json(flags.config);
        config["exclude_benchmarks"] = exclude;
        return {{"command", "train"},
                {"provenance", provenance(config, {{"seed", flags.config.seed}, {"split_seed", flags.split()}},
                                          {paths.data, paths.qemb})},
                {"params", out},
                {"split", {{"train", split.train.size()}, {"validation", split.validation.size()},
                           {"test", split.test.size()}}},
                {"accuracy", accuracy},
                {"history", history_json(result.history)}};
    }
};

struct EvalForecast {
    DataPaths paths;
    TrainFlags flags;
    std::vector<std::string> sizes{"full"};
    ForecastStudy study;
    std::string algorithms = "both";

    void add(CLI::App* app) {
        app->add_option("--data", paths.data, "Correctness CSV")->required()->check(CLI::ExistingFile);
        app->add_option("--qemb", paths.qemb, "Question embedding CSV")->required()->check(CLI::ExistingFile);
        app->add_option("--subset-sizes", sizes, "Training-question subset sizes; 'full' uses the whole split")
            ->delimiter(',')
            ->capture_default_str();
        app->add_option("--mf-dims", study.mf_dims, "Candidate MF embedding dims")->delimiter(',')->capture_default_str();
        app->add_option("--knn-ks", study.knn_ks, "Candidate KNN k values")->delimiter(',')->capture_default_str();
        app->add_option("--subset-seed", study.subset_seed, "Seed for nested subsets")->capture_default_str();
        app->add_option("--algorithms", algorithms, "Which methods to run")
            ->check(CLI::IsMember({"both", "mf", "knn"}))
            ->capture_default_str();
        flags.add(app);
    }

    json run() {
        std::vector<std::optional<std::size_t>> parsed;
        for (const auto& s : sizes) {
            if (s == "full") {
                parsed.emplace_back(std::nullopt);
                continue;
            }
            std::size_t v = 0;
            const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
            if (ec != std::errc() || ptr != s.data() + s.size() || v == 0)
                throw ConfigError("bad subset size '" + s + "'");
            parsed.emplace_back(v);
        }
        study.run_mf = algorithms != "knn";
        study.run_knn = algorithms != "mf";
        const auto l = load(paths);
        const auto split = split_questions(l.data, {}, flags.split());
        const auto rows = scaling_study(l.data, l.embeddings, split, flags.config, parsed, study);
        json table = json::array();
        for (const auto& r : rows)
            table.push_back({{"dataset_size", r.size_label},
                             {"train_questions", r.train_questions},
                             {"algorithm", r.algorithm},
                             {"result", tune_json(r.result)}});
        json config = to_json(flags.config);
        config["subset_sizes"] = sizes;
        config["mf_dims"] = study.mf_dims;
        config["knn_ks"] = study.knn_ks;
        config["algorithms"] = algorithms;
        return {{"command", "eval-forecast"},
                {"provenance",
                 provenance(config,
                            {{"seed", flags.config.seed}, {"split_seed", flags.split()}, {"subset_seed", study.subset_seed}},
                            {paths.data, paths.qemb})},
                {"rows", table}};
    }
};

struct Route {
    DataPaths paths;
    std::string params_path;
    std::uint64_t split_seed = 0;
    bool all_questions = false;
    std::string assignments;
    std::size_t timing_repeats = 0;

    void add(CLI::App* app) {
        app->add_option("--data", paths.data, "Correctness CSV")->required()->check(CLI::ExistingFile);
        app->add_option("--qemb", paths.qemb, "Question embedding CSV")->required()->check(CLI::ExistingFile);
        app->add_option("--params", params_path, "Trained parameter file")->required()->check(CLI::ExistingFile);
        app->add_option("--split-seed", split_seed, "Seed of the split whose test questions are routed")
            ->capture_default_str();
        app->add_flag("--all-questions", all_questions, "Route every question instead of the test split");
        app->add_option("--assignments", assignments, "Write question_id,model_id routing CSV here");
        app->add_option("--timing-repeats", timing_repeats, "Also time batched routing over this many repeats")
            ->capture_default_str();
    }

    json run() {
        const auto l = load(paths);
        const auto stored = load_params(params_path);
        if (stored.model_keys != l.data.model_keys())
            throw DomainError("parameter model keys do not match the dataset models");
        std::vector<std::size_t> questions;
        if (all_questions) {
            questions.resize(l.data.question_count());
            std::iota(questions.begin(), questions.end(), 0);
        } else {
            questions = split_questions(l.data, {}, split_seed).test;
        }
        const auto r = router_accuracy(stored.params, l.data, l.embeddings, questions);
        if (!assignments.empty()) {
            auto out = csv::open_output(assignments);
            out << "question_id,model_id\n";
            for (std::size_t k = 0; k < r.questions.size(); ++k)
                out << csv::escape(l.data.question_keys()[r.questions[k]]) << ','
                    << csv::escape(l.data.model_keys()[r.routed_model[k]]) << '\n';
        }
        auto triple = [](const AccuracyTriple& t) {
            return json{{"mf", t.mf}, {"single_best", t.single_best}, {"weighted_random", t.weighted_random}};
        };
        json per = json::array();
        for (const auto& b : r.per_benchmark)
            per.push_back({{"benchmark", b.benchmark},
                           {"questions", b.questions},
                           {"accuracy", triple(b.accuracy)},
                           {"single_best_model", l.data.model_keys()[b.single_best_model]}});
        json freq = json::object();
        for (std::size_t i = 0; i < r.selection_frequencies.size(); ++i)
            freq[l.data.model_keys()[i]] = r.selection_frequencies[i];
        const json config = {{"params", params_path}, {"all_questions", all_questions},
                             {"timing_repeats", timing_repeats}};
        json report = {{"command", "route"},
                       {"provenance", provenance(config, {{"split_seed", split_seed}},
                                                 {paths.data, paths.qemb, params_path})},
                       {"questions", r.questions.size()},
                       {"overall", triple(r.overall)},
                       {"single_best_model", l.data.model_keys()[r.single_best_model]},
                       {"oracle_ceiling", r.oracle_ceiling},
                       {"per_benchmark", per},
                       {"selection_frequencies", freq}};
        if (timing_repeats > 0) {
            Matrix qs(static_cast<Eigen::Index>(questions.size()), static_cast<Eigen::Index>(l.embeddings.dim()));
            for (std::size_t k = 0; k < questions.size(); ++k)
                qs.row(static_cast<Eigen::Index>(k)) = l.embeddings.vectors.row(static_cast<Eigen::Index>(questions[k]));
            std::vector<std::size_t> all(l.data.model_count());
            std::iota(all.begin(), all.end(), 0);
            const auto t = route_batch_timed(stored.params, qs, all, timing_repeats);
            report["timing"] = {{"repeats", t.samples.size()}, {"median_seconds", t.median_seconds}};
        }
        return report;
    }
};

struct BenchPredict {
    DataPaths paths;
    TrainFlags flags;
    std::string target;
    std::string embeddings;
    SplitProtocol protocol;

    void add(CLI::App* app) {
        app->add_option("--data", paths.data, "Correctness CSV")->required()->check(CLI::ExistingFile);
        app->add_option("--qemb", paths.qemb, "Question embedding CSV (needed when training embeddings here)")
            ->check(CLI::ExistingFile);
        app->add_option("--embeddings", embeddings, "Model embedding CSV; trained without the target when absent")
            ->check(CLI::ExistingFile);
        app->add_option("--target", target, "Benchmark whose per-model accuracy is predicted")->required();
        app->add_option("--splits", protocol.n_splits, "Number of random model splits")->capture_default_str();
        app->add_option("--lambda", protocol.lambda, "Ridge penalty")->capture_default_str();
        app->add_option("--train-fraction", protocol.train_fraction, "Fraction of models used to fit")
            ->capture_default_str();
        app->add_option("--alpha", protocol.alpha, "Significance level")->capture_default_str();
        app->add_option("--model-split-seed", protocol.seed, "Seed of the model splits")->capture_default_str();
        flags.add(app);
    }

    json run() {
        const auto l = load(paths);
        Matrix e;
        if (!embeddings.empty()) {
            const auto me = load_model_embeddings(embeddings);
            if (me.keys != l.data.model_keys()) throw DomainError("embedding model keys do not match the dataset");
            e = me.vectors;
        } else {
            if (paths.qemb.empty()) throw ConfigError("bench-predict needs --embeddings or --qemb");
            const auto all = all_benchmarks(l.data.benchmarks().size());
            const std::size_t excluded[] = {l.data.benchmark_index(target)};
            e = train_leave_out_embeddings(l.data, l.embeddings, all, excluded, flags.config);
        }
        const auto r = predict_benchmark(l.data, e, target, protocol);
        json splits = json::array();
        for (const auto& s : r.splits)
            splits.push_back({{"tau", std::isnan(s.tau) ? json(nullptr) : json(s.tau)},
                              {"p_value", s.p_value},
                              {"test_mse", s.test_mse}});
        json config = {{"target", target},          {"splits", protocol.n_splits},
                       {"lambda", protocol.lambda}, {"train_fraction", protocol.train_fraction},
                       {"alpha", protocol.alpha},   {"embeddings", embeddings}};
        if (embeddings.empty()) config["train"] = to_json(flags.config);
        return {{"command", "bench-predict"},
                {"provenance", provenance(config, {{"model_split_seed", protocol.seed}, {"seed", flags.config.seed}},
                                          {paths.data, paths.qemb, embeddings})},
                {"benchmark", r.benchmark},
                {"n_splits", r.n_splits},
                {"significance_count", r.significance_count},
                {"mean_test_mse", r.mean_test_mse},
                {"total_test_mse", r.total_test_mse},
                {"per_split", splits}};
    }

    static std::vector<std::size_t> all_benchmarks(std::size_t n) {
        std::vector<std::size_t> v(n);
        std::iota(v.begin(), v.end(), 0);
        return v;
    }
};

struct Contribution {
    DataPaths paths;
    TrainFlags flags;
    std::vector<std::string> benchmarks;
    std::vector<std::string> exclude;
    SplitProtocol protocol;
    std::string csv_out;

    void add(CLI::App* app) {
        app->add_option("--data", paths.data, "Correctness CSV")->required()->check(CLI::ExistingFile);
        app->add_option("--qemb", paths.qemb, "Question embedding CSV")->required()->check(CLI::ExistingFile);
        app->add_option("--benchmarks", benchmarks, "Benchmarks in the matrix (default: all)")->delimiter(',');
        app->add_option("--exclude-benchmarks", exclude, "Benchmarks dropped from the matrix")->delimiter(',');
        app->add_option("--splits", protocol.n_splits, "Model splits per testee")->capture_default_str();
        app->add_option("--lambda", protocol.lambda, "Ridge penalty")->capture_default_str();
        app->add_option("--model-split-seed", protocol.seed, "Seed of the model splits")->capture_default_str();
        app->add_option("--csv", csv_out, "Also write the matrix as CSV");
        flags.add(app);
    }

    json run() {
        const auto l = load(paths);
        std::vector<std::string> names = benchmarks.empty() ? l.data.benchmarks() : benchmarks;
        std::erase_if(names, [&](const std::string& n) {
            return std::find(exclude.begin(), exclude.end(), n) != exclude.end();
        });
        const auto c = contribution_matrix(l.data, l.embeddings, names, protocol, flags.config);
        const auto k = static_cast<Eigen::Index>(names.size());
        json rows = json::array();
        for (Eigen::Index i = 0; i < k; ++i) {
            json row = json::array();
            for (Eigen::Index j = 0; j < k; ++j) row.push_back(c.contribution(i, j));
            rows.push_back(row);
        }
        if (!csv_out.empty()) {
            auto out = csv::open_output(csv_out);
            out << "contributor";
            for (const auto& n : names) out << ',' << csv::escape(n);
            out << '\n';
            for (Eigen::Index i = 0; i < k; ++i) {
                out << csv::escape(names[static_cast<std::size_t>(i)]);
                for (Eigen::Index j = 0; j < k; ++j) out << ',' << csv::format_double(c.contribution(i, j));
                out << '\n';
            }
        }
        std::vector<double> row_sums(c.row_sums.begin(), c.row_sums.end());
        std::vector<double> col_sums(c.column_sums.begin(), c.column_sums.end());
        std::vector<double> added(c.error_added.begin(), c.error_added.end());
        json config = to_json(flags.config);
        config["benchmarks"] = names;
        config["splits"] = protocol.n_splits;
        config["lambda"] = protocol.lambda;
        return {{"command", "contribution"},
                {"provenance", provenance(config, {{"seed", flags.config.seed}, {"model_split_seed", protocol.seed}},
                                          {paths.data, paths.qemb})},
                {"benchmarks", names},
                {"contribution", rows},
                {"row_sums", row_sums},
                {"column_sums", col_sums},
                {"error_added", added}};
    }
};

struct ProbeCommunities {
    std::string embeddings, meta;
    std::vector<std::string> labels;
    std::string nearest;
    std::size_t top_k = 5;

    void add(CLI::App* app) {
        app->add_option("--embeddings", embeddings, "Model embedding CSV")->required()->check(CLI::ExistingFile);
        app->add_option("--meta", meta, "Model metadata CSV (model_id,name,tags)")->required()
            ->check(CLI::ExistingFile);
        app->add_option("--labels", labels, "Community labels (default: every tag)")->delimiter(',');
        app->add_option("--nearest", nearest, "Also list the closest models to this model id");
        app->add_option("--top-k", top_k, "How many neighbours --nearest lists")->capture_default_str();
    }

    json run() {
        const auto e = load_model_embeddings(embeddings);
        std::vector<CorrectnessRecord> none;
        CorrectnessDataset models(e.keys, {}, {}, none);
        load_model_metadata(meta, models);
        std::vector<std::string> wanted = labels;
        if (wanted.empty()) {
            std::set<std::string> all;
            for (const auto& t : models.model_tags()) all.insert(t.begin(), t.end());
            wanted.assign(all.begin(), all.end());
        }
        const auto r = community_distances(e.vectors, models.model_tags(), wanted);
        json communities = json::array();
        for (const auto& c : r.communities)
            communities.push_back({{"label", c.label},
                                   {"members", c.member_count},
                                   {"intra_mean_l2", c.intra_mean_l2},
                                   {"inter_mean_l2", c.inter_mean_l2}});
        json report = {{"command", "probe-communities"},
                       {"provenance", provenance({{"labels", wanted}, {"nearest", nearest}, {"top_k", top_k}},
                                                 json::object(), {embeddings, meta})},
                       {"communities", communities}};
        if (!nearest.empty()) {
            const auto it = std::find(e.keys.begin(), e.keys.end(), nearest);
            if (it == e.keys.end()) throw DomainError("unknown model '" + nearest + "'");
            json list = json::array();
            for (const auto& n : nearest_models(e.vectors, static_cast<std::size_t>(it - e.keys.begin()), top_k))
                list.push_back({{"model", e.keys[n.model]},
                                {"name", models.model_names()[n.model]},
                                {"distance", n.distance}});
            report["nearest"] = {{"model", nearest}, {"neighbours", list}};
        }
        return report;
    }
};

struct ExportEmbeddings {
    std::string params_path, out;

    void add(CLI::App* app) {
        app->add_option("--params", params_path, "Trained parameter file")->required()->check(CLI::ExistingFile);
        app->add_option("--out", out, "Output model embedding CSV")->required();
    }

    json run() {
        const auto stored = load_params(params_path);
        save_model_embeddings({stored.model_keys, stored.params.model_table}, out);
        return {{"command", "export-embeddings"},
                {"provenance", provenance({{"params", params_path}}, json::object(), {params_path})},
                {"out", out},
                {"models", stored.params.model_count()},
                {"embedding_dim", stored.params.embedding_dim()}};
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Model embeddings from answer correctness: train, forecast, route and probe."};
    app.config_formatter(std::make_shared<FlatJsonConfig>(&app));
    app.set_config("--config", "", "Flat JSON file whose keys are flag names; flags given on the command line win");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);

    Common common;
    GenSynthetic gen;
    Train train_cmd;
    EvalForecast forecast;
    Route route_cmd;
    BenchPredict bench;
    Contribution contrib;
    ProbeCommunities probe;
    ExportEmbeddings exporter;

    std::function<json()> action;
    auto sub = [&](const std::string& name, const std::string& help, auto& cmd) {
        CLI::App* s = app.add_subcommand(name, help);
        s->fallthrough();
        s->add_option("--report", common.report, "Write the JSON report here instead of stdout");
        cmd.add(s);
        s->callback([&] { action = [&] { return cmd.run(); }; });
    };
    sub("gen-synthetic", "Generate a planted synthetic world", gen);
    sub("train", "Train the correctness model", train_cmd);
    sub("eval-forecast", "MF and KNN accuracy over training-set sizes", forecast);
    sub("route", "Route test questions and score the router", route_cmd);
    sub("bench-predict", "Predict benchmark accuracy from model embeddings", bench);
    sub("contribution", "Benchmark contribution matrix", contrib);
    sub("probe-communities", "Embedding distances within and across model communities", probe);
    sub("export-embeddings", "Write the learned model embeddings as CSV", exporter);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        emit(action(), common.report);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
