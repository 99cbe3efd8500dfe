#pragma once

// Correctness data: who answered what, with benchmark tags, question
// embeddings and optional model metadata. Plus seeded question splits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "csv.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "random.hpp"

namespace embedllm {

struct CorrectnessRecord {
    std::size_t model_id = 0;
    std::size_t question_id = 0;
    std::uint32_t benchmark = 0;  // index into CorrectnessDataset::benchmarks()
    int label = 0;
};

/// Immutable correctness matrix Y (m x n), stored sparsely as records with a
/// dense lookup table. Missing (model, question) pairs are allowed.
class CorrectnessDataset {
public:
    static constexpr std::size_t no_benchmark = std::numeric_limits<std::size_t>::max();

    CorrectnessDataset() = default;

    CorrectnessDataset(std::vector<std::string> model_keys, std::vector<std::string> question_keys,
                       std::vector<std::string> benchmarks, std::vector<CorrectnessRecord> records)
        : model_keys_(std::move(model_keys)),
          question_keys_(std::move(question_keys)),
          benchmarks_(std::move(benchmarks)),
          records_(std::move(records)) {
        const std::size_t m = model_keys_.size();
        const std::size_t n = question_keys_.size();
        model_names_ = model_keys_;
        model_tags_.assign(m, {});
        labels_.assign(m * n, -1);
        question_benchmark_.assign(n, no_benchmark);
        for (const auto& r : records_) {
            if (r.model_id >= m || r.question_id >= n)
                throw DomainError("record id out of range: model " + std::to_string(r.model_id) + ", question " +
                                  std::to_string(r.question_id));
            if (r.benchmark >= benchmarks_.size())
                throw DomainError("record benchmark index out of range: " + std::to_string(r.benchmark));
            if (r.label != 0 && r.label != 1)
                throw DomainError("label must be 0 or 1, got " + std::to_string(r.label));
            auto& cell = labels_[r.model_id * n + r.question_id];
            if (cell != -1)
                throw DuplicateError("duplicate record for model '" + model_keys_[r.model_id] + "', question '" +
                                     question_keys_[r.question_id] + "'");
            cell = static_cast<std::int8_t>(r.label);
            auto& qb = question_benchmark_[r.question_id];
            if (qb == no_benchmark) {
                qb = r.benchmark;
            } else if (qb != r.benchmark) {
                throw DomainError("question '" + question_keys_[r.question_id] + "' tagged with two benchmarks: '" +
                                  benchmarks_[qb] + "' and '" + benchmarks_[r.benchmark] + "'");
            }
        }
    }

    std::size_t model_count() const noexcept { return model_keys_.size(); }
    std::size_t question_count() const noexcept { return question_keys_.size(); }

    const std::vector<CorrectnessRecord>& records() const noexcept { return records_; }
    const std::vector<std::string>& benchmarks() const noexcept { return benchmarks_; }
    const std::vector<std::string>& model_keys() const noexcept { return model_keys_; }
    const std::vector<std::string>& question_keys() const noexcept { return question_keys_; }
    const std::vector<std::string>& model_names() const noexcept { return model_names_; }
    const std::vector<std::set<std::string>>& model_tags() const noexcept { return model_tags_; }

    /// -1 when the pair is missing.
    int label(std::size_t model, std::size_t question) const {
        return labels_[model * question_count() + question];
    }
    bool has_label(std::size_t model, std::size_t question) const { return label(model, question) >= 0; }

    /// Benchmark index of a question, or no_benchmark when it has no records.
    std::size_t question_benchmark(std::size_t question) const { return question_benchmark_[question]; }

    std::size_t benchmark_index(const std::string& tag) const {
        const auto it = std::find(benchmarks_.begin(), benchmarks_.end(), tag);
        if (it == benchmarks_.end()) throw DomainError("unknown benchmark '" + tag + "'");
        return static_cast<std::size_t>(it - benchmarks_.begin());
    }

    /// Question ids (ascending) whose benchmark is in `benchmark_ids`.
    std::vector<std::size_t> questions_in(std::span<const std::size_t> benchmark_ids) const {
        std::vector<std::size_t> out;
        for (std::size_t q = 0; q < question_count(); ++q) {
            const auto b = question_benchmark_[q];
            if (b != no_benchmark && std::find(benchmark_ids.begin(), benchmark_ids.end(), b) != benchmark_ids.end())
                out.push_back(q);
        }
        return out;
    }

    std::size_t model_index(const std::string& key) const {
        const auto it = std::lower_bound(model_keys_.begin(), model_keys_.end(), key);
        if (it != model_keys_.end() && *it == key) return static_cast<std::size_t>(it - model_keys_.begin());
        const auto lin = std::find(model_keys_.begin(), model_keys_.end(), key);
        if (lin == model_keys_.end()) throw DomainError("unknown model '" + key + "'");
        return static_cast<std::size_t>(lin - model_keys_.begin());
    }

    /// Attach display names and community tags (one entry per model).
    void set_metadata(std::vector<std::string> names, std::vector<std::set<std::string>> tags) {
        if (names.size() != model_count() || tags.size() != model_count())
            throw DomainError("metadata must have one entry per model");
        model_names_ = std::move(names);
        model_tags_ = std::move(tags);
    }

private:
    std::vector<std::string> model_keys_;
    std::vector<std::string> question_keys_;
    std::vector<std::string> benchmarks_;
    std::vector<CorrectnessRecord> records_;
    std::vector<std::string> model_names_;
    std::vector<std::set<std::string>> model_tags_;
    std::vector<std::int8_t> labels_;
    std::vector<std::size_t> question_benchmark_;
};

/// n x d_q question vectors, rows aligned with dataset question ids once paired.
struct QuestionEmbeddingTable {
    std::vector<std::string> keys;
    Matrix vectors;

    std::size_t size() const noexcept { return static_cast<std::size_t>(vectors.rows()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(vectors.cols()); }
    std::span<const double> row(std::size_t q) const {
        return {vectors.data() + q * dim(), dim()};
    }
};

struct SplitAssignment {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
    std::uint64_t seed = 0;
};

struct SplitRatios {
    double train = 0.8;
    double validation = 0.1;
    double test = 0.1;
};

// ---------------------------------------------------------------------------
// Loading and saving

/// Build a dataset from string-keyed rows; keys are indexed in lexicographic order.
class DatasetBuilder {
public:
    struct Row {
        std::string model;
        std::string question;
        std::string benchmark;
        int label;
        std::size_t line;
    };

    void add(std::string model, std::string question, std::string benchmark, int label, std::size_t line = 0) {
        rows_.push_back({std::move(model), std::move(question), std::move(benchmark), label, line});
    }

    CorrectnessDataset build(const std::string& source = "<memory>") const {
        std::set<std::string> models, questions, benches;
        for (const auto& r : rows_) {
            models.insert(r.model);
            questions.insert(r.question);
            benches.insert(r.benchmark);
        }
        auto index = [](const std::set<std::string>& s) {
            std::unordered_map<std::string, std::size_t> idx;
            std::size_t i = 0;
            for (const auto& k : s) idx.emplace(k, i++);
            return idx;
        };
        const auto mi = index(models), qi = index(questions), bi = index(benches);
        std::vector<CorrectnessRecord> records;
        records.reserve(rows_.size());
        std::unordered_map<std::uint64_t, std::size_t> seen;
        seen.reserve(rows_.size());
        for (const auto& r : rows_) {
            CorrectnessRecord rec{mi.at(r.model), qi.at(r.question), static_cast<std::uint32_t>(bi.at(r.benchmark)),
                                  r.label};
            const std::uint64_t key = static_cast<std::uint64_t>(rec.model_id) * questions.size() + rec.question_id;
            if (const auto [it, fresh] = seen.emplace(key, r.line); !fresh)
                throw DuplicateError(source + ":" + std::to_string(r.line) + ": duplicate record for model '" +
                                     r.model + "', question '" + r.question + "' (first seen on line " +
                                     std::to_string(it->second) + ")");
            records.push_back(rec);
        }
        return CorrectnessDataset({models.begin(), models.end()}, {questions.begin(), questions.end()},
                                  {benches.begin(), benches.end()}, std::move(records));
    }

private:
    std::vector<Row> rows_;
};

inline CorrectnessDataset read_correctness(std::istream& in, const std::string& source = "<stream>") {
    csv::Reader reader(in, source);
    const auto header = reader.next();
    if (!header || *header != std::vector<std::string>{"model_id", "question_id", "benchmark", "label"})
        reader.fail("expected header model_id,question_id,benchmark,label");
    DatasetBuilder builder;
    while (auto fields = reader.next()) {
        if (fields->size() != 4) reader.fail("expected 4 fields, got " + std::to_string(fields->size()));
        auto& f = *fields;
        if (f[0].empty() || f[1].empty() || f[2].empty()) reader.fail("empty id or benchmark field");
        int label;
        if (f[3] == "0") {
            label = 0;
        } else if (f[3] == "1") {
            label = 1;
        } else {
            throw DomainError(source + ":" + std::to_string(reader.line()) + ": label must be 0 or 1, got '" + f[3] +
                              "'");
        }
        builder.add(std::move(f[0]), std::move(f[1]), std::move(f[2]), label, reader.line());
    }
    return builder.build(source);
}

inline CorrectnessDataset load_correctness(const std::string& path) {
    auto in = csv::open_input(path);
    return read_correctness(in, path);
}

inline void write_correctness(const CorrectnessDataset& data, std::ostream& out) {
    out << "model_id,question_id,benchmark,label\n";
    for (const auto& r : data.records())
        out << csv::escape(data.model_keys()[r.model_id]) << ',' << csv::escape(data.question_keys()[r.question_id])
            << ',' << csv::escape(data.benchmarks()[r.benchmark]) << ',' << r.label << '\n';
}

inline void save_correctness(const CorrectnessDataset& data, const std::string& path) {
    auto out = csv::open_output(path);
    write_correctness(data, out);
}

inline QuestionEmbeddingTable read_question_embeddings(std::istream& in, const std::string& source = "<stream>") {
    csv::Reader reader(in, source);
    const auto header = reader.next();
    if (!header || header->size() < 2 || (*header)[0] != "question_id")
        reader.fail("expected header question_id,e0,e1,...");
    const std::size_t dim = header->size() - 1;
    for (std::size_t k = 0; k < dim; ++k)
        if ((*header)[k + 1] != "e" + std::to_string(k)) reader.fail("expected column e" + std::to_string(k));
    QuestionEmbeddingTable table;
    std::vector<double> values;
    std::set<std::string> seen;
    while (auto fields = reader.next()) {
        if (fields->size() != dim + 1)
            reader.fail("expected " + std::to_string(dim + 1) + " fields, got " + std::to_string(fields->size()));
        if (!seen.insert((*fields)[0]).second)
            throw DuplicateError(source + ":" + std::to_string(reader.line()) + ": duplicate question '" +
                                 (*fields)[0] + "'");
        for (std::size_t k = 0; k < dim; ++k) {
            const auto v = csv::parse_double((*fields)[k + 1]);
            if (!v) reader.fail("bad number '" + (*fields)[k + 1] + "'");
            if (!std::isfinite(*v)) reader.fail("non-finite embedding entry");
            values.push_back(*v);
        }
        table.keys.push_back(std::move((*fields)[0]));
    }
    table.vectors = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(table.keys.size()),
                                       static_cast<Eigen::Index>(dim));
    return table;
}

inline QuestionEmbeddingTable load_question_embeddings(const std::string& path) {
    auto in = csv::open_input(path);
    return read_question_embeddings(in, path);
}

inline void write_question_embeddings(const QuestionEmbeddingTable& table, std::ostream& out) {
    out << "question_id";
    for (std::size_t k = 0; k < table.dim(); ++k) out << ",e" << k;
    out << '\n';
    for (std::size_t q = 0; q < table.size(); ++q) {
        out << csv::escape(table.keys[q]);
        for (double v : table.row(q)) out << ',' << csv::format_double(v);
        out << '\n';
    }
}

inline void save_question_embeddings(const QuestionEmbeddingTable& table, const std::string& path) {
    auto out = csv::open_output(path);
    write_question_embeddings(table, out);
}

/// Reorder rows so row q is the embedding of dataset question q. Extra rows are dropped.
inline QuestionEmbeddingTable align_embeddings(const QuestionEmbeddingTable& table, const CorrectnessDataset& data) {
    std::unordered_map<std::string, std::size_t> row_of;
    for (std::size_t i = 0; i < table.keys.size(); ++i) row_of.emplace(table.keys[i], i);
    QuestionEmbeddingTable aligned;
    aligned.keys = data.question_keys();
    aligned.vectors.resize(static_cast<Eigen::Index>(data.question_count()), static_cast<Eigen::Index>(table.dim()));
    for (std::size_t q = 0; q < data.question_count(); ++q) {
        const auto it = row_of.find(data.question_keys()[q]);
        if (it == row_of.end())
            throw CoverageError("no embedding for question '" + data.question_keys()[q] + "'");
        aligned.vectors.row(static_cast<Eigen::Index>(q)) = table.vectors.row(static_cast<Eigen::Index>(it->second));
    }
    return aligned;
}

/// Attach names/tags from a `model_id,name,tags` file. Models absent from the file keep their key as name.
inline void read_model_metadata(std::istream& in, CorrectnessDataset& data, const std::string& source = "<stream>") {
    csv::Reader reader(in, source);
    const auto header = reader.next();
    if (!header || *header != std::vector<std::string>{"model_id", "name", "tags"})
        reader.fail("expected header model_id,name,tags");
    auto names = data.model_keys();
    std::vector<std::set<std::string>> tags(data.model_count());
    while (auto fields = reader.next()) {
        if (fields->size() != 3) reader.fail("expected 3 fields, got " + std::to_string(fields->size()));
        const auto& f = *fields;
        const auto it = std::lower_bound(data.model_keys().begin(), data.model_keys().end(), f[0]);
        if (it == data.model_keys().end() || *it != f[0]) continue;
        const auto i = static_cast<std::size_t>(it - data.model_keys().begin());
        if (!f[1].empty()) names[i] = f[1];
        std::size_t start = 0;
        while (start <= f[2].size()) {
            const auto bar = std::min(f[2].find('|', start), f[2].size());
            if (bar > start) tags[i].insert(f[2].substr(start, bar - start));
            start = bar + 1;
        }
    }
    data.set_metadata(std::move(names), std::move(tags));
}

inline void load_model_metadata(const std::string& path, CorrectnessDataset& data) {
    auto in = csv::open_input(path);
    read_model_metadata(in, data, path);
}

inline void write_model_metadata(const CorrectnessDataset& data, std::ostream& out) {
    out << "model_id,name,tags\n";
    for (std::size_t i = 0; i < data.model_count(); ++i) {
        std::string joined;
        for (const auto& t : data.model_tags()[i]) {
            if (!joined.empty()) joined += '|';
            joined += t;
        }
        out << csv::escape(data.model_keys()[i]) << ',' << csv::escape(data.model_names()[i]) << ','
            << csv::escape(joined) << '\n';
    }
}

inline void save_model_metadata(const CorrectnessDataset& data, const std::string& path) {
    auto out = csv::open_output(path);
    write_model_metadata(data, out);
}

// ---------------------------------------------------------------------------
// Splits

/// Largest-remainder apportionment of n items. Equal remainders favour the later bucket.
inline std::vector<std::size_t> apportion(std::size_t n, std::span<const double> ratios) {
    double total = 0.0;
    for (double r : ratios) {
        if (!(r > 0.0)) throw ConfigError("split ratios must be positive");
        total += r;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1, got " + std::to_string(total));

    std::vector<std::size_t> sizes(ratios.size());
    std::vector<double> remainder(ratios.size());
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < ratios.size(); ++i) {
        const double quota = static_cast<double>(n) * ratios[i];
        sizes[i] = static_cast<std::size_t>(std::floor(quota));
        remainder[i] = quota - std::floor(quota);
        assigned += sizes[i];
    }
    std::vector<std::size_t> order(ratios.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (remainder[a] != remainder[b]) return remainder[a] > remainder[b];
        return a > b;
    });
    for (std::size_t k = 0; assigned < n; ++k, ++assigned) ++sizes[order[k % order.size()]];
    return sizes;
}

/// Random (unstratified) three-way split of the given question ids.
inline SplitAssignment split_subset(std::vector<std::size_t> ids, const SplitRatios& ratios, std::uint64_t seed) {
    const double r[3] = {ratios.train, ratios.validation, ratios.test};
    const auto sizes = apportion(ids.size(), r);
    Rng rng(derive_seed(seed, {0x53504c4954ULL}));
    rng.shuffle(std::span<std::size_t>(ids));
    SplitAssignment split;
    split.seed = seed;
    auto first = ids.begin();
    split.train.assign(first, first + static_cast<std::ptrdiff_t>(sizes[0]));
    first += static_cast<std::ptrdiff_t>(sizes[0]);
    split.validation.assign(first, first + static_cast<std::ptrdiff_t>(sizes[1]));
    first += static_cast<std::ptrdiff_t>(sizes[1]);
    split.test.assign(first, ids.end());
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.validation.begin(), split.validation.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

inline SplitAssignment split_questions(const CorrectnessDataset& data, const SplitRatios& ratios, std::uint64_t seed) {
    std::vector<std::size_t> ids(data.question_count());
    std::iota(ids.begin(), ids.end(), 0);
    return split_subset(std::move(ids), ratios, seed);
}

// ---------------------------------------------------------------------------

/// Mean label per model over the question subset.
inline std::vector<double> accuracy_by_model(const CorrectnessDataset& data, std::span<const std::size_t> questions) {
    if (questions.empty()) throw DomainError("accuracy_by_model: empty question subset");
    std::vector<double> acc(data.model_count());
    for (std::size_t i = 0; i < data.model_count(); ++i) {
        std::size_t seen = 0, correct = 0;
        for (auto q : questions) {
            const int y = data.label(i, q);
            if (y < 0) continue;
            ++seen;
            correct += static_cast<std::size_t>(y);
        }
        if (seen == 0) throw CoverageError("model '" + data.model_keys()[i] + "' has no records in the subset");
        acc[i] = static_cast<double>(correct) / static_cast<double>(seen);
    }
    return acc;
}

}  // namespace embedllm
