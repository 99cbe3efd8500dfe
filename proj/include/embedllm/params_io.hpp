#pragma once

// MFParams on disk: one CSV file whose tensors are introduced by
// `# section:<name>` lines, plus a JSON sidecar (<path>.json) carrying
// dimensions, seed, training config and model keys.

#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "csv.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "mf.hpp"

namespace embedllm {

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"embedding_dim", c.embedding_dim}, {"learning_rate", c.learning_rate}, {"epochs", c.epochs},
            {"batch_size", c.batch_size},       {"seed", c.seed},                   {"beta1", c.beta1},
            {"beta2", c.beta2},                 {"epsilon", c.epsilon},             {"weight_decay", c.weight_decay}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.seed = j.value("seed", c.seed);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    return c;
}

namespace detail {

inline void write_rows(std::ostream& out, const std::string& name, const double* data, Eigen::Index rows,
                       Eigen::Index cols) {
    out << "# section:" << name << '\n';
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            if (j) out << ',';
            out << csv::format_double(data[i * cols + j]);
        }
        out << '\n';
    }
}

}  // namespace detail

inline void write_params(const MFParams& p, std::ostream& out) {
    detail::write_rows(out, "model_table", p.model_table.data(), p.model_table.rows(), p.model_table.cols());
    detail::write_rows(out, "projection_weight", p.projection_weight.data(), p.projection_weight.rows(),
                       p.projection_weight.cols());
    detail::write_rows(out, "projection_bias", p.projection_bias.data(), 1, p.projection_bias.size());
    detail::write_rows(out, "head_weight", p.head_weight.data(), p.head_weight.rows(), p.head_weight.cols());
    detail::write_rows(out, "head_bias", p.head_bias.data(), 1, p.head_bias.size());
}

inline MFParams read_params(std::istream& in, const std::string& source = "<stream>") {
    std::map<std::string, std::vector<std::vector<double>>> sections;
    std::vector<std::vector<double>>* current = nullptr;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line.rfind("# section:", 0) == 0) {
            const auto name = line.substr(10);
            if (sections.count(name)) throw ParseError(source, lineno, "repeated section '" + name + "'");
            current = &sections[name];
            continue;
        }
        if (line[0] == '#') continue;
        if (!current) throw ParseError(source, lineno, "data before first section header");
        std::vector<double> row;
        for (const auto& f : csv::split_line(line)) {
            const auto v = csv::parse_double(f);
            if (!v) throw ParseError(source, lineno, "bad number '" + f + "'");
            row.push_back(*v);
        }
        if (!current->empty() && current->front().size() != row.size())
            throw ParseError(source, lineno, "ragged section");
        current->push_back(std::move(row));
    }
    auto take = [&](const std::string& name) {
        const auto it = sections.find(name);
        if (it == sections.end() || it->second.empty()) throw ParseError(source, lineno, "missing section " + name);
        const auto& rows = it->second;
        Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
        for (std::size_t i = 0; i < rows.size(); ++i)
            for (std::size_t j = 0; j < rows[i].size(); ++j)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
        return m;
    };
    MFParams p;
    p.model_table = take("model_table");
    p.projection_weight = take("projection_weight");
    const Matrix pb = take("projection_bias");
    p.head_weight = take("head_weight");
    const Matrix hb = take("head_bias");
    p.projection_bias = Eigen::Map<const Vector>(pb.data(), pb.size());
    p.head_bias = Eigen::Map<const Vector>(hb.data(), hb.size());
    const auto d_e = p.model_table.cols();
    if (p.projection_weight.cols() != d_e || p.projection_bias.size() != d_e || p.head_weight.rows() != 2 ||
        p.head_weight.cols() != d_e || p.head_bias.size() != 2)
        throw ParseError(source, lineno, "inconsistent parameter dimensions");
    if (!p.all_finite()) throw ParseError(source, lineno, "non-finite parameter");
    return p;
}

struct StoredParams {
    MFParams params;
    nlohmann::json sidecar;
    std::vector<std::string> model_keys;
};

inline void save_params(const MFParams& p, const std::string& path, const TrainConfig& config,
                        const std::vector<std::string>& model_keys) {
    {
        auto out = csv::open_output(path);
        write_params(p, out);
    }
    const nlohmann::json side = {{"model_count", p.model_count()},
                                 {"question_dim", p.question_dim()},
                                 {"embedding_dim", p.embedding_dim()},
                                 {"seed", config.seed},
                                 {"config", to_json(config)},
                                 {"model_keys", model_keys}};
    auto out = csv::open_output(path + ".json");
    out << side.dump(2) << '\n';
}

inline StoredParams load_params(const std::string& path) {
    StoredParams s;
    {
        auto in = csv::open_input(path);
        s.params = read_params(in, path);
    }
    auto in = csv::open_input(path + ".json");
    try {
        s.sidecar = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(path + ".json: " + e.what());
    }
    s.model_keys = s.sidecar.value("model_keys", std::vector<std::string>{});
    if (s.sidecar.value("model_count", s.params.model_count()) != s.params.model_count() ||
        s.sidecar.value("question_dim", s.params.question_dim()) != s.params.question_dim() ||
        s.sidecar.value("embedding_dim", s.params.embedding_dim()) != s.params.embedding_dim())
        throw Error(path + ".json: dimensions disagree with parameter file");
    if (s.model_keys.empty())
        for (std::size_t i = 0; i < s.params.model_count(); ++i) s.model_keys.push_back(std::to_string(i));
    if (s.model_keys.size() != s.params.model_count())
        throw Error(path + ".json: model_keys length disagrees with model_table");
    return s;
}

// ---------------------------------------------------------------------------
// Model-embedding export: model_id,e0,...,e{d_e-1}

struct ModelEmbeddings {
    std::vector<std::string> keys;
    Matrix vectors;  // m x d_e
};

inline void write_model_embeddings(const ModelEmbeddings& e, std::ostream& out) {
    out << "model_id";
    for (Eigen::Index k = 0; k < e.vectors.cols(); ++k) out << ",e" << k;
    out << '\n';
    for (std::size_t i = 0; i < e.keys.size(); ++i) {
        out << csv::escape(e.keys[i]);
        for (Eigen::Index k = 0; k < e.vectors.cols(); ++k)
            out << ',' << csv::format_double(e.vectors(static_cast<Eigen::Index>(i), k));
        out << '\n';
    }
}

inline void save_model_embeddings(const ModelEmbeddings& e, const std::string& path) {
    auto out = csv::open_output(path);
    write_model_embeddings(e, out);
}

inline ModelEmbeddings read_model_embeddings(std::istream& in, const std::string& source = "<stream>") {
    csv::Reader reader(in, source);
    const auto header = reader.next();
    if (!header || header->size() < 2 || (*header)[0] != "model_id") reader.fail("expected header model_id,e0,...");
    const std::size_t dim = header->size() - 1;
    ModelEmbeddings e;
    std::vector<double> values;
    while (auto fields = reader.next()) {
        if (fields->size() != dim + 1) reader.fail("expected " + std::to_string(dim + 1) + " fields");
        for (std::size_t k = 0; k < dim; ++k) {
            const auto v = csv::parse_double((*fields)[k + 1]);
            if (!v || !std::isfinite(*v)) reader.fail("bad number '" + (*fields)[k + 1] + "'");
            values.push_back(*v);
        }
        e.keys.push_back((*fields)[0]);
    }
    e.vectors = Eigen::Map<Matrix>(values.data(), static_cast<Eigen::Index>(e.keys.size()),
                                   static_cast<Eigen::Index>(dim));
    return e;
}

inline ModelEmbeddings load_model_embeddings(const std::string& path) {
    auto in = csv::open_input(path);
    return read_model_embeddings(in, path);
}

}  // namespace embedllm
