#pragma once

// Encoder-decoder correctness model ("matrix factorization").
//
//   v_m  = model_table[m]                      (learned model embedding)
//   p_q  = projection_weight^T x_q + projection_bias
//   h    = v_m ⊙ p_q
//   (l0, l1) = head_weight h + head_bias
//   s    = σ(l1 - l0)
//
// Trained with mean binary cross-entropy on s, written in logit form
// L = softplus(z) - y z with z = l1 - l0, and Adam.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <type_traits>
#include <span>
#include <unordered_map>
#include <vector>

#include "dataset.hpp"
#include "error.hpp"
#include "linalg.hpp"
#include "random.hpp"

namespace embedllm {

struct TrainConfig {
    std::size_t embedding_dim = 128;
    double learning_rate = 1e-3;
    std::size_t epochs = 30;
    std::size_t batch_size = 512;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;

    void validate() const {
        if (embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
            throw ConfigError("Adam betas must lie in [0, 1)");
        if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
        if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
    }
};

struct MFParams {
    Matrix model_table;        // m x d_e
    Matrix projection_weight;  // d_q x d_e
    Vector projection_bias;    // d_e
    Matrix head_weight;        // 2 x d_e, row 0 -> logit 0, row 1 -> logit 1
    Vector head_bias;          // 2

    std::size_t model_count() const noexcept { return static_cast<std::size_t>(model_table.rows()); }
    std::size_t question_dim() const noexcept { return static_cast<std::size_t>(projection_weight.rows()); }
    std::size_t embedding_dim() const noexcept { return static_cast<std::size_t>(model_table.cols()); }

    static MFParams zeros(std::size_t m, std::size_t d_q, std::size_t d_e) {
        const auto M = static_cast<Eigen::Index>(m), Q = static_cast<Eigen::Index>(d_q),
                   E = static_cast<Eigen::Index>(d_e);
        return {Matrix::Zero(M, E), Matrix::Zero(Q, E), Vector::Zero(E), Matrix::Zero(2, E), Vector::Zero(2)};
    }

    MFParams zeros_like() const { return zeros(model_count(), question_dim(), embedding_dim()); }

    bool all_finite() const {
        return model_table.allFinite() && projection_weight.allFinite() && projection_bias.allFinite() &&
               head_weight.allFinite() && head_bias.allFinite();
    }

    bool operator==(const MFParams&) const = default;
};

/// Apply f(a_tensor, b_tensor, ...) to matching tensors of several MFParams,
/// each tensor viewed as a flat span (span<const double> for const params).
template <typename F, typename... P>
void for_each_tensor(F&& f, P&... params) {
    auto flat = [](auto& t) {
        using T = std::remove_pointer_t<decltype(t.data())>;
        return std::span<T>(t.data(), static_cast<std::size_t>(t.size()));
    };
    f(flat(params.model_table)...);
    f(flat(params.projection_weight)...);
    f(flat(params.projection_bias)...);
    f(flat(params.head_weight)...);
    f(flat(params.head_bias)...);
}

/// Uniform in [-1/sqrt(d_e), 1/sqrt(d_e)] for weight tensors, zero biases.
inline MFParams init_params(std::size_t m, std::size_t d_q, const TrainConfig& config) {
    if (m < 1 || d_q < 1) throw ConfigError("init_params: model count and question dim must be >= 1");
    config.validate();
    auto p = MFParams::zeros(m, d_q, config.embedding_dim);
    const double bound = 1.0 / std::sqrt(static_cast<double>(config.embedding_dim));
    Rng rng(derive_seed(config.seed, {0x494e4954ULL}));
    auto fill = [&](Matrix& t) {
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(-bound, bound);
    };
    fill(p.model_table);
    fill(p.projection_weight);
    fill(p.head_weight);
    return p;
}

// ---------------------------------------------------------------------------
// Scalar pieces

inline double sigmoid(double z) {
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
    const double s = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
    return std::clamp(s, lo, hi);
}

/// log(1 + e^z) without overflow.
inline double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

/// BCE of a probability. The score is clamped into (0, 1) so the result stays finite.
inline double bce_loss(double score, int label) {
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
    const double s = std::clamp(score, lo, hi);
    return label == 1 ? -std::log(s) : -std::log1p(-s);
}

/// s - y computed without the clamp in sigmoid(), so it can reach values far below machine epsilon.
inline double logistic_residual(double z, int label) {
    const double e = std::exp(-std::abs(z));
    const double small = e / (1.0 + e);  // σ(-|z|)
    if (label == 1) return z >= 0.0 ? -small : -(1.0 / (1.0 + e));
    return z >= 0.0 ? 1.0 / (1.0 + e) : small;
}

/// BCE written on the logit difference; equals bce_loss(sigmoid(z), y) without the round trip.
inline double bce_from_logit(double z, int label) { return softplus(z) - static_cast<double>(label) * z; }

// ---------------------------------------------------------------------------
// Forward

struct ForwardResult {
    double logit0;
    double logit1;
    double score;
};

inline void check_question(const MFParams& params, std::span<const double> q) {
    if (q.size() != params.question_dim())
        throw DomainError("question vector has dim " + std::to_string(q.size()) + ", expected " +
                          std::to_string(params.question_dim()));
    for (double v : q)
        if (!std::isfinite(v)) throw NumericError("non-finite question vector entry");
}

/// Projected question p = W^T x + c.
inline Vector project(const MFParams& params, std::span<const double> q) {
    const Eigen::Map<const Vector> x(q.data(), static_cast<Eigen::Index>(q.size()));
    return params.projection_weight.transpose() * x + params.projection_bias;
}

/// Forward pass from an already projected question.
inline ForwardResult forward_projected(const MFParams& params, std::size_t model, const Vector& p) {
    const Vector h = params.model_table.row(static_cast<Eigen::Index>(model)).transpose().cwiseProduct(p);
    const double l0 = params.head_weight.row(0).dot(h) + params.head_bias(0);
    const double l1 = params.head_weight.row(1).dot(h) + params.head_bias(1);
    return {l0, l1, sigmoid(l1 - l0)};
}

inline ForwardResult forward(const MFParams& params, std::size_t model, std::span<const double> q) {
    if (model >= params.model_count())
        throw DomainError("model id " + std::to_string(model) + " out of range");
    check_question(params, q);
    return forward_projected(params, model, project(params, q));
}

/// Label 1 iff score >= 0.5, i.e. iff logit1 - logit0 >= 0.
inline int predict_correctness(const MFParams& params, std::size_t model, std::span<const double> q) {
    const auto f = forward(params, model, q);
    return f.logit1 - f.logit0 >= 0.0 ? 1 : 0;
}

/// Batched scoring: all questions projected once, then
/// z(m, q) = Σ_k d_k v_mk p_qk + (b1 - b0) with d = w1 - w0.
class Scorer {
public:
    Scorer(const MFParams& params, const Matrix& questions)
        : bias_diff_(params.head_bias(1) - params.head_bias(0)) {
        if (static_cast<std::size_t>(questions.cols()) != params.question_dim())
            throw DomainError("question table dim does not match parameters");
        if (!questions.allFinite()) throw NumericError("non-finite question vector entry");
        const Vector d = (params.head_weight.row(1) - params.head_weight.row(0)).transpose();
        scaled_models_ = params.model_table * d.asDiagonal();
        projected_ = questions * params.projection_weight;
        projected_.rowwise() += params.projection_bias.transpose();
    }

    /// z minus the model-independent bias difference; same argmax as the score.
    double key(std::size_t model, std::size_t question) const {
        return scaled_models_.row(static_cast<Eigen::Index>(model))
            .dot(projected_.row(static_cast<Eigen::Index>(question)));
    }
    double logit_diff(std::size_t model, std::size_t question) const { return key(model, question) + bias_diff_; }
    int predict(std::size_t model, std::size_t question) const { return logit_diff(model, question) >= 0.0 ? 1 : 0; }

    /// questions x models matrix of routing keys.
    Matrix keys() const { return projected_ * scaled_models_.transpose(); }

    std::size_t question_count() const noexcept { return static_cast<std::size_t>(projected_.rows()); }

private:
    double bias_diff_;
    Matrix scaled_models_;
    Matrix projected_;
};

/// Fraction of records with question in `questions` whose label is predicted correctly.
inline double test_accuracy(const MFParams& params, const CorrectnessDataset& data,
                            const QuestionEmbeddingTable& embeddings, std::span<const std::size_t> questions) {
    if (questions.empty()) throw DomainError("test_accuracy: empty question set");
    const Scorer scorer(params, embeddings.vectors);
    std::size_t seen = 0, correct = 0;
    for (auto q : questions)
        for (std::size_t m = 0; m < data.model_count(); ++m) {
            const int y = data.label(m, q);
            if (y < 0) continue;
            ++seen;
            correct += scorer.predict(m, q) == y;
        }
    if (seen == 0) throw DomainError("test_accuracy: no records for the question set");
    return static_cast<double>(correct) / static_cast<double>(seen);
}

// ---------------------------------------------------------------------------
// Gradients

struct Example {
    std::size_t model;
    std::span<const double> question;
    int label;
};

struct GradientResult {
    MFParams grad;
    double loss;  // mean BCE over the batch
};

inline double mean_loss(const MFParams& params, std::span<const Example> batch) {
    if (batch.empty()) throw DomainError("mean_loss: empty batch");
    double total = 0.0;
    for (const auto& e : batch) {
        const auto f = forward(params, e.model, e.question);
        total += bce_from_logit(f.logit1 - f.logit0, e.label);
    }
    return total / static_cast<double>(batch.size());
}

/// Exact mean-over-batch gradients. dL/dz = s - y, then back through the
/// head, the Hadamard product and the affine projection. Questions that
/// appear several times in a batch (same data pointer) are projected once.
inline GradientResult gradients(const MFParams& params, std::span<const Example> batch) {
    if (batch.empty()) throw DomainError("gradients: empty batch");
    const auto d_e = static_cast<Eigen::Index>(params.embedding_dim());
    GradientResult out{params.zeros_like(), 0.0};
    auto& g = out.grad;

    std::unordered_map<const double*, std::size_t> slot_of;
    std::vector<std::size_t> slot(batch.size());
    std::vector<std::span<const double>> unique;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& e = batch[i];
        if (e.model >= params.model_count()) throw DomainError("model id out of range");
        const auto [it, fresh] = slot_of.emplace(e.question.data(), unique.size());
        if (fresh) {
            check_question(params, e.question);
            unique.push_back(e.question);
        }
        slot[i] = it->second;
    }
    Matrix proj(static_cast<Eigen::Index>(unique.size()), d_e);
    for (std::size_t u = 0; u < unique.size(); ++u) proj.row(static_cast<Eigen::Index>(u)) = project(params, unique[u]);
    Matrix dproj = Matrix::Zero(proj.rows(), d_e);

    const Eigen::RowVectorXd diff = params.head_weight.row(1) - params.head_weight.row(0);
    const double bias_diff = params.head_bias(1) - params.head_bias(0);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    Eigen::RowVectorXd h(d_e);
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& e = batch[i];
        const auto row = static_cast<Eigen::Index>(e.model);
        const auto u = static_cast<Eigen::Index>(slot[i]);
        h = params.model_table.row(row).cwiseProduct(proj.row(u));
        const double z = diff.dot(h) + bias_diff;
        out.loss += bce_from_logit(z, e.label) * inv_n;
        const double dz = logistic_residual(z, e.label) * inv_n;
        g.head_weight.row(1) += dz * h;
        g.head_weight.row(0) -= dz * h;
        g.head_bias(1) += dz;
        g.head_bias(0) -= dz;
        g.model_table.row(row) += dz * diff.cwiseProduct(proj.row(u));
        dproj.row(u) += dz * diff.cwiseProduct(params.model_table.row(row));
    }
    for (std::size_t u = 0; u < unique.size(); ++u) {
        const Eigen::Map<const Vector> x(unique[u].data(), static_cast<Eigen::Index>(unique[u].size()));
        const auto du = dproj.row(static_cast<Eigen::Index>(u));
        g.projection_weight.noalias() += x * du;
        g.projection_bias += du.transpose();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Optimizer

class Adam {
public:
    Adam(const MFParams& like, const TrainConfig& config)
        : first_(like.zeros_like()), second_(like.zeros_like()), config_(config) {}

    void step(MFParams& params, MFParams& grad) {
        ++t_;
        const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
        const double b1 = config_.beta1, b2 = config_.beta2, lr = config_.learning_rate, eps = config_.epsilon,
                     wd = config_.weight_decay;
        for_each_tensor(
            [&](std::span<double> p, std::span<double> g, std::span<double> m, std::span<double> v) {
                for (std::size_t i = 0; i < p.size(); ++i) {
                    const double gi = g[i] + wd * p[i];
                    m[i] = b1 * m[i] + (1.0 - b1) * gi;
                    v[i] = b2 * v[i] + (1.0 - b2) * gi * gi;
                    p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
                }
            },
            params, grad, first_, second_);
    }

private:
    MFParams first_;
    MFParams second_;
    TrainConfig config_;
    std::size_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Training

struct TrainHistory {
    std::vector<double> train_loss;           // mean BCE per epoch
    std::vector<double> validation_accuracy;  // NaN when the split has no validation questions
    std::size_t best_epoch = 0;               // 1-based epoch whose parameters were returned
};

struct TrainResult {
    MFParams params;
    TrainHistory history;
};

/// Records whose question is in `questions`, in record order.
inline std::vector<Example> collect_examples(const CorrectnessDataset& data, const QuestionEmbeddingTable& embeddings,
                                             std::span<const std::size_t> questions) {
    std::vector<char> keep(data.question_count(), 0);
    for (auto q : questions) keep.at(q) = 1;
    std::vector<Example> out;
    for (const auto& r : data.records())
        if (keep[r.question_id]) out.push_back({r.model_id, embeddings.row(r.question_id), r.label});
    return out;
}

/// Minibatch Adam for `config.epochs` epochs, keeping the parameters with the
/// best validation accuracy (first best wins). `init` overrides init_params.
inline TrainResult train(const CorrectnessDataset& data, const QuestionEmbeddingTable& embeddings,
                         const SplitAssignment& split, const TrainConfig& config,
                         std::optional<MFParams> init = std::nullopt) {
    config.validate();
    if (embeddings.size() != data.question_count())
        throw DomainError("embedding table has " + std::to_string(embeddings.size()) + " rows, dataset has " +
                          std::to_string(data.question_count()) + " questions");
    if (split.train.empty()) throw DomainError("train split is empty");

    MFParams params = init ? std::move(*init) : init_params(data.model_count(), embeddings.dim(), config);
    if (params.model_count() != data.model_count() || params.question_dim() != embeddings.dim() ||
        params.embedding_dim() != config.embedding_dim)
        throw DomainError("initial parameters do not match dataset and config dimensions");

    const auto examples = collect_examples(data, embeddings, split.train);
    if (examples.empty()) throw DomainError("train split has no records");

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(config.seed, {0x53485546ULL}));
    Adam adam(params, config);

    TrainResult result{params, {}};
    double best = -1.0;
    std::vector<Example> batch;
    batch.reserve(config.batch_size);
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            batch.clear();
            const std::size_t stop = std::min(order.size(), start + config.batch_size);
            for (std::size_t i = start; i < stop; ++i) batch.push_back(examples[order[i]]);
            auto [grad, loss] = gradients(params, batch);
            if (!std::isfinite(loss)) throw TrainingError(epoch, "training loss became non-finite");
            epoch_loss += loss * static_cast<double>(batch.size());
            adam.step(params, grad);
        }
        if (!params.all_finite()) throw TrainingError(epoch, "parameters became non-finite");
        result.history.train_loss.push_back(epoch_loss / static_cast<double>(examples.size()));

        double val = std::numeric_limits<double>::quiet_NaN();
        if (!split.validation.empty()) val = test_accuracy(params, data, embeddings, split.validation);
        result.history.validation_accuracy.push_back(val);
        if (split.validation.empty()) {
            result.params = params;
            result.history.best_epoch = epoch;
        } else if (val > best) {
            best = val;
            result.params = params;
            result.history.best_epoch = epoch;
        }
    }
    return result;
}

}  // namespace embedllm
