#pragma once

// Evaluation heads: mapping descriptors for trained models, a multinomial
// logistic-regression classifier trained with the shared SGD+momentum
// optimizer, and rollout error metrics against the persistence baseline.

#include <cmath>
#include <cstdint>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "relseq/hgae.hpp"
#include "relseq/matrix.hpp"
#include "relseq/training.hpp"

namespace relseq {

enum class DescriptorKind { M1First, M1Second, M1Concat, M2 };

inline const char* descriptor_name(DescriptorKind k) {
    switch (k) {
        case DescriptorKind::M1First: return "m1-first";
        case DescriptorKind::M1Second: return "m1-second";
        case DescriptorKind::M1Concat: return "m1-concat";
        case DescriptorKind::M2: return "m2";
    }
    return "?";
}

inline DescriptorKind descriptor_from_name(const std::string& s) {
    if (s == "m1-first") return DescriptorKind::M1First;
    if (s == "m1-second") return DescriptorKind::M1Second;
    if (s == "m1-concat") return DescriptorKind::M1Concat;
    if (s == "m2") return DescriptorKind::M2;
    throw std::invalid_argument("unknown descriptor kind: " + s);
}

namespace detail {

inline void need_frames(const Sequence& frames, std::size_t need) {
    if (frames.size() < need)
        throw std::invalid_argument("extract_descriptors: need " + std::to_string(need) +
                                    " frames, got " + std::to_string(frames.size()));
}

} // namespace detail

// Descriptor columns for a batch of sequences (first 2-3 frames used).
inline Matrix extract_descriptors(const GaeParams& p, const Sequence& frames,
                                  DescriptorKind kind) {
    switch (kind) {
        case DescriptorKind::M1First:
            detail::need_frames(frames, 2);
            return infer_mappings(p, frames[0], frames[1]);
        case DescriptorKind::M1Second:
            detail::need_frames(frames, 3);
            return infer_mappings(p, frames[1], frames[2]);
        case DescriptorKind::M1Concat: {
            detail::need_frames(frames, 3);
            return vconcat({infer_mappings(p, frames[0], frames[1]),
                            infer_mappings(p, frames[1], frames[2])});
        }
        case DescriptorKind::M2:
            throw std::invalid_argument("extract_descriptors: m2 requires a two-layer model");
    }
    throw std::invalid_argument("extract_descriptors: bad kind");
}

inline Matrix extract_descriptors(const HgaeParams& p, const Sequence& frames,
                                  DescriptorKind kind) {
    if (kind == DescriptorKind::M2) {
        detail::need_frames(frames, 3);
        const HgaeHierarchy h = infer_hierarchy(p, frames[0], frames[1], frames[2]);
        return h.m2;
    }
    return extract_descriptors(p.layer1, frames, kind);
}

// --- multinomial logistic regression -------------------------------------

struct Classifier {
    Matrix weights;  // classes x dim
    Matrix bias;     // classes x 1

    std::size_t classes() const noexcept { return weights.rows(); }
    std::size_t dim() const noexcept { return weights.cols(); }
};

namespace detail {

// Column-wise softmax of W X + b, numerically stabilized.
inline Matrix softmax_scores(const Classifier& c, const Matrix& x) {
    Matrix z = matmul(c.weights, x);
    for (std::size_t r = 0; r < z.rows(); ++r)
        for (std::size_t col = 0; col < z.cols(); ++col) z(r, col) += c.bias(r, 0);
    for (std::size_t col = 0; col < z.cols(); ++col) {
        double mx = z(0, col);
        for (std::size_t r = 1; r < z.rows(); ++r) mx = std::max(mx, z(r, col));
        double sum = 0.0;
        for (std::size_t r = 0; r < z.rows(); ++r) {
            z(r, col) = std::exp(z(r, col) - mx);
            sum += z(r, col);
        }
        for (std::size_t r = 0; r < z.rows(); ++r) z(r, col) /= sum;
    }
    return z;
}

} // namespace detail

// Mean cross-entropy plus 0.5*l2*|W|^2, with exact gradients.
inline std::pair<double, std::pair<Matrix, Matrix>> logreg_loss_and_grads(
    const Classifier& c, const Matrix& x, const std::vector<std::int64_t>& y, double l2) {
    if (x.cols() != y.size())
        throw ShapeError("logreg: " + std::to_string(x.cols()) + " samples vs " +
                         std::to_string(y.size()) + " labels");
    const std::size_t n = y.size();
    Matrix probs = detail::softmax_scores(c, x);
    double loss = 0.0;
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto yi = static_cast<std::size_t>(y[i]);
        if (y[i] < 0 || yi >= c.classes())
            throw std::invalid_argument("logreg: label " + std::to_string(y[i]) +
                                        " outside [0," + std::to_string(c.classes()) + ")");
        loss -= scale * std::log(std::max(probs(yi, i), 1e-300));
        probs(yi, i) -= 1.0;  // dZ = (P - Y)/n
    }
    scale_in_place(probs, scale);
    Matrix dw = matmul(probs, x, false, true);
    axpy(dw, l2, c.weights);
    loss += 0.5 * l2 * sum_squares(c.weights);
    Matrix db(c.classes(), 1);
    for (std::size_t r = 0; r < probs.rows(); ++r) {
        double s = 0.0;
        for (std::size_t i = 0; i < probs.cols(); ++i) s += probs(r, i);
        db(r, 0) = s;
    }
    return {loss, {std::move(dw), std::move(db)}};
}

inline double logreg_loss(const Classifier& c, const Matrix& x,
                          const std::vector<std::int64_t>& y, double l2) {
    const Matrix probs = detail::softmax_scores(c, x);
    double loss = 0.0;
    const double scale = 1.0 / static_cast<double>(y.size());
    for (std::size_t i = 0; i < y.size(); ++i)
        loss -= scale * std::log(std::max(probs(static_cast<std::size_t>(y[i]), i), 1e-300));
    return loss + 0.5 * l2 * sum_squares(c.weights);
}

// Minibatch SGD with momentum on the softmax cross-entropy. Weights start
// at zero, so the objective's convexity guarantees the final training loss
// does not exceed the initial one.
inline Classifier train_logreg(const Matrix& x, const std::vector<std::int64_t>& y,
                               std::size_t classes, const TrainConfig& cfg) {
    cfg.validate();
    if (x.cols() != y.size()) throw ShapeError("train_logreg: sample/label count mismatch");
    if (x.cols() == 0) throw std::invalid_argument("train_logreg: empty training set");
    Classifier c{Matrix(classes, x.rows()), Matrix(classes, 1)};
    Matrix vw(classes, x.rows()), vb(classes, 1);
    Rng shuffle_rng = Rng(cfg.seed).split(0x7u);
    const std::size_t n = y.size();
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto order = shuffled_indices(shuffle_rng, n);
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, n);
            const std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
            std::vector<std::int64_t> yb(idx.size());
            for (std::size_t k = 0; k < idx.size(); ++k) yb[k] = y[idx[k]];
            auto [loss, grads] = logreg_loss_and_grads(c, x.gather_cols(idx), yb, cfg.l2);
            if (!std::isfinite(loss))
                throw DivergenceError("train_logreg: non-finite loss at epoch " +
                                          std::to_string(epoch),
                                      epoch);
            sgd_momentum_step(c.weights, grads.first, vw, cfg.learning_rate, cfg.momentum);
            sgd_momentum_step(c.bias, grads.second, vb, cfg.learning_rate, cfg.momentum);
        }
    }
    return c;
}

// Argmax predictions; ties go to the lowest class index.
inline std::vector<std::int64_t> predict_classes(const Classifier& c, const Matrix& x) {
    Matrix z = matmul(c.weights, x);
    std::vector<std::int64_t> out(x.cols());
    for (std::size_t i = 0; i < x.cols(); ++i) {
        std::size_t best = 0;
        double best_v = z(0, i) + c.bias(0, 0);
        for (std::size_t r = 1; r < z.rows(); ++r) {
            const double v = z(r, i) + c.bias(r, 0);
            if (v > best_v) {
                best_v = v;
                best = r;
            }
        }
        out[i] = static_cast<std::int64_t>(best);
    }
    return out;
}

inline double accuracy(const Classifier& c, const Matrix& x, const std::vector<std::int64_t>& y) {
    if (x.cols() != y.size()) throw ShapeError("accuracy: sample/label count mismatch");
    if (y.empty()) throw std::invalid_argument("accuracy: empty evaluation set");
    const auto pred = predict_classes(c, x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (pred[i] == y[i]) ++correct;
    return static_cast<double>(correct) / static_cast<double>(y.size());
}

// --- rollout metrics ------------------------------------------------------

struct RolloutMse {
    std::vector<double> per_step;              // model, per prediction step
    std::vector<double> persistence_per_step;  // last seed frame held constant
    double mean = 0.0;
    double persistence_mean = 0.0;
};

// Per-element mean squared error at each step, plus the persistence
// baseline that repeats `last_seed` forever.
inline RolloutMse rollout_mse(const Sequence& pred, const Sequence& truth,
                              const Matrix& last_seed) {
    if (pred.size() != truth.size())
        throw ShapeError("rollout_mse: " + std::to_string(pred.size()) + " predictions vs " +
                         std::to_string(truth.size()) + " truth frames");
    RolloutMse r;
    for (std::size_t t = 0; t < pred.size(); ++t) {
        if (!pred[t].same_shape(truth[t]) || !last_seed.same_shape(truth[t]))
            throw ShapeError("rollout_mse: frame shape mismatch at step " + std::to_string(t));
        const double denom = static_cast<double>(truth[t].size());
        r.per_step.push_back(sum_squares(sub(pred[t], truth[t])) / denom);
        r.persistence_per_step.push_back(sum_squares(sub(last_seed, truth[t])) / denom);
        r.mean += r.per_step.back();
        r.persistence_mean += r.persistence_per_step.back();
    }
    if (!pred.empty()) {
        r.mean /= static_cast<double>(pred.size());
        r.persistence_mean /= static_cast<double>(pred.size());
    }
    return r;
}

} // namespace relseq
