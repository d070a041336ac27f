#pragma once

// Optimizers and training loops: SGD with momentum, reconstructive
// pretraining of either GAE layer, and multi-step predictive training that
// backpropagates the k-step prediction error through the full unrolled
// inference-prediction graph (re-inference on predicted frames included; no
// teacher forcing). The prediction horizon follows a per-epoch schedule so k
// can be raised during training.

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "relseq/gae.hpp"
#include "relseq/hgae.hpp"
#include "relseq/matrix.hpp"
#include "relseq/rng.hpp"

namespace relseq {

struct TrainConfig {
    double learning_rate = 0.001;
    double momentum = 0.9;
    std::size_t epochs = 100;
    std::size_t batch_size = 100;
    // (first epoch, horizon k); k values must be non-decreasing.
    std::vector<std::pair<std::size_t, std::size_t>> horizon_schedule = {{0, 1}};
    double l2 = 0.0;
    double clip_norm = 0.0;  // 0 disables gradient clipping
    std::uint64_t seed = 0;
    bool determinism = true;

    void validate() const {
        if (momentum < 0.0 || momentum >= 1.0)
            throw std::invalid_argument("TrainConfig: momentum must be in [0,1)");
        if (l2 < 0.0) throw std::invalid_argument("TrainConfig: l2 must be >= 0");
        if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be > 0");
        std::size_t prev_k = 0;
        for (const auto& [epoch, k] : horizon_schedule) {
            if (k < 1) throw std::invalid_argument("TrainConfig: horizon k must be >= 1");
            if (k < prev_k)
                throw std::invalid_argument("TrainConfig: horizon k values must be non-decreasing");
            prev_k = k;
        }
    }

    std::size_t horizon_at(std::size_t epoch) const {
        std::size_t k = 1;
        for (const auto& [start, kk] : horizon_schedule)
            if (start <= epoch) k = kk;
        return k;
    }

    std::size_t max_horizon() const {
        std::size_t k = 1;
        for (const auto& [start, kk] : horizon_schedule) k = std::max(k, kk);
        return k;
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    std::size_t k = 0;  // 0 for reconstructive phases
    double loss = 0.0;
    double seconds = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::string checkpoint_ref;
    double wall_seconds = 0.0;

    // One JSON object per line. Deterministic mode writes seconds as 0 so
    // reruns produce byte-identical files.
    void write_jsonl(std::ostream& os, bool zero_seconds) const {
        os.precision(17);
        for (const auto& e : epochs) {
            os << "{\"epoch\":" << e.epoch << ",\"k\":" << e.k << ",\"loss\":" << e.loss
               << ",\"seconds\":" << (zero_seconds ? 0.0 : e.seconds) << "}\n";
        }
    }
};

// v <- momentum * v - lr * g;  theta <- theta + v
inline void sgd_momentum_step(Matrix& params, const Matrix& grads, Matrix& velocity, double lr,
                              double momentum) {
    if (!params.same_shape(grads) || !params.same_shape(velocity))
        throw ShapeError("sgd_momentum_step: params " + Matrix::shape_str(params) + ", grads " +
                         Matrix::shape_str(grads) + ", velocity " + Matrix::shape_str(velocity));
    for (std::size_t i = 0; i < params.size(); ++i) {
        velocity.data()[i] = momentum * velocity.data()[i] - lr * grads.data()[i];
        params.data()[i] += velocity.data()[i];
    }
}

inline void sgd_momentum_step(GaeParams& p, const GaeParams& g, GaeParams& v, double lr,
                              double momentum) {
    sgd_momentum_step(p.u, g.u, v.u, lr, momentum);
    sgd_momentum_step(p.v, g.v, v.v, lr, momentum);
    sgd_momentum_step(p.w, g.w, v.w, lr, momentum);
}

inline void sgd_momentum_step(HgaeParams& p, const HgaeParams& g, HgaeParams& v, double lr,
                              double momentum) {
    sgd_momentum_step(p.layer1, g.layer1, v.layer1, lr, momentum);
    sgd_momentum_step(p.layer2, g.layer2, v.layer2, lr, momentum);
}

// Central finite differences (f(t+h) - f(t-h)) / 2h per coordinate; the
// independent oracle for every analytic gradient in the library.
template <typename Params, typename LossFn>
Params finite_difference_grads(LossFn&& loss_fn, Params params, double h) {
    if (h <= 0.0) throw std::invalid_argument("finite_difference_grads: h must be > 0");
    Params grads = zeros_like(params);
    Matrix* grad_mats[16];
    std::size_t n_mats = 0;
    for_each_matrix(grads, [&](Matrix& m) { grad_mats[n_mats++] = &m; });
    std::size_t mat_idx = 0;
    for_each_matrix(params, [&](Matrix& m) {
        Matrix& gm = *grad_mats[mat_idx++];
        for (std::size_t i = 0; i < m.size(); ++i) {
            const double orig = m.data()[i];
            m.data()[i] = orig + h;
            const double fp = loss_fn(static_cast<const Params&>(params));
            m.data()[i] = orig - h;
            const double fm = loss_fn(static_cast<const Params&>(params));
            m.data()[i] = orig;
            gm.data()[i] = (fp - fm) / (2.0 * h);
        }
    });
    return grads;
}

// All adjacent frame pairs of a time-major sequence batch, column-stacked.
inline std::pair<Matrix, Matrix> adjacent_pairs(const Sequence& frames) {
    if (frames.size() < 2) throw std::invalid_argument("adjacent_pairs: need >= 2 time steps");
    std::vector<Matrix> x1s, x2s;
    for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
        x1s.push_back(frames[t]);
        x2s.push_back(frames[t + 1]);
    }
    return {hconcat(x1s), hconcat(x2s)};
}

// Layer-1 mapping pairs over all adjacent frame triples; the training input
// for the second-layer GAE.
inline std::pair<Matrix, Matrix> mapping_pairs(const GaeParams& l1, const Sequence& frames) {
    if (frames.size() < 3) throw std::invalid_argument("mapping_pairs: need >= 3 time steps");
    std::vector<Matrix> m1s, m2s;
    for (std::size_t t = 0; t + 2 < frames.size(); ++t) {
        m1s.push_back(infer_mappings(l1, frames[t], frames[t + 1]));
        m2s.push_back(infer_mappings(l1, frames[t + 1], frames[t + 2]));
    }
    return {hconcat(m1s), hconcat(m2s)};
}

namespace detail {

template <typename P>
double global_grad_norm(const P& grads) {
    double ss = 0.0;
    for_each_matrix(grads, [&](const Matrix& m) { ss += sum_squares(m); });
    return std::sqrt(ss);
}

template <typename P>
void apply_weight_decay(P& grads, const P& params, double l2) {
    if (l2 == 0.0) return;
    Matrix* gm[16];
    std::size_t n = 0;
    for_each_matrix(grads, [&](Matrix& m) { gm[n++] = &m; });
    std::size_t i = 0;
    for_each_matrix(params, [&](const Matrix& m) { axpy(*gm[i++], l2, m); });
}

template <typename P>
void clip_gradients(P& grads, double clip_norm) {
    if (clip_norm <= 0.0) return;
    const double norm = global_grad_norm(grads);
    if (norm > clip_norm) {
        const double s = clip_norm / norm;
        for_each_matrix(grads, [&](Matrix& m) { scale_in_place(m, s); });
    }
}

inline double elapsed_seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

// Reconstructive pretraining on frame pairs (columns of x1/x2). Returns the
// trained parameters and the per-epoch loss trace.
inline std::pair<GaeParams, TrainReport> pretrain_gae(GaeParams params, const Matrix& x1,
                                                      const Matrix& x2, const TrainConfig& cfg) {
    cfg.validate();
    params.check_consistent();
    if (x1.rows() != params.dim_in() || !x1.same_shape(x2))
        throw ShapeError("pretrain_gae: pair shapes " + Matrix::shape_str(x1) + " vs " +
                         Matrix::shape_str(x2) + ", dim_in " + std::to_string(params.dim_in()));
    const std::size_t n = x1.cols();
    if (n == 0) throw std::invalid_argument("pretrain_gae: empty training set");

    GaeParams velocity = zeros_like(params);
    Rng shuffle_rng = Rng(cfg.seed).split(0x5u);
    TrainReport report;
    const auto t_start = std::chrono::steady_clock::now();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t_epoch = std::chrono::steady_clock::now();
        const auto order = shuffled_indices(shuffle_rng, n);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, n);
            const std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
            auto [loss, grads] = recon_loss_and_grads(params, x1.gather_cols(idx),
                                                      x2.gather_cols(idx));
            if (!std::isfinite(loss))
                throw DivergenceError("pretrain_gae: non-finite loss at epoch " +
                                          std::to_string(epoch),
                                      epoch);
            loss_sum += loss * static_cast<double>(idx.size());
            detail::apply_weight_decay(grads, params, cfg.l2);
            detail::clip_gradients(grads, cfg.clip_norm);
            sgd_momentum_step(params, grads, velocity, cfg.learning_rate, cfg.momentum);
        }
        report.epochs.push_back(
            {epoch, 0, loss_sum / static_cast<double>(n), detail::elapsed_seconds(t_epoch)});
    }
    report.wall_seconds = detail::elapsed_seconds(t_start);
    return {std::move(params), std::move(report)};
}

// Second-layer pretraining: layer 1 stays frozen; its mappings over adjacent
// frame triples become the reconstruction pairs for layer 2.
inline std::pair<GaeParams, TrainReport> pretrain_hgae_layer2(const GaeParams& layer1,
                                                              GaeParams layer2,
                                                              const Sequence& frames,
                                                              const TrainConfig& cfg) {
    if (layer2.dim_in() != layer1.num_mappings())
        throw ShapeError("pretrain_hgae_layer2: layer2 dim_in " +
                         std::to_string(layer2.dim_in()) + " != layer1 num_mappings " +
                         std::to_string(layer1.num_mappings()));
    const auto [m1, m2] = mapping_pairs(layer1, frames);
    return pretrain_gae(std::move(layer2), m1, m2, cfg);
}

// k-step prediction loss sum_i |xhat_{t+i} - x_{t+i}|^2, mean over batch
// columns. frames is time-major; the first seed frames are ground truth and
// every later window mixes in predictions.
inline double predictive_loss(const GaeParams& p, const Sequence& frames, std::size_t k) {
    if (frames.size() < kGaeSeedFrames + k)
        throw std::invalid_argument("predictive_loss(GAE): need " +
                                    std::to_string(kGaeSeedFrames + k) + " frames, got " +
                                    std::to_string(frames.size()));
    const double scale = 1.0 / static_cast<double>(frames[0].cols());
    Matrix prev = frames[0], curr = frames[1];
    double loss = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        Matrix xhat = predict_step(p, prev, curr);
        loss += scale * sum_squares(sub(xhat, frames[2 + i]));
        prev = std::move(curr);
        curr = std::move(xhat);
    }
    return loss;
}

inline double predictive_loss(const HgaeParams& p, const Sequence& frames, std::size_t k) {
    if (frames.size() < kHgaeSeedFrames + k)
        throw std::invalid_argument("predictive_loss(HGAE): need " +
                                    std::to_string(kHgaeSeedFrames + k) + " frames, got " +
                                    std::to_string(frames.size()));
    const double scale = 1.0 / static_cast<double>(frames[0].cols());
    Matrix x0 = frames[0], x1 = frames[1], x2 = frames[2];
    double loss = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const HgaeHierarchy h = infer_hierarchy(p, x0, x1, x2);
        Matrix xhat = predict_frame(p, x2, predict_mapping(p, h.m1_b, h.m2));
        loss += scale * sum_squares(sub(xhat, frames[3 + i]));
        x0 = std::move(x1);
        x1 = std::move(x2);
        x2 = std::move(xhat);
    }
    return loss;
}

// Loss plus exact gradients through the unrolled k-step graph. Gradients of
// predicted frames flow into every later inference and prediction that
// consumed them.
inline std::pair<double, GaeParams> predictive_loss_and_grads(const GaeParams& p,
                                                              const Sequence& frames,
                                                              std::size_t k) {
    if (frames.size() < kGaeSeedFrames + k)
        throw std::invalid_argument("predictive_loss_and_grads(GAE): sequence too short");
    const std::size_t batch = frames[0].cols();
    const double scale = 1.0 / static_cast<double>(batch);

    std::vector<GaeStepCache> caches;
    caches.reserve(k);
    std::vector<Matrix> dpred(k);
    double loss = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const Matrix& a = i >= 2 ? caches[i - 2].xhat : frames[i];
        const Matrix& b = i >= 1 ? caches[i - 1].xhat : frames[1];
        caches.push_back(gae_step_forward(p, a, b));
        const Matrix r = sub(caches.back().xhat, frames[2 + i]);
        loss += scale * sum_squares(r);
        dpred[i] = scaled(r, 2.0 * scale);
    }

    GaeParams grads = zeros_like(p);
    const std::size_t dim = p.dim_in();
    for (std::size_t ii = k; ii-- > 0;) {
        Matrix da(dim, batch), db(dim, batch);
        gae_step_backward(p, caches[ii], dpred[ii], grads, da, db);
        if (ii >= 2) axpy(dpred[ii - 2], 1.0, da);
        if (ii >= 1) axpy(dpred[ii - 1], 1.0, db);
    }
    return {loss, std::move(grads)};
}

inline std::pair<double, HgaeParams> predictive_loss_and_grads(const HgaeParams& p,
                                                               const Sequence& frames,
                                                               std::size_t k) {
    if (frames.size() < kHgaeSeedFrames + k)
        throw std::invalid_argument("predictive_loss_and_grads(HGAE): sequence too short");
    const std::size_t batch = frames[0].cols();
    const double scale = 1.0 / static_cast<double>(batch);

    std::vector<HgaeStepCache> caches;
    caches.reserve(k);
    std::vector<Matrix> dpred(k);
    double loss = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        const Matrix& w0 = i >= 3 ? caches[i - 3].xhat : frames[i];
        const Matrix& w1 = i >= 2 ? caches[i - 2].xhat : frames[i + 1];
        const Matrix& w2 = i >= 1 ? caches[i - 1].xhat : frames[2];
        caches.push_back(hgae_step_forward(p, w0, w1, w2));
        const Matrix r = sub(caches.back().xhat, frames[3 + i]);
        loss += scale * sum_squares(r);
        dpred[i] = scaled(r, 2.0 * scale);
    }

    HgaeParams grads = zeros_like(p);
    const std::size_t dim = p.layer1.dim_in();
    for (std::size_t ii = k; ii-- > 0;) {
        Matrix d0(dim, batch), d1(dim, batch), d2(dim, batch);
        hgae_step_backward(p, caches[ii], dpred[ii], grads, d0, d1, d2);
        if (ii >= 3) axpy(dpred[ii - 3], 1.0, d0);
        if (ii >= 2) axpy(dpred[ii - 2], 1.0, d1);
        if (ii >= 1) axpy(dpred[ii - 1], 1.0, d2);
    }
    return {loss, std::move(grads)};
}

namespace detail {

template <typename P>
std::size_t seed_frames_of(const P&);
template <>
inline std::size_t seed_frames_of(const GaeParams&) {
    return kGaeSeedFrames;
}
template <>
inline std::size_t seed_frames_of(const HgaeParams&) {
    return kHgaeSeedFrames;
}

} // namespace detail

// Predictive training with backprop through time. Works for both the GAE
// (2 seed frames) and the HGAE (3); the horizon follows cfg.horizon_schedule.
template <typename P>
std::pair<P, TrainReport> predictive_finetune(P params, const Sequence& frames,
                                              const TrainConfig& cfg) {
    cfg.validate();
    params.check_consistent();
    const std::size_t seed_frames = detail::seed_frames_of(params);
    if (frames.size() < seed_frames + cfg.max_horizon())
        throw std::invalid_argument("predictive_finetune: sequences have " +
                                    std::to_string(frames.size()) + " frames, need >= " +
                                    std::to_string(seed_frames + cfg.max_horizon()));
    const std::size_t n = frames[0].cols();
    if (n == 0) throw std::invalid_argument("predictive_finetune: empty training set");

    P velocity = zeros_like(params);
    Rng shuffle_rng = Rng(cfg.seed).split(0x6u);
    TrainReport report;
    const auto t_start = std::chrono::steady_clock::now();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const auto t_epoch = std::chrono::steady_clock::now();
        const std::size_t k = cfg.horizon_at(epoch);
        const auto order = shuffled_indices(shuffle_rng, n);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t stop = std::min(start + cfg.batch_size, n);
            const std::vector<std::size_t> idx(order.begin() + start, order.begin() + stop);
            Sequence batch;
            batch.reserve(seed_frames + k);
            for (std::size_t t = 0; t < seed_frames + k; ++t)
                batch.push_back(frames[t].gather_cols(idx));
            auto [loss, grads] = predictive_loss_and_grads(params, batch, k);
            if (!std::isfinite(loss))
                throw DivergenceError("predictive_finetune: non-finite loss at epoch " +
                                          std::to_string(epoch),
                                      epoch);
            loss_sum += loss * static_cast<double>(idx.size());
            detail::apply_weight_decay(grads, params, cfg.l2);
            detail::clip_gradients(grads, cfg.clip_norm);
            sgd_momentum_step(params, grads, velocity, cfg.learning_rate, cfg.momentum);
        }
        report.epochs.push_back(
            {epoch, k, loss_sum / static_cast<double>(n), detail::elapsed_seconds(t_epoch)});
    }
    report.wall_seconds = detail::elapsed_seconds(t_start);
    return {std::move(params), std::move(report)};
}

} // namespace relseq
