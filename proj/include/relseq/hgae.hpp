#pragma once

// Higher-order gated autoencoder: two stacked GAE modules. Layer 1 relates
// adjacent frames; layer 2 relates the pair of layer-1 mappings inferred on
// overlapping frame pairs, modeling how the transformation itself changes.
//
// Inference over a frame triple (x0, x1, x2):
//   m1a = sigmoid(W1 ((U1 x0) . (V1 x1)))
//   m1b = sigmoid(W1 ((U1 x1) . (V1 x2)))
//   m2  = sigmoid(W2 ((U2 m1a) . (V2 m1b)))
//
// Prediction runs top-down in two steps: the next first-order mapping is
// predicted from m2 (linear output, no squashing), then used to transform
// the newest frame:
//   m1c_hat = V2^T ((U2 m1b) . (W2^T m2))
//   x_hat   = V1^T ((U1 x2) . (W1^T m1c_hat))
//
// Multi-step rollout appends each prediction to the window and re-infers;
// no teacher forcing, so predictions feed later inference.

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "relseq/gae.hpp"
#include "relseq/matrix.hpp"

namespace relseq {

// Frames ordered in time; each element is dim x batch.
using Sequence = std::vector<Matrix>;

struct HgaeParams {
    GaeParams layer1;  // over frames
    GaeParams layer2;  // over layer-1 mappings

    void check_consistent() const {
        layer1.check_consistent();
        layer2.check_consistent();
        if (layer2.dim_in() != layer1.num_mappings())
            throw ShapeError("HgaeParams: layer2 dim_in " + std::to_string(layer2.dim_in()) +
                             " != layer1 num_mappings " +
                             std::to_string(layer1.num_mappings()));
    }
};

inline HgaeParams init_hgae(Rng& rng, std::size_t dim_in, std::size_t factors1,
                            std::size_t mappings1, std::size_t factors2,
                            std::size_t mappings2, double init_std = 0.01) {
    HgaeParams p;
    p.layer1 = init_gae(rng, dim_in, factors1, mappings1, init_std);
    p.layer2 = init_gae(rng, mappings1, factors2, mappings2, init_std);
    return p;
}

inline HgaeParams zeros_like(const HgaeParams& p) {
    return HgaeParams{zeros_like(p.layer1), zeros_like(p.layer2)};
}

template <typename Fn>
void for_each_matrix(HgaeParams& p, Fn&& fn) {
    for_each_matrix(p.layer1, fn);
    for_each_matrix(p.layer2, fn);
}
template <typename Fn>
void for_each_matrix(const HgaeParams& p, Fn&& fn) {
    for_each_matrix(p.layer1, fn);
    for_each_matrix(p.layer2, fn);
}

struct HgaeHierarchy {
    Matrix m1_a;  // mapping over (x0, x1)
    Matrix m1_b;  // mapping over (x1, x2)
    Matrix m2;    // mapping over (m1_a, m1_b)
};

inline HgaeHierarchy infer_hierarchy(const HgaeParams& p, const Matrix& x0, const Matrix& x1,
                                     const Matrix& x2) {
    HgaeHierarchy h;
    h.m1_a = infer_mappings(p.layer1, x0, x1);
    h.m1_b = infer_mappings(p.layer1, x1, x2);
    h.m2 = infer_mappings(p.layer2, h.m1_a, h.m1_b);
    return h;
}

// Predicted next first-order mapping. Linear output: entries may leave (0,1).
inline Matrix predict_mapping(const HgaeParams& p, const Matrix& m1_prev, const Matrix& m2) {
    detail::check_frame(p.layer2, m1_prev, "m1_prev");
    detail::check_mapping(p.layer2, m2, "m2");
    const Matrix gated = hadamard(matmul(p.layer2.u, m1_prev), matmul(p.layer2.w, m2, true, false));
    return matmul(p.layer2.v, gated, true, false);
}

// Transform the newest frame by a (predicted) first-order mapping.
inline Matrix predict_frame(const HgaeParams& p, const Matrix& x_curr, const Matrix& m1_pred) {
    detail::check_frame(p.layer1, x_curr, "x_curr");
    detail::check_mapping(p.layer1, m1_pred, "m1_pred");
    const Matrix gated = hadamard(matmul(p.layer1.u, x_curr), matmul(p.layer1.w, m1_pred, true, false));
    return matmul(p.layer1.v, gated, true, false);
}

// Forward record of one HGAE prediction from the window (x0, x1, x2),
// kept for backprop through time.
struct HgaeStepCache {
    Matrix x0, x1, x2;
    // layer-1 inference on both pairs
    Matrix fu1a, fv1a, h1a, m1a;
    Matrix fu1b, fv1b, h1b, m1b;
    // layer-2 inference
    Matrix fu2a, fv2b, h2, m2;
    // top-down mapping prediction
    Matrix fu2b, g2, r2, m1c;
    // frame prediction
    Matrix fu1c, gm, q, xhat;
};

inline HgaeStepCache hgae_step_forward(const HgaeParams& p, Matrix x0, Matrix x1, Matrix x2) {
    detail::check_frame(p.layer1, x0, "x0");
    detail::check_frame(p.layer1, x1, "x1");
    detail::check_frame(p.layer1, x2, "x2");
    HgaeStepCache c;
    const GaeParams& l1 = p.layer1;
    const GaeParams& l2 = p.layer2;

    c.fu1a = matmul(l1.u, x0);
    c.fv1a = matmul(l1.v, x1);
    c.h1a = hadamard(c.fu1a, c.fv1a);
    c.m1a = sigmoid(matmul(l1.w, c.h1a));

    c.fu1b = matmul(l1.u, x1);
    c.fv1b = matmul(l1.v, x2);
    c.h1b = hadamard(c.fu1b, c.fv1b);
    c.m1b = sigmoid(matmul(l1.w, c.h1b));

    c.fu2a = matmul(l2.u, c.m1a);
    c.fv2b = matmul(l2.v, c.m1b);
    c.h2 = hadamard(c.fu2a, c.fv2b);
    c.m2 = sigmoid(matmul(l2.w, c.h2));

    c.fu2b = matmul(l2.u, c.m1b);
    c.g2 = matmul(l2.w, c.m2, true, false);
    c.r2 = hadamard(c.fu2b, c.g2);
    c.m1c = matmul(l2.v, c.r2, true, false);

    c.fu1c = matmul(l1.u, x2);
    c.gm = matmul(l1.w, c.m1c, true, false);
    c.q = hadamard(c.fu1c, c.gm);
    c.xhat = matmul(l1.v, c.q, true, false);

    c.x0 = std::move(x0);
    c.x1 = std::move(x1);
    c.x2 = std::move(x2);
    return c;
}

// Accumulates parameter gradients and gradients w.r.t. the three window
// frames given d_xhat = dL/d(xhat).
inline void hgae_step_backward(const HgaeParams& p, const HgaeStepCache& c, const Matrix& d_xhat,
                               HgaeParams& grads, Matrix& dx0, Matrix& dx1, Matrix& dx2) {
    const GaeParams& l1 = p.layer1;
    const GaeParams& l2 = p.layer2;
    GaeParams& g1 = grads.layer1;
    GaeParams& g2 = grads.layer2;

    // Frame prediction.
    axpy(g1.v, 1.0, matmul(c.q, d_xhat, false, true));
    const Matrix dq = matmul(l1.v, d_xhat);
    const Matrix dfu1c = hadamard(dq, c.gm);
    axpy(g1.u, 1.0, matmul(dfu1c, c.x2, false, true));
    axpy(dx2, 1.0, matmul(l1.u, dfu1c, true, false));
    const Matrix dgm = hadamard(dq, c.fu1c);
    axpy(g1.w, 1.0, matmul(c.m1c, dgm, false, true));
    const Matrix dm1c = matmul(l1.w, dgm);

    // Mapping prediction (linear output).
    axpy(g2.v, 1.0, matmul(c.r2, dm1c, false, true));
    const Matrix dr2 = matmul(l2.v, dm1c);
    const Matrix dfu2b = hadamard(dr2, c.g2);
    axpy(g2.u, 1.0, matmul(dfu2b, c.m1b, false, true));
    Matrix dm1b = matmul(l2.u, dfu2b, true, false);
    const Matrix dg2 = hadamard(dr2, c.fu2b);
    axpy(g2.w, 1.0, matmul(c.m2, dg2, false, true));
    const Matrix dm2 = matmul(l2.w, dg2);

    // Layer-2 inference.
    const Matrix dpre2 = sigmoid_backprop(dm2, c.m2);
    axpy(g2.w, 1.0, matmul(dpre2, c.h2, false, true));
    const Matrix dh2 = matmul(l2.w, dpre2, true, false);
    const Matrix dfu2a = hadamard(dh2, c.fv2b);
    axpy(g2.u, 1.0, matmul(dfu2a, c.m1a, false, true));
    Matrix dm1a = matmul(l2.u, dfu2a, true, false);
    const Matrix dfv2b = hadamard(dh2, c.fu2a);
    axpy(g2.v, 1.0, matmul(dfv2b, c.m1b, false, true));
    axpy(dm1b, 1.0, matmul(l2.v, dfv2b, true, false));

    // Layer-1 inference on (x1, x2).
    const Matrix dpre1b = sigmoid_backprop(dm1b, c.m1b);
    axpy(g1.w, 1.0, matmul(dpre1b, c.h1b, false, true));
    const Matrix dh1b = matmul(l1.w, dpre1b, true, false);
    const Matrix dfu1b = hadamard(dh1b, c.fv1b);
    axpy(g1.u, 1.0, matmul(dfu1b, c.x1, false, true));
    axpy(dx1, 1.0, matmul(l1.u, dfu1b, true, false));
    const Matrix dfv1b = hadamard(dh1b, c.fu1b);
    axpy(g1.v, 1.0, matmul(dfv1b, c.x2, false, true));
    axpy(dx2, 1.0, matmul(l1.v, dfv1b, true, false));

    // Layer-1 inference on (x0, x1).
    const Matrix dpre1a = sigmoid_backprop(dm1a, c.m1a);
    axpy(g1.w, 1.0, matmul(dpre1a, c.h1a, false, true));
    const Matrix dh1a = matmul(l1.w, dpre1a, true, false);
    const Matrix dfu1a = hadamard(dh1a, c.fv1a);
    axpy(g1.u, 1.0, matmul(dfu1a, c.x0, false, true));
    axpy(dx0, 1.0, matmul(l1.u, dfu1a, true, false));
    const Matrix dfv1a = hadamard(dh1a, c.fu1a);
    axpy(g1.v, 1.0, matmul(dfv1a, c.x1, false, true));
    axpy(dx1, 1.0, matmul(l1.v, dfv1a, true, false));
}

// Prediction horizon and the number of ground-truth frames a rollout starts
// from: 2 for the GAE, 3 for the HGAE.
struct RolloutConfig {
    std::size_t k = 1;
    std::size_t seed_frames = 2;

    void validate() const {
        if (k < 1) throw std::invalid_argument("RolloutConfig: k must be >= 1");
        if (seed_frames != 2 && seed_frames != 3)
            throw std::invalid_argument("RolloutConfig: seed_frames must be 2 or 3");
    }
};

inline constexpr std::size_t kGaeSeedFrames = 2;
inline constexpr std::size_t kHgaeSeedFrames = 3;

// Predictions whose magnitude passes this are treated as diverged.
inline constexpr double kDivergenceLimit = 1e6;

namespace detail {

inline void check_divergence(const Matrix& xhat, std::size_t step) {
    if (!xhat.all_finite() || xhat.max_abs() > kDivergenceLimit)
        throw DivergenceError("rollout diverged at step " + std::to_string(step), step);
}

} // namespace detail

// Free-running prediction: returns `steps` frames. Mappings are re-inferred
// each step on the window ending in the newest (possibly predicted) frame.
inline Sequence rollout(const GaeParams& p, const Sequence& seeds, std::size_t steps) {
    if (seeds.size() != kGaeSeedFrames)
        throw std::invalid_argument("rollout(GAE): need exactly 2 seed frames, got " +
                                    std::to_string(seeds.size()));
    Sequence out;
    out.reserve(steps);
    Matrix prev = seeds[0];
    Matrix curr = seeds[1];
    for (std::size_t s = 0; s < steps; ++s) {
        Matrix xhat = predict_step(p, prev, curr);
        detail::check_divergence(xhat, s);
        prev = std::move(curr);
        curr = xhat;
        out.push_back(curr);
    }
    return out;
}

inline Sequence rollout(const HgaeParams& p, const Sequence& seeds, std::size_t steps) {
    if (seeds.size() != kHgaeSeedFrames)
        throw std::invalid_argument("rollout(HGAE): need exactly 3 seed frames, got " +
                                    std::to_string(seeds.size()));
    Sequence out;
    out.reserve(steps);
    Matrix x0 = seeds[0], x1 = seeds[1], x2 = seeds[2];
    for (std::size_t s = 0; s < steps; ++s) {
        const HgaeHierarchy h = infer_hierarchy(p, x0, x1, x2);
        Matrix xhat = predict_frame(p, x2, predict_mapping(p, h.m1_b, h.m2));
        detail::check_divergence(xhat, s);
        x0 = std::move(x1);
        x1 = std::move(x2);
        x2 = std::move(xhat);
        out.push_back(x2);
    }
    return out;
}

} // namespace relseq
