#pragma once

// Gated autoencoder: a bilinear two-input autoencoder with factored
// three-way weights. Mapping units m encode the transformation between the
// two inputs:
//
//   m      = sigmoid(W ((U x1) . (V x2)))      (. is elementwise product)
//   x2_hat = V^T ((U x1) . (W^T m))
//   x1_hat = U^T ((V x2) . (W^T m))
//
// Frames are columns; every operation accepts a batch as column-stacked
// inputs and treats batch columns independently. Losses and gradients are
// means over the batch, so learning rates are batch-size-invariant.

#include <cstddef>
#include <string>
#include <utility>

#include "relseq/matrix.hpp"
#include "relseq/rng.hpp"

namespace relseq {

struct GaeParams {
    Matrix u;  // num_factors x dim_in
    Matrix v;  // num_factors x dim_in
    Matrix w;  // num_mappings x num_factors

    std::size_t dim_in() const noexcept { return u.cols(); }
    std::size_t num_factors() const noexcept { return u.rows(); }
    std::size_t num_mappings() const noexcept { return w.rows(); }

    void check_consistent() const {
        if (v.rows() != u.rows() || v.cols() != u.cols())
            throw ShapeError("GaeParams: U is " + Matrix::shape_str(u) + " but V is " +
                             Matrix::shape_str(v));
        if (w.cols() != u.rows())
            throw ShapeError("GaeParams: W is " + Matrix::shape_str(w) + ", expected cols == " +
                             std::to_string(u.rows()));
    }
};

// U, V, W ~ N(0, init_std^2); small values keep the mapping sigmoid unsaturated.
inline GaeParams init_gae(Rng& rng, std::size_t dim_in, std::size_t num_factors,
                          std::size_t num_mappings, double init_std = 0.01) {
    GaeParams p;
    p.u = sample_gaussian(rng, num_factors, dim_in, init_std);
    p.v = sample_gaussian(rng, num_factors, dim_in, init_std);
    p.w = sample_gaussian(rng, num_mappings, num_factors, init_std);
    return p;
}

inline GaeParams zeros_like(const GaeParams& p) {
    GaeParams z;
    z.u = Matrix(p.u.rows(), p.u.cols());
    z.v = Matrix(p.v.rows(), p.v.cols());
    z.w = Matrix(p.w.rows(), p.w.cols());
    return z;
}

// Apply fn to each parameter matrix; used by optimizers and gradient checks.
template <typename Fn>
void for_each_matrix(GaeParams& p, Fn&& fn) {
    fn(p.u);
    fn(p.v);
    fn(p.w);
}
template <typename Fn>
void for_each_matrix(const GaeParams& p, Fn&& fn) {
    fn(p.u);
    fn(p.v);
    fn(p.w);
}

namespace detail {

inline void check_frame(const GaeParams& p, const Matrix& x, const char* name) {
    if (x.rows() != p.dim_in())
        throw ShapeError(std::string("GAE: ") + name + " has " + std::to_string(x.rows()) +
                         " rows, expected dim_in " + std::to_string(p.dim_in()));
}

inline void check_mapping(const GaeParams& p, const Matrix& m, const char* name) {
    if (m.rows() != p.num_mappings())
        throw ShapeError(std::string("GAE: ") + name + " has " + std::to_string(m.rows()) +
                         " rows, expected num_mappings " + std::to_string(p.num_mappings()));
}

} // namespace detail

// Mapping inference with the intermediate factor products kept for gradient
// reuse: fu = U x1, fv = V x2, h = fu . fv (the pre-pooling products),
// pre = W h (pre-sigmoid), m = sigmoid(pre).
struct GaeForward {
    Matrix fu;
    Matrix fv;
    Matrix h;
    Matrix pre;
    Matrix m;
};

inline GaeForward infer_mappings_full(const GaeParams& p, const Matrix& x1, const Matrix& x2) {
    detail::check_frame(p, x1, "x1");
    detail::check_frame(p, x2, "x2");
    if (x1.cols() != x2.cols())
        throw ShapeError("GAE: batch size mismatch, x1 " + Matrix::shape_str(x1) + " vs x2 " +
                         Matrix::shape_str(x2));
    GaeForward f;
    f.fu = matmul(p.u, x1);
    f.fv = matmul(p.v, x2);
    f.h = hadamard(f.fu, f.fv);
    f.pre = matmul(p.w, f.h);
    f.m = sigmoid(f.pre);
    return f;
}

inline Matrix infer_mappings(const GaeParams& p, const Matrix& x1, const Matrix& x2) {
    return infer_mappings_full(p, x1, x2).m;
}

// x2_hat = V^T ((U x1) . (W^T m))
inline Matrix reconstruct_x2(const GaeParams& p, const Matrix& x1, const Matrix& m) {
    detail::check_frame(p, x1, "x1");
    detail::check_mapping(p, m, "m");
    const Matrix gated = hadamard(matmul(p.u, x1), matmul(p.w, m, true, false));
    return matmul(p.v, gated, true, false);
}

// x1_hat = U^T ((V x2) . (W^T m)); the model is symmetric in the two inputs.
inline Matrix reconstruct_x1(const GaeParams& p, const Matrix& x2, const Matrix& m) {
    detail::check_frame(p, x2, "x2");
    detail::check_mapping(p, m, "m");
    const Matrix gated = hadamard(matmul(p.v, x2), matmul(p.w, m, true, false));
    return matmul(p.u, gated, true, false);
}

// One-step prediction: transform the newest frame by the mapping inferred
// from the preceding pair. Composition of infer_mappings and reconstruct_x2.
inline Matrix predict_step(const GaeParams& p, const Matrix& x_prev, const Matrix& x_curr) {
    return reconstruct_x2(p, x_curr, infer_mappings(p, x_prev, x_curr));
}

// Symmetric reconstruction loss |x1 - x1_hat|^2 + |x2 - x2_hat|^2 (mean over
// batch columns) with exact analytic gradients. The mapping is a function of
// both inputs, so the chain rule runs through m into every term.
inline std::pair<double, GaeParams> recon_loss_and_grads(const GaeParams& p, const Matrix& x1,
                                                         const Matrix& x2) {
    const GaeForward f = infer_mappings_full(p, x1, x2);
    const std::size_t batch = x1.cols();
    const double scale = 1.0 / static_cast<double>(batch);

    const Matrix g = matmul(p.w, f.m, true, false);  // W^T m
    const Matrix p1 = hadamard(f.fv, g);
    const Matrix p2 = hadamard(f.fu, g);
    const Matrix x1_hat = matmul(p.u, p1, true, false);
    const Matrix x2_hat = matmul(p.v, p2, true, false);

    const Matrix r1 = sub(x1_hat, x1);
    const Matrix r2 = sub(x2_hat, x2);
    const double loss = scale * (sum_squares(r1) + sum_squares(r2));

    const Matrix e1 = scaled(r1, 2.0 * scale);
    const Matrix e2 = scaled(r2, 2.0 * scale);

    GaeParams grads = zeros_like(p);
    // Output layers.
    grads.u = matmul(p1, e1, false, true);
    grads.v = matmul(p2, e2, false, true);
    const Matrix dp1 = matmul(p.u, e1);
    const Matrix dp2 = matmul(p.v, e2);

    // Through the gating products.
    Matrix dfu = hadamard(dp2, g);
    Matrix dfv = hadamard(dp1, g);
    const Matrix dg = add(hadamard(dp1, f.fv), hadamard(dp2, f.fu));

    // Through W^T m and the sigmoid.
    grads.w = matmul(f.m, dg, false, true);
    const Matrix dm = matmul(p.w, dg);
    const Matrix dpre = sigmoid_backprop(dm, f.m);
    axpy(grads.w, 1.0, matmul(dpre, f.h, false, true));
    const Matrix dh = matmul(p.w, dpre, true, false);
    axpy(dfu, 1.0, hadamard(dh, f.fv));
    axpy(dfv, 1.0, hadamard(dh, f.fu));

    // Into the filter matrices.
    axpy(grads.u, 1.0, matmul(dfu, x1, false, true));
    axpy(grads.v, 1.0, matmul(dfv, x2, false, true));
    return {loss, std::move(grads)};
}

// Forward record of one prediction x_hat = V^T ((U b) . (W^T m)) with
// m = sigmoid(W ((U a) . (V b))), kept for backprop through time.
struct GaeStepCache {
    Matrix a;   // previous frame
    Matrix b;   // current frame
    Matrix fu_prev;
    Matrix fv_curr;
    Matrix h;
    Matrix m;
    Matrix g;   // W^T m
    Matrix fu_curr;
    Matrix gated;
    Matrix xhat;
};

inline GaeStepCache gae_step_forward(const GaeParams& p, Matrix a, Matrix b) {
    detail::check_frame(p, a, "x_prev");
    detail::check_frame(p, b, "x_curr");
    GaeStepCache c;
    c.fu_prev = matmul(p.u, a);
    c.fv_curr = matmul(p.v, b);
    c.h = hadamard(c.fu_prev, c.fv_curr);
    c.m = sigmoid(matmul(p.w, c.h));
    c.g = matmul(p.w, c.m, true, false);
    c.fu_curr = matmul(p.u, b);
    c.gated = hadamard(c.fu_curr, c.g);
    c.xhat = matmul(p.v, c.gated, true, false);
    c.a = std::move(a);
    c.b = std::move(b);
    return c;
}

// Accumulates parameter gradients and the gradients w.r.t. both input frames
// given d_xhat = dL/d(xhat). Input gradients feed earlier rollout steps.
inline void gae_step_backward(const GaeParams& p, const GaeStepCache& c, const Matrix& d_xhat,
                              GaeParams& grads, Matrix& da, Matrix& db) {
    axpy(grads.v, 1.0, matmul(c.gated, d_xhat, false, true));
    const Matrix dgated = matmul(p.v, d_xhat);

    const Matrix dfu_curr = hadamard(dgated, c.g);
    axpy(grads.u, 1.0, matmul(dfu_curr, c.b, false, true));
    axpy(db, 1.0, matmul(p.u, dfu_curr, true, false));

    const Matrix dg = hadamard(dgated, c.fu_curr);
    axpy(grads.w, 1.0, matmul(c.m, dg, false, true));
    const Matrix dm = matmul(p.w, dg);

    const Matrix dpre = sigmoid_backprop(dm, c.m);
    axpy(grads.w, 1.0, matmul(dpre, c.h, false, true));
    const Matrix dh = matmul(p.w, dpre, true, false);

    const Matrix dfu_prev = hadamard(dh, c.fv_curr);
    axpy(grads.u, 1.0, matmul(dfu_prev, c.a, false, true));
    axpy(da, 1.0, matmul(p.u, dfu_prev, true, false));

    const Matrix dfv_curr = hadamard(dh, c.fu_prev);
    axpy(grads.v, 1.0, matmul(dfv_curr, c.b, false, true));
    axpy(db, 1.0, matmul(p.v, dfv_curr, true, false));
}

} // namespace relseq
