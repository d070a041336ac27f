#pragma once

// PCA whitening for dimensionality reduction, plus the inverse projection
// used to bring predictions back to pixel space. The eigendecomposition of
// the sample covariance runs through Eigen's symmetric solver; component
// signs are fixed by convention (largest-magnitude entry of each eigenvector
// made positive) so fits are bit-reproducible.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "relseq/matrix.hpp"

namespace relseq {

struct WhiteningTransform {
    Matrix mean;         // d_pixels x 1
    Matrix forward;      // d_kept x d_pixels, rows scaled by 1/sqrt(lambda+eps)
    Matrix inverse;      // d_pixels x d_kept
    Matrix eigenvalues;  // d_pixels x 1, descending
    double retained_fraction = 1.0;
    double eps = 1e-8;

    std::size_t d_pixels() const noexcept { return mean.rows(); }
    std::size_t d_kept() const noexcept { return forward.rows(); }
};

// Fits on column-stacked samples (d x n). Keeps the smallest leading k
// whose cumulative eigenvalue fraction reaches target_fraction.
inline WhiteningTransform fit_whitening(const Matrix& samples, double target_fraction = 0.95,
                                        double eps = 1e-8) {
    const std::size_t d = samples.rows();
    const std::size_t n = samples.cols();
    if (n < 2) throw std::invalid_argument("fit_whitening: need >= 2 samples");
    if (target_fraction <= 0.0 || target_fraction > 1.0)
        throw std::invalid_argument("fit_whitening: target_fraction must be in (0,1]");

    auto x = detail::as_eigen(samples);
    const Eigen::VectorXd mu = x.rowwise().mean();
    const Eigen::MatrixXd centered = x.colwise() - mu;
    const Eigen::MatrixXd cov =
        centered * centered.transpose() / static_cast<double>(n - 1);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("fit_whitening: eigendecomposition failed");

    // Eigen returns ascending order; flip to descending and clamp the tiny
    // negative values numerical error can leave in the null space.
    Eigen::VectorXd lambda(d);
    Eigen::MatrixXd basis(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        lambda(static_cast<Eigen::Index>(i)) =
            std::max(0.0, solver.eigenvalues()(static_cast<Eigen::Index>(d - 1 - i)));
        basis.col(static_cast<Eigen::Index>(i)) =
            solver.eigenvectors().col(static_cast<Eigen::Index>(d - 1 - i));
    }

    const double total = lambda.sum();
    if (total <= 0.0)
        throw std::invalid_argument("fit_whitening: degenerate data (all samples identical)");

    // Sign convention: largest-magnitude entry of each eigenvector positive.
    for (Eigen::Index c = 0; c < basis.cols(); ++c) {
        Eigen::Index arg = 0;
        basis.col(c).cwiseAbs().maxCoeff(&arg);
        if (basis(arg, c) < 0.0) basis.col(c) = -basis.col(c);
    }

    std::size_t kept = d;
    double cum = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
        cum += lambda(static_cast<Eigen::Index>(i));
        if (cum / total >= target_fraction) {
            kept = i + 1;
            break;
        }
    }

    WhiteningTransform t;
    t.eps = eps;
    t.mean = Matrix(d, 1);
    for (std::size_t i = 0; i < d; ++i) t.mean(i, 0) = mu(static_cast<Eigen::Index>(i));
    t.eigenvalues = Matrix(d, 1);
    for (std::size_t i = 0; i < d; ++i)
        t.eigenvalues(i, 0) = lambda(static_cast<Eigen::Index>(i));

    t.forward = Matrix(kept, d);
    t.inverse = Matrix(d, kept);
    double kept_sum = 0.0;
    for (std::size_t i = 0; i < kept; ++i) {
        const double lam = lambda(static_cast<Eigen::Index>(i));
        kept_sum += lam;
        const double s = std::sqrt(lam + eps);
        for (std::size_t r = 0; r < d; ++r) {
            t.forward(i, r) = basis(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) / s;
            t.inverse(r, i) = basis(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) * s;
        }
    }
    t.retained_fraction = kept_sum / total;
    return t;
}

// forward * (x - mean); accepts column batches.
inline Matrix whiten_apply(const WhiteningTransform& t, const Matrix& x) {
    if (x.rows() != t.d_pixels())
        throw ShapeError("whiten_apply: x has " + std::to_string(x.rows()) +
                         " rows, expected " + std::to_string(t.d_pixels()));
    Matrix centered(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c) centered(r, c) = x(r, c) - t.mean(r, 0);
    return matmul(t.forward, centered);
}

// inverse * z + mean
inline Matrix whiten_invert(const WhiteningTransform& t, const Matrix& z) {
    if (z.rows() != t.d_kept())
        throw ShapeError("whiten_invert: z has " + std::to_string(z.rows()) +
                         " rows, expected " + std::to_string(t.d_kept()));
    Matrix out = matmul(t.inverse, z);
    for (std::size_t r = 0; r < out.rows(); ++r)
        for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += t.mean(r, 0);
    return out;
}

} // namespace relseq
