#pragma once

// Dense row-major double matrix plus the handful of kernels everything else
// is built from: matmul (with transpose flags), elementwise ops, sigmoid.
// Frames and mapping vectors are stored as columns, so a batch of B frames of
// dimension D is a D x B matrix. No implicit broadcasting anywhere: shape
// mismatches throw ShapeError.

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "relseq/errors.hpp"

namespace relseq {

class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw ShapeError("Matrix: data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows_) + "x" +
                             std::to_string(cols_));
    }

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        Matrix m(r, c);
        std::size_t i = 0;
        for (const auto& row : rows) {
            if (row.size() != c) throw ShapeError("Matrix::from_rows: ragged rows");
            std::size_t j = 0;
            for (double v : row) m(i, j++) = v;
            ++i;
        }
        return m;
    }

    // Single column vector from a flat list.
    static Matrix column(const std::vector<double>& v) {
        Matrix m(v.size(), 1);
        std::copy(v.begin(), v.end(), m.data_.begin());
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t r, std::size_t c) {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }
    double operator()(std::size_t r, std::size_t c) const {
        assert(r < rows_ && c < cols_);
        return data_[r * cols_ + c];
    }

    double* data() noexcept { return data_.data(); }
    const double* data() const noexcept { return data_.data(); }

    bool same_shape(const Matrix& o) const noexcept {
        return rows_ == o.rows_ && cols_ == o.cols_;
    }

    bool all_finite() const noexcept {
        for (double v : data_)
            if (!std::isfinite(v)) return false;
        return true;
    }

    double max_abs() const noexcept {
        double m = 0.0;
        for (double v : data_) m = std::max(m, std::abs(v));
        return m;
    }

    Matrix col_copy(std::size_t j) const {
        assert(j < cols_);
        Matrix out(rows_, 1);
        for (std::size_t r = 0; r < rows_; ++r) out(r, 0) = (*this)(r, j);
        return out;
    }

    void set_col(std::size_t j, const Matrix& v) {
        if (v.rows() != rows_ || v.cols() != 1)
            throw ShapeError("set_col: expected " + std::to_string(rows_) + "x1, got " +
                             shape_str(v));
        for (std::size_t r = 0; r < rows_; ++r) (*this)(r, j) = v(r, 0);
    }

    // Columns gathered by index, e.g. a minibatch of frames.
    Matrix gather_cols(const std::vector<std::size_t>& idx) const {
        Matrix out(rows_, idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) {
            assert(idx[k] < cols_);
            for (std::size_t r = 0; r < rows_; ++r) out(r, k) = (*this)(r, idx[k]);
        }
        return out;
    }

    friend bool operator==(const Matrix& a, const Matrix& b) {
        return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
    }

    static std::string shape_str(const Matrix& m) {
        return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

namespace detail {

using EigenRowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Map = Eigen::Map<EigenRowMajor>;
using ConstMap = Eigen::Map<const EigenRowMajor>;

inline ConstMap as_eigen(const Matrix& m) {
    return ConstMap(m.data(), static_cast<Eigen::Index>(m.rows()),
                    static_cast<Eigen::Index>(m.cols()));
}
inline Map as_eigen(Matrix& m) {
    return Map(m.data(), static_cast<Eigen::Index>(m.rows()),
               static_cast<Eigen::Index>(m.cols()));
}

} // namespace detail

// C = op(A) * op(B) where op is optional transposition.
inline Matrix matmul(const Matrix& a, const Matrix& b, bool transpose_a = false,
                     bool transpose_b = false) {
    const std::size_t ar = transpose_a ? a.cols() : a.rows();
    const std::size_t ac = transpose_a ? a.rows() : a.cols();
    const std::size_t br = transpose_b ? b.cols() : b.rows();
    const std::size_t bc = transpose_b ? b.rows() : b.cols();
    if (ac != br)
        throw ShapeError("matmul: inner dimensions disagree, " + Matrix::shape_str(a) +
                         (transpose_a ? "^T" : "") + " * " + Matrix::shape_str(b) +
                         (transpose_b ? "^T" : ""));
    Matrix out(ar, bc);
    auto c = detail::as_eigen(out);
    auto ea = detail::as_eigen(a);
    auto eb = detail::as_eigen(b);
    if (!transpose_a && !transpose_b)
        c.noalias() = ea * eb;
    else if (transpose_a && !transpose_b)
        c.noalias() = ea.transpose() * eb;
    else if (!transpose_a && transpose_b)
        c.noalias() = ea * eb.transpose();
    else
        c.noalias() = ea.transpose() * eb.transpose();
    return out;
}

enum class Elemwise { Mul, Add, Sub };

inline Matrix elementwise(const Matrix& a, const Matrix& b, Elemwise op) {
    if (!a.same_shape(b))
        throw ShapeError("elementwise: shape " + Matrix::shape_str(a) + " vs " +
                         Matrix::shape_str(b));
    Matrix out(a.rows(), a.cols());
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    const std::size_t n = a.size();
    switch (op) {
        case Elemwise::Mul:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
            break;
        case Elemwise::Add:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
            break;
        case Elemwise::Sub:
            for (std::size_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
            break;
    }
    return out;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
    return elementwise(a, b, Elemwise::Mul);
}
inline Matrix add(const Matrix& a, const Matrix& b) {
    return elementwise(a, b, Elemwise::Add);
}
inline Matrix sub(const Matrix& a, const Matrix& b) {
    return elementwise(a, b, Elemwise::Sub);
}

// Numerically stable logistic, split on the sign of x.
inline double sigmoid_scalar(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

inline Matrix sigmoid(const Matrix& a) {
    Matrix out(a.rows(), a.cols());
    const double* pa = a.data();
    double* po = out.data();
    for (std::size_t i = 0; i < a.size(); ++i) po[i] = sigmoid_scalar(pa[i]);
    return out;
}

// dL/d(pre) = dL/dm . m . (1 - m) for m = sigmoid(pre).
inline Matrix sigmoid_backprop(const Matrix& dm, const Matrix& m) {
    if (!dm.same_shape(m))
        throw ShapeError("sigmoid_backprop: shape " + Matrix::shape_str(dm) + " vs " +
                         Matrix::shape_str(m));
    Matrix out(dm.rows(), dm.cols());
    for (std::size_t i = 0; i < dm.size(); ++i) {
        const double mi = m.data()[i];
        out.data()[i] = dm.data()[i] * mi * (1.0 - mi);
    }
    return out;
}

inline Matrix transpose(const Matrix& a) {
    Matrix out(a.cols(), a.rows());
    for (std::size_t r = 0; r < a.rows(); ++r)
        for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
    return out;
}

inline Matrix scaled(const Matrix& a, double s) {
    Matrix out(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * s;
    return out;
}

inline void scale_in_place(Matrix& a, double s) {
    for (std::size_t i = 0; i < a.size(); ++i) a.data()[i] *= s;
}

// y += alpha * x
inline void axpy(Matrix& y, double alpha, const Matrix& x) {
    if (!y.same_shape(x))
        throw ShapeError("axpy: shape " + Matrix::shape_str(y) + " vs " + Matrix::shape_str(x));
    for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += alpha * x.data()[i];
}

inline double sum_squares(const Matrix& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * a.data()[i];
    return s;
}

inline double mean(const Matrix& a) {
    if (a.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i];
    return s / static_cast<double>(a.size());
}

inline double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (!a.same_shape(b))
        throw ShapeError("max_abs_diff: shape " + Matrix::shape_str(a) + " vs " +
                         Matrix::shape_str(b));
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

inline Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

inline Matrix hconcat(const std::vector<Matrix>& mats) {
    if (mats.empty()) return Matrix();
    const std::size_t rows = mats.front().rows();
    std::size_t cols = 0;
    for (const auto& m : mats) {
        if (m.rows() != rows) throw ShapeError("hconcat: row count mismatch");
        cols += m.cols();
    }
    Matrix out(rows, cols);
    std::size_t off = 0;
    for (const auto& m : mats) {
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < m.cols(); ++c) out(r, off + c) = m(r, c);
        off += m.cols();
    }
    return out;
}

inline Matrix vconcat(const std::vector<Matrix>& mats) {
    if (mats.empty()) return Matrix();
    const std::size_t cols = mats.front().cols();
    std::size_t rows = 0;
    for (const auto& m : mats) {
        if (m.cols() != cols) throw ShapeError("vconcat: column count mismatch");
        rows += m.rows();
    }
    Matrix out(rows, cols);
    std::size_t off = 0;
    for (const auto& m : mats) {
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < cols; ++c) out(off + r, c) = m(r, c);
        off += m.rows();
    }
    return out;
}

} // namespace relseq
