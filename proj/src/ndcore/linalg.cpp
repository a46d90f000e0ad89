// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/ndcore/linalg.hpp"

#include <cmath>

#include "tcv/ndcore/errors.hpp"

namespace tcv {

Mat64::Mat64(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
        throw ValidationError("Mat64: data length does not match rows*cols");
    }
}

Mat64 Mat64::identity(std::size_t n) {
    Mat64 m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

void gemv(MatView a, std::span<const double> x, std::span<double> y, bool accumulate) {
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double* row = a.data + r * a.cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < a.cols; ++c) {
            acc += row[c] * x[c];
        }
        y[r] = accumulate ? y[r] + acc : acc;
    }
}

void gemv_t(MatView a, std::span<const double> x, std::span<double> y, bool accumulate) {
    if (!accumulate) {
        for (std::size_t c = 0; c < a.cols; ++c) {
            y[c] = 0.0;
        }
    }
    for (std::size_t r = 0; r < a.rows; ++r) {
        const double* row = a.data + r * a.cols;
        const double xr = x[r];
        if (xr == 0.0) {
            continue;
        }
        for (std::size_t c = 0; c < a.cols; ++c) {
            y[c] += row[c] * xr;
        }
    }
}

Mat64 gemm(const Mat64& a, const Mat64& b) {
    if (a.cols() != b.rows()) {
        throw ValidationError("gemm: inner dimensions differ");
    }
    Mat64 c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                c(i, j) += aik * b(k, j);
            }
        }
    }
    return c;
}

Mat64 transpose(const Mat64& a) {
    Mat64 t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

double pairwise_sum(std::span<const double> v) noexcept {
    constexpr std::size_t kBlock = 8;
    if (v.size() <= kBlock) {
        double s = 0.0;
        for (double x : v) {
            s += x;
        }
        return s;
    }
    const std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double pairwise_dot(std::span<const double> a, std::span<const double> b) {
    constexpr std::size_t kBlock = 8;
    if (a.size() <= kBlock) {
        return dot(a, b);
    }
    const std::size_t half = a.size() / 2;
    return pairwise_dot(a.first(half), b.first(half)) +
           pairwise_dot(a.subspan(half), b.subspan(half));
}

double squared_norm(std::span<const double> v) noexcept { return dot(v, v); }

double norm2(std::span<const double> v) noexcept { return std::sqrt(squared_norm(v)); }

void axpy(double a, std::span<const double> x, std::span<double> y) noexcept {
    for (std::size_t i = 0; i < x.size(); ++i) {
        y[i] += a * x[i];
    }
}

bool all_finite(std::span<const double> v) noexcept {
    for (double x : v) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}

Mat64 random_gaussian_matrix(std::size_t rows, std::size_t cols, RngStream& rng, double scale) {
    Mat64 m(rows, cols);
    rng.gaussian_fill(m.data());
    for (double& x : m.data()) {
        x *= scale;
    }
    return m;
}

} // namespace tcv
