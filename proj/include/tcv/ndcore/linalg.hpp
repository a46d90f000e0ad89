// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tcv/ndcore/rng.hpp"

namespace tcv {

/// Row-major dense matrix of doubles.
class Mat64 {
public:
    Mat64() = default;
    Mat64(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Mat64(std::size_t rows, std::size_t cols, std::vector<double> data);

    static Mat64 identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }

    double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {data_.data() + r * cols_, cols_};
    }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    bool operator==(const Mat64&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Read-only row-major view, used for weight blocks living inside a flat θ.
struct MatView {
    const double* data = nullptr;
    std::size_t rows = 0;
    std::size_t cols = 0;

    double operator()(std::size_t r, std::size_t c) const noexcept { return data[r * cols + c]; }
};

inline MatView view(const Mat64& m) noexcept { return {m.data().data(), m.rows(), m.cols()}; }

/// y = A x (+ y if accumulate).
void gemv(MatView a, std::span<const double> x, std::span<double> y, bool accumulate = false);

/// y = A^T x (+ y if accumulate).
void gemv_t(MatView a, std::span<const double> x, std::span<double> y, bool accumulate = false);

/// C = A B
Mat64 gemm(const Mat64& a, const Mat64& b);

Mat64 transpose(const Mat64& a);

/// Pairwise (cascade) summation; error grows as O(log n) rather than O(n).
double pairwise_sum(std::span<const double> v) noexcept;

double dot(std::span<const double> a, std::span<const double> b) noexcept;

/// Inner product accumulated in pairwise order.
double pairwise_dot(std::span<const double> a, std::span<const double> b);

double squared_norm(std::span<const double> v) noexcept;
double norm2(std::span<const double> v) noexcept;

/// y += a x
void axpy(double a, std::span<const double> x, std::span<double> y) noexcept;

bool all_finite(std::span<const double> v) noexcept;

/// Matrix with i.i.d. N(0, scale^2) entries.
Mat64 random_gaussian_matrix(std::size_t rows, std::size_t cols, RngStream& rng, double scale = 1.0);

} // namespace tcv
