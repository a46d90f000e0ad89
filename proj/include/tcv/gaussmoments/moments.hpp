// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Multi-index algebra and closed-form standard-normal moments.

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "tcv/ndcore/rng.hpp"

namespace tcv {

/// Exponent vector α ∈ N^D.
class MultiIndex {
public:
    MultiIndex() = default;
    explicit MultiIndex(std::vector<int> exponents);
    static MultiIndex zero(std::size_t dim) { return MultiIndex(std::vector<int>(dim, 0)); }
    static MultiIndex unit(std::size_t dim, std::size_t i);

    std::size_t dim() const noexcept { return exponents_.size(); }
    int operator[](std::size_t i) const noexcept { return exponents_[i]; }
    std::span<const int> exponents() const noexcept { return exponents_; }

    /// |α| = Σ α_i
    int order() const noexcept;

    /// α! = Π α_i!, exact in integers for |α| <= 20.
    std::uint64_t factorial() const;

    /// z^α = Π z_i^{α_i}
    double monomial(std::span<const double> z) const;

    bool all_even() const noexcept;

    MultiIndex operator+(const MultiIndex& other) const;

    auto operator<=>(const MultiIndex&) const = default;

private:
    std::vector<int> exponents_;
};

/// All α with |α| <= max_order in graded lexicographic order.
/// The count is C(dim + max_order, max_order).
std::vector<MultiIndex> enumerate_multi_indices(std::size_t dim, int max_order);

/// (n - 1)!! for even n (1 for n = 0), 0 for odd n. Exact.
std::uint64_t even_moment_1d(int n);

/// δ_α = E[z^α], z ~ N(0, I).
double gaussian_moment(const MultiIndex& alpha);

/// E[z^α z]; component m equals δ_{α + e_m}.
Vec64 gaussian_moment_vec(const MultiIndex& alpha);

/// δ_α for every |α| <= max_order of a fixed dimension, computed once.
class MomentTable {
public:
    MomentTable(std::size_t dim, int max_order);

    std::size_t dim() const noexcept { return dim_; }
    int max_order() const noexcept { return max_order_; }

    double moment(const MultiIndex& alpha) const;
    /// E[z^α z] assembled from the table.
    Vec64 moment_vec(const MultiIndex& alpha) const;

private:
    std::size_t dim_;
    int max_order_;
    std::map<MultiIndex, double> table_;
};

using DerivativeLookup = std::function<Vec64(const MultiIndex&)>;

/// E_z[T^k_{s,x}(x + σz)] = Σ_{|α| <= k} σ^{|α|} δ_α / α! ∂^α s(x).
Vec64 expected_taylor(const DerivativeLookup& derivative, std::size_t dim, double sigma, int k);

} // namespace tcv
