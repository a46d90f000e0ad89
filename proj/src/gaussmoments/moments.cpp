// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/gaussmoments/moments.hpp"

#include <cmath>

#include "tcv/ndcore/errors.hpp"
#include "tcv/ndcore/linalg.hpp"

namespace tcv {

MultiIndex::MultiIndex(std::vector<int> exponents) : exponents_(std::move(exponents)) {
    for (int e : exponents_) {
        require(e >= 0, "MultiIndex: exponents must be non-negative");
    }
}

MultiIndex MultiIndex::unit(std::size_t dim, std::size_t i) {
    std::vector<int> e(dim, 0);
    e.at(i) = 1;
    return MultiIndex(std::move(e));
}

int MultiIndex::order() const noexcept {
    int n = 0;
    for (int e : exponents_) {
        n += e;
    }
    return n;
}

std::uint64_t MultiIndex::factorial() const {
    require(order() <= 20, "MultiIndex::factorial: |alpha| above 20 overflows");
    std::uint64_t f = 1;
    for (int e : exponents_) {
        for (int i = 2; i <= e; ++i) {
            f *= static_cast<std::uint64_t>(i);
        }
    }
    return f;
}

double MultiIndex::monomial(std::span<const double> z) const {
    double p = 1.0;
    for (std::size_t i = 0; i < exponents_.size(); ++i) {
        for (int r = 0; r < exponents_[i]; ++r) {
            p *= z[i];
        }
    }
    return p;
}

bool MultiIndex::all_even() const noexcept {
    for (int e : exponents_) {
        if (e % 2 != 0) {
            return false;
        }
    }
    return true;
}

MultiIndex MultiIndex::operator+(const MultiIndex& other) const {
    if (dim() != other.dim()) {
        throw ContractViolation("MultiIndex: dimension mismatch in sum");
    }
    std::vector<int> e(exponents_);
    for (std::size_t i = 0; i < e.size(); ++i) {
        e[i] += other.exponents_[i];
    }
    return MultiIndex(std::move(e));
}

namespace {

void enumerate_degree(std::size_t pos, int remaining, std::vector<int>& cur,
                      std::vector<MultiIndex>& out) {
    if (pos + 1 == cur.size()) {
        cur[pos] = remaining;
        out.emplace_back(cur);
        return;
    }
    for (int e = 0; e <= remaining; ++e) {
        cur[pos] = e;
        enumerate_degree(pos + 1, remaining - e, cur, out);
    }
}

} // namespace

std::vector<MultiIndex> enumerate_multi_indices(std::size_t dim, int max_order) {
    require(dim >= 1, "enumerate_multi_indices: dim must be >= 1");
    require(max_order >= 0, "enumerate_multi_indices: max_order must be >= 0");
    std::vector<MultiIndex> out;
    std::vector<int> cur(dim, 0);
    for (int n = 0; n <= max_order; ++n) {
        enumerate_degree(0, n, cur, out);
    }
    return out;
}

std::uint64_t even_moment_1d(int n) {
    if (n % 2 != 0) {
        return 0;
    }
    // (2p)! / (2^p p!) = (2p - 1)!!
    std::uint64_t r = 1;
    for (int i = n - 1; i > 1; i -= 2) {
        r *= static_cast<std::uint64_t>(i);
    }
    return r;
}

double gaussian_moment(const MultiIndex& alpha) {
    std::uint64_t p = 1;
    for (int e : alpha.exponents()) {
        const std::uint64_t w = even_moment_1d(e);
        if (w == 0) {
            return 0.0;
        }
        p *= w;
    }
    return static_cast<double>(p);
}

Vec64 gaussian_moment_vec(const MultiIndex& alpha) {
    Vec64 out(alpha.dim());
    for (std::size_t m = 0; m < alpha.dim(); ++m) {
        out[m] = gaussian_moment(alpha + MultiIndex::unit(alpha.dim(), m));
    }
    return out;
}

MomentTable::MomentTable(std::size_t dim, int max_order) : dim_(dim), max_order_(max_order) {
    for (const auto& a : enumerate_multi_indices(dim, max_order)) {
        table_.emplace(a, gaussian_moment(a));
    }
}

double MomentTable::moment(const MultiIndex& alpha) const {
    const auto it = table_.find(alpha);
    if (it == table_.end()) {
        throw ContractViolation("MomentTable: multi-index outside the table");
    }
    return it->second;
}

Vec64 MomentTable::moment_vec(const MultiIndex& alpha) const {
    Vec64 out(dim_);
    for (std::size_t m = 0; m < dim_; ++m) {
        out[m] = moment(alpha + MultiIndex::unit(dim_, m));
    }
    return out;
}

Vec64 expected_taylor(const DerivativeLookup& derivative, std::size_t dim, double sigma, int k) {
    Vec64 out;
    for (const auto& alpha : enumerate_multi_indices(dim, k)) {
        const double delta = gaussian_moment(alpha);
        if (delta == 0.0) {
            continue;
        }
        const Vec64 d = derivative(alpha);
        if (out.empty()) {
            out.assign(d.size(), 0.0);
        }
        const double c = std::pow(sigma, alpha.order()) * delta / static_cast<double>(alpha.factorial());
        axpy(c, d, out);
    }
    return out;
}

} // namespace tcv
