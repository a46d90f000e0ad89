// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tcv/autodiff/tape.hpp"

namespace tcv {

/// Tape nodes holding s(x), its first partials ∂_i s(x) and second partials
/// ∂_i∂_j s(x). second[i * dim + j] and second[j * dim + i] are the same node.
struct JetNodes {
    std::size_t dim = 0;
    int order = 0;
    NodeId value = kNoNode;
    std::vector<NodeId> first;
    std::vector<NodeId> second;

    /// Node for ∂^α s, |α| <= order. Exponent vectors of length dim.
    NodeId derivative(std::span<const int> alpha) const;
};

/// Records the forward Taylor-mode sweep of the network at x on `tape`:
/// for every layer, a = W h + b, a_i = W h_i, a_ij = W h_ij and
/// y = φ(a), y_i = φ'(a) a_i, y_ij = φ''(a) a_i a_j + φ'(a) a_ij.
/// Throws ValidationError for relu with max_order >= 2.
JetNodes input_jet(Tape& tape, std::span<const double> x, int max_order);

/// Plain value of the jet, read back from a forwarded tape.
struct JetValues {
    std::size_t dim = 0;
    int order = 0;
    Vec64 value;
    std::vector<Vec64> first;  // D vectors
    std::vector<Vec64> second; // D*D vectors (symmetric)

    const Vec64& derivative(std::span<const int> alpha) const;
};

JetValues read_jet(const Tape& tape, const JetNodes& jet);

/// Convenience: build, forward and read the jet at x.
JetValues evaluate_jet(const MlpView& net, std::span<const double> x, int max_order);

} // namespace tcv
