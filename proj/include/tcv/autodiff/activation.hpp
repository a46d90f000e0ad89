// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <string_view>

namespace tcv {

enum class ActivationKind { tanh, softplus, relu };

/// Elementwise nonlinearity with analytic derivatives up to order 3.
class ActivationFamily {
public:
    static constexpr int kMaxOrder = 3;

    constexpr ActivationFamily() = default;
    constexpr explicit ActivationFamily(ActivationKind kind) : kind_(kind) {}

    static ActivationFamily parse(std::string_view name);

    ActivationKind kind() const noexcept { return kind_; }
    std::string name() const;

    /// φ^(order)(a) for order in [0, 3].
    double derivative(double a, int order) const;

    void apply(std::span<const double> in, std::span<double> out, int order) const;

    /// Highest input-derivative order a jet may use. relu has φ'' = 0 a.e.
    int max_jet_order() const noexcept { return kind_ == ActivationKind::relu ? 1 : 2; }

    bool operator==(const ActivationFamily&) const = default;

private:
    ActivationKind kind_ = ActivationKind::tanh;
};

} // namespace tcv
