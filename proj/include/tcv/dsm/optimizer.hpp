// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace tcv {

enum class OptimizerKind { sgd, adam };

const char* optimizer_name(OptimizerKind kind) noexcept;
OptimizerKind parse_optimizer(const std::string& name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    void validate() const;
};

struct OptimizerState {
    OptimizerConfig config;
    std::vector<double> m;
    std::vector<double> v;
    std::size_t step = 0;

    OptimizerState() = default;
    OptimizerState(OptimizerConfig config, std::size_t param_count);
};

/// θ ← θ - lr ḡ
void sgd_update(OptimizerState& state, std::span<double> theta, std::span<const double> grad);

/// Bias-corrected Adam.
void adam_update(OptimizerState& state, std::span<double> theta, std::span<const double> grad);

/// Dispatches on state.config.kind.
void optimizer_update(OptimizerState& state, std::span<double> theta, std::span<const double> grad);

} // namespace tcv
