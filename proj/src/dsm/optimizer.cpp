// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/dsm/optimizer.hpp"

#include <cmath>

#include "tcv/ndcore/errors.hpp"

namespace tcv {

const char* optimizer_name(OptimizerKind kind) noexcept {
    return kind == OptimizerKind::sgd ? "sgd" : "adam";
}

OptimizerKind parse_optimizer(const std::string& name) {
    if (name == "sgd") {
        return OptimizerKind::sgd;
    }
    if (name == "adam") {
        return OptimizerKind::adam;
    }
    throw ValidationError("unknown optimizer '" + name + "' (expected sgd or adam)");
}

void OptimizerConfig::validate() const {
    require(std::isfinite(lr) && lr >= 0.0, "optimizer: lr must be finite and >= 0");
    require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
            "optimizer: Adam betas must lie in [0, 1)");
    require(eps > 0.0, "optimizer: eps must be positive");
}

OptimizerState::OptimizerState(OptimizerConfig cfg, std::size_t param_count) : config(cfg) {
    config.validate();
    if (config.kind == OptimizerKind::adam) {
        m.assign(param_count, 0.0);
        v.assign(param_count, 0.0);
    }
}

namespace {

void check_shapes(std::span<double> theta, std::span<const double> grad) {
    if (theta.size() != grad.size()) {
        throw ContractViolation("optimizer: theta and gradient differ in length");
    }
}

} // namespace

void sgd_update(OptimizerState& state, std::span<double> theta, std::span<const double> grad) {
    check_shapes(theta, grad);
    const double lr = state.config.lr;
    for (std::size_t i = 0; i < theta.size(); ++i) {
        theta[i] -= lr * grad[i];
    }
    ++state.step;
}

void adam_update(OptimizerState& state, std::span<double> theta, std::span<const double> grad) {
    check_shapes(theta, grad);
    if (state.m.size() != theta.size()) {
        state.m.assign(theta.size(), 0.0);
        state.v.assign(theta.size(), 0.0);
    }
    const auto& c = state.config;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(c.beta1, t);
    const double bc2 = 1.0 - std::pow(c.beta2, t);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        state.m[i] = c.beta1 * state.m[i] + (1.0 - c.beta1) * grad[i];
        state.v[i] = c.beta2 * state.v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
        const double mh = state.m[i] / bc1;
        const double vh = state.v[i] / bc2;
        theta[i] -= c.lr * mh / (std::sqrt(vh) + c.eps);
    }
}

void optimizer_update(OptimizerState& state, std::span<double> theta, std::span<const double> grad) {
    if (state.config.kind == OptimizerKind::sgd) {
        sgd_update(state, theta, grad);
    } else {
        adam_update(state, theta, grad);
    }
}

} // namespace tcv
