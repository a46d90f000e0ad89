// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for unit and acceptance tests: statistics, tolerance checks
// and random networks.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "tcv/ndcore/rng.hpp"
#include "tcv/scorenet/network.hpp"

namespace tcv::testing {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;
};

/// Mean and standard error using a two-pass variance (independent of the
/// library accumulators).
inline MeanSe mean_se(std::span<const double> v) {
    const double n = static_cast<double>(v.size());
    long double s = 0.0L;
    for (double e : v) {
        s += e;
    }
    const double mean = static_cast<double>(s / v.size());
    long double ss = 0.0L;
    for (double e : v) {
        ss += (e - mean) * (e - mean);
    }
    const double var = static_cast<double>(ss / (v.size() - 1));
    return {mean, std::sqrt(var / n)};
}

inline double sample_variance(std::span<const double> v) {
    const double mean = mean_se(v).mean;
    long double ss = 0.0L;
    for (double e : v) {
        ss += (e - mean) * (e - mean);
    }
    return static_cast<double>(ss / (v.size() - 1));
}

/// Mean is within `k` standard errors of `target`. A zero SE demands equality
/// up to rounding.
inline bool within_se(MeanSe m, double target, double k = 5.0) {
    const double tol = std::max(k * m.se, 1e-12 * std::max(1.0, std::abs(target)));
    return std::abs(m.mean - target) <= tol;
}

inline bool rel_close(double a, double b, double rel, double abs_floor = 0.0) {
    return std::abs(a - b) <= std::max(abs_floor, rel * std::max(std::abs(a), std::abs(b)));
}

/// Network with weights N(0, scale^2/fan_in) and biases N(0, bias_scale^2).
inline ScoreNetwork random_network(const MlpConfig& config, std::uint64_t seed, double scale = 1.0,
                                   double bias_scale = 0.1) {
    ScoreNetwork net = init_network(config, RngStream(seed));
    RngStream rng(seed, 99);
    auto theta = net.mutable_theta();
    for (const auto& layer : net.layout().layers) {
        for (std::size_t i = 0; i < layer.rows * layer.cols; ++i) {
            theta[layer.weight_offset + i] *= scale;
        }
        for (std::size_t i = 0; i < layer.rows; ++i) {
            theta[layer.bias_offset + i] = bias_scale * rng.gaussian();
        }
    }
    return net;
}

inline MlpConfig mlp(std::size_t dim, std::vector<std::size_t> widths,
                     ActivationKind act = ActivationKind::tanh) {
    MlpConfig c;
    c.input_dim = dim;
    c.hidden_widths = std::move(widths);
    c.activation = ActivationFamily(act);
    return c;
}

/// Affine network s(x) = W x + b with the given entries.
inline ScoreNetwork affine_network(std::size_t dim, std::vector<double> w, std::vector<double> b) {
    MlpConfig c = mlp(dim, {});
    std::vector<double> theta = std::move(w);
    theta.insert(theta.end(), b.begin(), b.end());
    return ScoreNetwork(c, std::move(theta));
}

} // namespace tcv::testing
