// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/scorenet/network.hpp"

#include <algorithm>
#include <cmath>

#include "tcv/ndcore/errors.hpp"

namespace tcv {

void MlpConfig::validate() const {
    require(input_dim >= 1, "MlpConfig: input_dim must be >= 1");
    for (std::size_t w : hidden_widths) {
        require(w >= 1, "MlpConfig: hidden widths must be >= 1");
    }
}

ParamLayout make_layout(const MlpConfig& config) {
    config.validate();
    ParamLayout layout;
    std::size_t fan_in = config.input_dim;
    std::size_t offset = 0;
    auto add = [&](std::size_t fan_out) {
        LayerShape shape;
        shape.rows = fan_out;
        shape.cols = fan_in;
        shape.weight_offset = offset;
        shape.bias_offset = offset + fan_out * fan_in;
        offset = shape.bias_offset + fan_out;
        layout.layers.push_back(shape);
        fan_in = fan_out;
    };
    for (std::size_t w : config.hidden_widths) {
        add(w);
    }
    add(config.input_dim);
    layout.count = offset;
    return layout;
}

std::size_t parameter_count(const MlpConfig& config) { return make_layout(config).count; }

ScoreNetwork::ScoreNetwork(MlpConfig config, std::vector<double> theta)
    : config_(std::move(config)), layout_(make_layout(config_)), theta_(std::move(theta)) {
    if (theta_.size() != layout_.count) {
        throw ValidationError("ScoreNetwork: expected " + std::to_string(layout_.count) +
                              " parameters, got " + std::to_string(theta_.size()));
    }
    if (!all_finite(theta_)) {
        throw ValidationError("ScoreNetwork: parameters must be finite");
    }
}

MlpView ScoreNetwork::view() const noexcept {
    return MlpView{theta_, &layout_, config_.activation, config_.input_dim};
}

MatView ScoreNetwork::weight(std::size_t layer) const noexcept {
    return kernels::weight_view(theta_, layout_.layers[layer]);
}

std::span<const double> ScoreNetwork::bias(std::size_t layer) const noexcept {
    const auto& shape = layout_.layers[layer];
    return {theta_.data() + shape.bias_offset, shape.rows};
}

Vec64 ScoreNetwork::evaluate(std::span<const double> x) const {
    if (x.size() != dim()) {
        throw ValidationError("ScoreNetwork::evaluate: wrong input dimension");
    }
    Vec64 h(x.begin(), x.end());
    Vec64 a;
    for (std::size_t l = 0; l < layout_.layers.size(); ++l) {
        const auto& shape = layout_.layers[l];
        a.assign(shape.rows, 0.0);
        kernels::affine(weight(l), theta_.data() + shape.bias_offset, h, a);
        if (l + 1 < layout_.layers.size()) {
            h.assign(shape.rows, 0.0);
            config_.activation.apply(a, h, 0);
        } else {
            h = a;
        }
    }
    return h;
}

ScoreNetwork init_network(const MlpConfig& config, RngStream rng) {
    const ParamLayout layout = make_layout(config);
    std::vector<double> theta(layout.count, 0.0);
    for (const auto& shape : layout.layers) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(shape.cols));
        std::span<double> w(theta.data() + shape.weight_offset, shape.rows * shape.cols);
        rng.gaussian_fill(w);
        for (double& v : w) {
            v *= scale;
        }
    }
    return ScoreNetwork(config, std::move(theta));
}

double spectral_norm_estimate(MatView w, std::size_t iters) {
    Vec64 v(w.cols);
    for (std::size_t i = 0; i < w.cols; ++i) {
        v[i] = 1.0 + 0.01 * static_cast<double>(i % 97);
    }
    Vec64 u(w.rows);
    Vec64 wtu(w.cols);
    double sigma = 0.0;
    for (std::size_t it = 0; it < std::max<std::size_t>(iters, 1); ++it) {
        const double vn = norm2(v);
        if (vn == 0.0) {
            return 0.0;
        }
        for (double& x : v) {
            x /= vn;
        }
        gemv(w, v, u);
        sigma = norm2(u);
        if (sigma == 0.0) {
            return 0.0;
        }
        gemv_t(w, u, wtu);
        // W^T W v - σ² v bounds the distance of σ² to the spectrum.
        double res2 = 0.0;
        for (std::size_t i = 0; i < w.cols; ++i) {
            const double r = wtu[i] - sigma * sigma * v[i];
            res2 += r * r;
        }
        v = wtu;
        if (std::sqrt(res2) <= 1e-10 * sigma * sigma) {
            break;
        }
    }
    // Rayleigh quotient of the last iterate.
    const double vn = norm2(v);
    for (double& x : v) {
        x /= vn;
    }
    gemv(w, v, u);
    return std::max(sigma, norm2(u));
}

void spectral_normalize_inplace(ScoreNetwork& network, std::size_t iters) {
    require(iters >= 1, "spectral_normalize: iters must be >= 1");
    auto theta = network.mutable_theta();
    for (std::size_t l = 0; l < network.layout().layers.size(); ++l) {
        const auto& shape = network.layout().layers[l];
        const double s = spectral_norm_estimate(network.weight(l), iters);
        if (s == 0.0) {
            continue;
        }
        for (std::size_t i = 0; i < shape.rows * shape.cols; ++i) {
            theta[shape.weight_offset + i] /= s;
        }
    }
}

ScoreNetwork spectral_normalize(const ScoreNetwork& network, std::size_t iters) {
    ScoreNetwork out = network;
    spectral_normalize_inplace(out, iters);
    return out;
}

ParamPlan param_count_plan(std::size_t total, std::size_t depth, std::size_t input_dim,
                           ActivationFamily activation) {
    require(depth >= 1, "param_count_plan: depth must be >= 1");
    require(input_dim >= 1, "param_count_plan: input_dim must be >= 1");
    const double d = static_cast<double>(input_dim);
    const double t = static_cast<double>(total);
    // count(W) = (depth-1) W² + (2D + depth) W + D
    const double qa = static_cast<double>(depth - 1);
    const double qb = 2.0 * d + static_cast<double>(depth);
    const double qc = d - t;
    double root = 0.0;
    if (qa == 0.0) {
        root = -qc / qb;
    } else {
        root = (-qb + std::sqrt(qb * qb - 4.0 * qa * qc)) / (2.0 * qa);
    }
    auto config_for = [&](std::size_t w) {
        MlpConfig c;
        c.input_dim = input_dim;
        c.hidden_widths.assign(depth, w);
        c.activation = activation;
        return c;
    };
    ParamPlan best;
    double best_err = 1e300;
    for (double cand : {std::floor(root), std::ceil(root)}) {
        if (!(cand >= 1.0)) {
            continue;
        }
        const auto w = static_cast<std::size_t>(cand);
        const MlpConfig c = config_for(w);
        const std::size_t n = parameter_count(c);
        const double err = std::abs(static_cast<double>(n) - t) / t;
        if (err < best_err) {
            best_err = err;
            best = ParamPlan{c, w, n};
        }
    }
    if (best.width == 0 || best_err > 0.03) {
        throw ValidationError("param_count_plan: no uniform width reaches " + std::to_string(total) +
                              " parameters with depth " + std::to_string(depth));
    }
    return best;
}

} // namespace tcv
