// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "tcv/autodiff/activation.hpp"
#include "tcv/autodiff/tape.hpp"
#include "tcv/ndcore/rng.hpp"

namespace tcv {

struct MlpConfig {
    std::size_t input_dim = 2;
    std::vector<std::size_t> hidden_widths = {128, 128};
    ActivationFamily activation{ActivationKind::tanh};
    bool spectral_norm = false;

    /// Throws ValidationError unless input_dim >= 1 and all widths >= 1.
    /// No hidden layers gives the affine map s(x) = W x + b.
    void validate() const;
    bool operator==(const MlpConfig&) const = default;
};

/// Σ (w_in * w_out + w_out) over the layers D -> h_1 -> ... -> h_n -> D.
std::size_t parameter_count(const MlpConfig& config);

ParamLayout make_layout(const MlpConfig& config);

/// Score network s_θ: R^D -> R^D as an MLP over a flat parameter vector.
class ScoreNetwork {
public:
    ScoreNetwork(MlpConfig config, std::vector<double> theta);

    const MlpConfig& config() const noexcept { return config_; }
    const ParamLayout& layout() const noexcept { return layout_; }
    std::size_t dim() const noexcept { return config_.input_dim; }
    std::size_t param_count() const noexcept { return theta_.size(); }

    std::span<const double> theta() const noexcept { return theta_; }
    std::span<double> mutable_theta() noexcept { return theta_; }

    MlpView view() const noexcept;

    /// s_θ(x), through the same kernels the tape uses.
    Vec64 evaluate(std::span<const double> x) const;

    MatView weight(std::size_t layer) const noexcept;
    std::span<const double> bias(std::size_t layer) const noexcept;

private:
    MlpConfig config_;
    ParamLayout layout_;
    std::vector<double> theta_;
};

/// Weights ~ N(0, 1/fan_in), biases zero.
ScoreNetwork init_network(const MlpConfig& config, RngStream rng);

/// Divides every weight matrix by its largest singular value (power iteration,
/// at most `iters` sweeps). Zero matrices are left unchanged.
ScoreNetwork spectral_normalize(const ScoreNetwork& network, std::size_t iters = 1000);

/// In-place version used after optimizer steps.
void spectral_normalize_inplace(ScoreNetwork& network, std::size_t iters = 1000);

/// Largest singular value of a dense matrix by power iteration.
double spectral_norm_estimate(MatView w, std::size_t iters = 1000);

struct ParamPlan {
    MlpConfig config;
    std::size_t width = 0;
    std::size_t realized_count = 0;
};

/// Uniform hidden width for `depth` hidden layers whose parameter count is
/// within 3% of `total`. Throws ValidationError when no width >= 1 fits.
ParamPlan param_count_plan(std::size_t total, std::size_t depth, std::size_t input_dim = 2,
                           ActivationFamily activation = ActivationFamily{});

} // namespace tcv
