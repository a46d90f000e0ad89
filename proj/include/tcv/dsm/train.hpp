// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Minibatch training of the score network with optional gradient control
// variates.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "tcv/cv/control_variate.hpp"
#include "tcv/dsm/optimizer.hpp"
#include "tcv/dsm/schedule.hpp"
#include "tcv/estimator/estimator.hpp"
#include "tcv/ndcore/linalg.hpp"
#include "tcv/scorenet/network.hpp"

namespace tcv {

struct TrainConfig {
    std::size_t batch_size = 10;
    std::size_t steps = 1000;
    std::uint64_t seed = 0;
    double sigma_min = 0.01;
    double sigma_max = 1.0;
    std::size_t levels = 10;
    OptimizerConfig optimizer;
    bool use_cv = false;
    CvConfig cv;
    BetaMode beta_mode = BetaMode::ema_optimal;
    double beta_fixed = 1.0;
    double ema_decay = 0.9;
    std::vector<std::size_t> checkpoint_steps;
    double lambda_power = 2.0;
    std::size_t threads = 1;

    void validate() const;
};

/// Per-batch sums of λ(σ_i)∂_θL_i and λ(σ_i)C_{g,i} plus their co-moments.
struct BatchStats {
    std::size_t n = 0;
    Vec64 sum_g;
    Vec64 sum_c;              // empty without a control variate
    VecCovAccumulator acc;    // dim 0 without a control variate
    double loss_sum = 0.0;    // Σ λ(σ_i) L_i
    std::vector<std::size_t> sigma_histogram;
};

/// Evaluates every sample of `batch` (rows of x). Sample i draws its level and
/// z from split_stream(rng, i). The gradient variate is the reverse pass of
/// the objective variate on the same tape.
BatchStats batch_statistics(const ScoreNetwork& net, const Mat64& batch, const RngStream& rng,
                            const NoiseSchedule& schedule, const ControlVariate* cv,
                            double lambda_power = 2.0, std::size_t threads = 1);

struct StepMetrics {
    std::size_t step = 0;
    double loss_mean = 0.0;
    double grad_norm = 0.0;
    double rho_g_batch = 0.0; // NaN without a control variate or for B < 2
    double beta_norm = 0.0;
    std::vector<std::size_t> sigma_histogram;

    std::string to_json() const;
};

/// One update: ḡ = (Σ λ∂_θL_i - β ⊙ Σ λC_{g,i}) / B, then the optimizer step
/// and, for spectrally normalised networks, the projection.
StepMetrics train_step(ScoreNetwork& net, const Mat64& batch, const RngStream& rng,
                       const NoiseSchedule& schedule, OptimizerState& optimizer,
                       const ControlVariate* cv, BetaTracker* beta, double lambda_power = 2.0,
                       std::size_t threads = 1);

using CheckpointFn = std::function<void(std::size_t step, const ScoreNetwork& net)>;

/// Runs config.steps updates. Batches are drawn with replacement from `data`
/// by split_stream(seed stream, step); per-step metrics go to `log` as JSON
/// lines when it is non-null. `on_checkpoint` is called for every step listed
/// in config.checkpoint_steps (0 means before the first update).
std::vector<StepMetrics> train(ScoreNetwork& net, const Mat64& data, const TrainConfig& config,
                               const ControlVariate* cv, std::ostream* log = nullptr,
                               const CheckpointFn& on_checkpoint = nullptr);

/// Stream of the batch rows and of the per-sample draws for a step.
RngStream step_stream(std::uint64_t seed, std::size_t step);
Mat64 draw_batch(const Mat64& data, std::size_t batch_size, RngStream rng);

} // namespace tcv
