// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Variance-reduction ratios at a frozen parameter vector.
//
// Samples (x, z, σ) are drawn in two phases from independent streams. The
// calibration phase fixes β (scalar β_opt for the objective, per-parameter
// β_g for the gradient); the evaluation phase measures the ratios with β
// held fixed. Evaluation samples fall into contiguous blocks; standard errors
// come from a bootstrap over blocks. Every control variate in one call sees
// the same samples.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tcv/cv/control_variate.hpp"
#include "tcv/dsm/schedule.hpp"
#include "tcv/ndcore/linalg.hpp"
#include "tcv/ndcore/rng.hpp"
#include "tcv/scorenet/network.hpp"

namespace tcv {

struct MeasureConfig {
    std::size_t n_calibration = 2000;
    std::size_t n_eval = 10000;
    std::size_t blocks = 20;
    std::size_t bootstrap = 200;
    double lambda_power = 2.0;
    std::size_t threads = 1;

    /// Throws ValidationError unless n_calibration >= 2, blocks >= 2 and
    /// every block holds at least two samples.
    void validate() const;
};

struct Ratio {
    double value = 0.0;
    double se = 0.0;
};

/// Results for one control variate.
struct CvMeasurement {
    double beta_obj = 0.0;       // calibrated scalar β_opt
    double beta_grad_mean = 0.0; // mean over parameters of calibrated β_g
    Ratio rho_obj_opt;           // Var(L - β_opt C) / Var L
    Ratio rho_obj_one;           // β = 1
    Ratio rho_grad_obj_beta;     // gradients with the scalar objective β
    Ratio rho_grad_one;          // gradients with β = 1
    Ratio rho_grad;              // gradients with per-parameter β_g
};

struct Measurement {
    std::size_t n_eval = 0;
    double loss_mean = 0.0; // mean λL over the evaluation phase
    std::vector<CvMeasurement> cvs;
};

/// Level and z per sample come from the schedule; pass a one-level schedule
/// for a fixed σ. x is drawn uniformly from the rows of `data`.
Measurement measure_variance(const ScoreNetwork& net, const Mat64& data,
                             const NoiseSchedule& schedule,
                             std::span<const ControlVariate* const> cvs,
                             const MeasureConfig& config, const RngStream& rng);

NoiseSchedule fixed_sigma(double sigma);

} // namespace tcv
