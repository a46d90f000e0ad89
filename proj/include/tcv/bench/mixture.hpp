// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Isotropic Gaussian mixtures as toy data with an analytic score.

#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "tcv/cv/control_variate.hpp"
#include "tcv/ndcore/linalg.hpp"
#include "tcv/ndcore/rng.hpp"
#include "tcv/scorenet/network.hpp"

namespace tcv {

/// Σ_i w_i N(μ_i, v I).
struct GaussianMixture {
    std::vector<double> weights;
    std::vector<Vec64> means;
    double variance = 1.0;

    std::size_t dim() const noexcept { return means.empty() ? 0 : means[0].size(); }
    std::size_t components() const noexcept { return weights.size(); }

    /// Throws ValidationError unless weights are positive and sum to 1 (1e-12),
    /// all means share one dimension and variance > 0.
    void validate() const;

    Vec64 mean() const;
    /// Every mean moved by `offset`.
    GaussianMixture shifted(std::span<const double> offset) const;
    /// Law of x + σz: component variance v + σ².
    GaussianMixture smoothed(double sigma) const;

    /// log of each w_i N(x; μ_i, vI).
    Vec64 component_log_terms(std::span<const double> x) const;
    double log_density(std::span<const double> x) const;
    double density(std::span<const double> x) const;
    /// Posterior component probabilities, normalised with log-sum-exp.
    Vec64 responsibilities(std::span<const double> x) const;
};

/// 1/5 N(5·1, I) + 4/5 N(-5·1, I) in R^2.
GaussianMixture toy_mixture();

/// Midpoint rule over [lo, hi]^2 with n cells per axis. Two-dimensional only.
double density_integral(const GaussianMixture& gm, double lo, double hi, std::size_t n);

/// Σ_i r_i(x)(μ_i - x) / v.
Vec64 mixture_score(const GaussianMixture& gm, std::span<const double> x);

struct Dataset {
    Mat64 samples;
    bool centered = false;
    Vec64 offset; // subtracted from the raw draws (zero unless centered)
    std::shared_ptr<const DataMoments> moments;

    std::size_t size() const noexcept { return samples.rows(); }
    std::size_t dim() const noexcept { return samples.cols(); }
};

/// Wraps samples; when `center` is set, subtracts the empirical mean.
/// Moments are tabulated up to `moment_order`.
Dataset make_dataset(Mat64 samples, bool center, int moment_order = 4);

/// n draws: a component by weight, then its Gaussian. Row i uses
/// split_stream(rng, i).
Dataset mixture_sample(const GaussianMixture& gm, const RngStream& rng, std::size_t n,
                       bool center = false, int moment_order = 4);

/// Component with the largest responsibility, per row.
std::vector<std::size_t> assign_components(const GaussianMixture& gm, const Mat64& points);
/// Share of rows assigned to each component.
Vec64 component_fractions(const GaussianMixture& gm, const Mat64& points);

/// Mean over rows of ‖s_θ(x) - score(x)‖².
double score_field_mse(const ScoreNetwork& net, const GaussianMixture& gm, const Mat64& points);

} // namespace tcv
