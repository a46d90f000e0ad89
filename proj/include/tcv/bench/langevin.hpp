// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Annealed Langevin sampling from a score field.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>

#include "tcv/bench/mixture.hpp"
#include "tcv/dsm/schedule.hpp"
#include "tcv/ndcore/linalg.hpp"
#include "tcv/ndcore/rng.hpp"
#include "tcv/scorenet/network.hpp"

namespace tcv {

/// Score of the data smoothed at noise level σ, evaluated at x.
using ScoreFn = std::function<Vec64(std::span<const double> x, double sigma)>;

/// s_θ(x); the network ignores σ. The network is copied.
ScoreFn network_score(ScoreNetwork net);
/// Exact score of the mixture convolved with N(0, σ²I).
ScoreFn mixture_score_fn(GaussianMixture gm);

/// Starting law of the chains: mean + L u with u ~ N(0, I) and L lower
/// triangular.
struct LangevinInit {
    Vec64 mean;
    Mat64 chol;
};

/// N(0, σ_max² I).
LangevinInit default_init(std::size_t dim, const NoiseSchedule& schedule);
/// Gaussian with the sample mean and covariance of `data`.
LangevinInit gaussian_fit_init(const Mat64& data);

/// For each level from σ_max down to σ_min, `steps_per_level` updates
///   x <- x + (α/2) s(x, σ_i) + √α u,  α = ε σ_i² / σ_min²,  u ~ N(0, I).
/// Chain i uses split_stream(rng, i). ε = 0 returns the initial points.
Mat64 langevin_sample(const ScoreFn& score, const NoiseSchedule& schedule,
                      std::size_t steps_per_level, double step_size, const RngStream& rng,
                      std::size_t n, const LangevinInit& init, std::size_t threads = 1);

} // namespace tcv
