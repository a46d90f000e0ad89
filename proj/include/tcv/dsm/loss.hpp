// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "tcv/autodiff/tape.hpp"
#include "tcv/scorenet/network.hpp"

namespace tcv {

/// λ(σ) = σ^power. The default power 2 makes λ(σ)L = ½‖z + σ s‖².
double loss_weight(double sigma, double power = 2.0);

/// x + σz
Vec64 perturb(std::span<const double> x, std::span<const double> z, double sigma);

/// ½‖z/σ + s_θ(x + σz)‖²
double dsm_loss(const ScoreNetwork& net, std::span<const double> x, std::span<const double> z,
                double sigma);

/// Same value recorded on a tape, so backward() gives ∂_θL.
NodeId record_dsm_loss(Tape& tape, std::span<const double> x, std::span<const double> z,
                       double sigma);

} // namespace tcv
