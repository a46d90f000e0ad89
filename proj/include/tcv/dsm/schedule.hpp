// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

#include "tcv/ndcore/rng.hpp"

namespace tcv {

/// Geometric noise levels σ_i = σ_min (σ_max/σ_min)^{i/(L-1)}, i = 0..L-1.
struct NoiseSchedule {
    double sigma_min = 0.0;
    double sigma_max = 0.0;
    std::vector<double> levels;

    std::size_t size() const noexcept { return levels.size(); }
    /// Uniform level index.
    std::size_t sample_index(RngStream& rng) const;
};

/// Requires 0 < σ_min < σ_max and L >= 2. Endpoints are exact.
NoiseSchedule make_schedule(double sigma_min, double sigma_max, std::size_t levels);

} // namespace tcv
