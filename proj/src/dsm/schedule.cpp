// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/dsm/schedule.hpp"

#include <cmath>

#include "tcv/ndcore/errors.hpp"

namespace tcv {

std::size_t NoiseSchedule::sample_index(RngStream& rng) const {
    if (levels.empty()) {
        throw ContractViolation("NoiseSchedule: no levels");
    }
    return static_cast<std::size_t>(rng.uniform_index(levels.size()));
}

NoiseSchedule make_schedule(double sigma_min, double sigma_max, std::size_t levels) {
    require(std::isfinite(sigma_min) && std::isfinite(sigma_max) && sigma_min > 0.0 &&
                sigma_min < sigma_max,
            "make_schedule: need 0 < sigma_min < sigma_max");
    require(levels >= 2, "make_schedule: need at least two levels");
    NoiseSchedule s;
    s.sigma_min = sigma_min;
    s.sigma_max = sigma_max;
    s.levels.resize(levels);
    const double log_ratio = std::log(sigma_max / sigma_min);
    for (std::size_t i = 0; i < levels; ++i) {
        const double t = static_cast<double>(i) / static_cast<double>(levels - 1);
        s.levels[i] = sigma_min * std::exp(t * log_ratio);
    }
    s.levels.front() = sigma_min;
    s.levels.back() = sigma_max;
    return s;
}

} // namespace tcv
