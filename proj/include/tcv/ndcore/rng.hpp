// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Counter-based random numbers (Philox4x32-10) with splittable streams.
//
// A draw is a pure function of (master_seed, stream_id, counter), so streams
// can be handed to workers and split without any shared state.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tcv {

using Vec64 = std::vector<double>;

class RngStream {
public:
    RngStream() = default;
    explicit RngStream(std::uint64_t master_seed, std::uint64_t stream_id = 0,
                       std::uint64_t counter = 0) noexcept
        : master_seed_(master_seed), stream_id_(stream_id), counter_(counter) {}

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }
    std::uint64_t counter() const noexcept { return counter_; }

    std::uint64_t next_u64() noexcept;

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;

    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t uniform_index(std::uint64_t n) noexcept;

    /// One standard normal variate (Marsaglia polar method, portable log).
    double gaussian() noexcept;

    /// Fill `out` with i.i.d. standard normals. Pairs from the polar method are
    /// consumed in order; an odd tail discards the spare.
    void gaussian_fill(std::span<double> out) noexcept;

    bool operator==(const RngStream&) const = default;

private:
    std::uint64_t master_seed_ = 0;
    std::uint64_t stream_id_ = 0;
    std::uint64_t counter_ = 0;
};

/// d i.i.d. standard normals; advances `rng`.
Vec64 gaussian_sample(RngStream& rng, std::size_t d);

/// Child stream keyed by (parent stream id, task id). The parent is not advanced.
RngStream split_stream(const RngStream& rng, std::uint64_t task_id) noexcept;

/// Natural log evaluated with only IEEE basic operations, so results do not
/// depend on the platform libm. Requires x > 0 and finite.
double portable_log(double x) noexcept;

/// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

} // namespace tcv
