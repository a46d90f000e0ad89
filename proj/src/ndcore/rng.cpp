// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/ndcore/rng.hpp"

#include <array>
#include <cmath>

namespace tcv {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
        mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kPhiloxW0;
        key[1] += kPhiloxW1;
    }
    return ctr;
}

constexpr double kLn2 = 0.6931471805599453094172321;
constexpr double kSqrtHalf = 0.7071067811865475244008444;

} // namespace

std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

std::uint64_t RngStream::next_u64() noexcept {
    const std::array<std::uint32_t, 4> ctr = {
        static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32),
        static_cast<std::uint32_t>(stream_id_), static_cast<std::uint32_t>(stream_id_ >> 32)};
    const std::array<std::uint32_t, 2> key = {static_cast<std::uint32_t>(master_seed_),
                                              static_cast<std::uint32_t>(master_seed_ >> 32)};
    ++counter_;
    const auto out = philox4x32_10(ctr, key);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

double RngStream::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t RngStream::uniform_index(std::uint64_t n) noexcept {
    // Lemire's multiply-shift with rejection; unbiased for any n.
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const unsigned __int128 m = static_cast<unsigned __int128>(next_u64()) * n;
        if (static_cast<std::uint64_t>(m) >= threshold) {
            return static_cast<std::uint64_t>(m >> 64);
        }
    }
}

double portable_log(double x) noexcept {
    int e = 0;
    double m = std::frexp(x, &e); // x = m * 2^e, m in [0.5, 1)
    if (m < kSqrtHalf) {
        m *= 2.0;
        --e;
    }
    // log(m) = 2 atanh(t), |t| <= 0.1716
    const double t = (m - 1.0) / (m + 1.0);
    const double t2 = t * t;
    double term = t;
    double sum = 0.0;
    for (int n = 0; n < 12; ++n) {
        sum += term / static_cast<double>(2 * n + 1);
        term *= t2;
    }
    return 2.0 * sum + static_cast<double>(e) * kLn2;
}

namespace {

// One polar-method pair. Only +,*,/ and sqrt (correctly rounded) are used.
void polar_pair(RngStream& rng, double& a, double& b) noexcept {
    for (;;) {
        const double u = 2.0 * rng.uniform() - 1.0;
        const double v = 2.0 * rng.uniform() - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) {
            const double f = std::sqrt(-2.0 * portable_log(s) / s);
            a = u * f;
            b = v * f;
            return;
        }
    }
}

} // namespace

double RngStream::gaussian() noexcept {
    double a, b;
    polar_pair(*this, a, b);
    return a;
}

void RngStream::gaussian_fill(std::span<double> out) noexcept {
    std::size_t i = 0;
    for (; i + 1 < out.size(); i += 2) {
        polar_pair(*this, out[i], out[i + 1]);
    }
    if (i < out.size()) {
        out[i] = gaussian();
    }
}

Vec64 gaussian_sample(RngStream& rng, std::size_t d) {
    Vec64 out(d);
    rng.gaussian_fill(out);
    return out;
}

RngStream split_stream(const RngStream& rng, std::uint64_t task_id) noexcept {
    const std::uint64_t child =
        mix64(mix64(rng.stream_id()) ^ mix64(task_id ^ 0x632BE59BD9B4E019ull));
    return RngStream(rng.master_seed(), child, 0);
}

} // namespace tcv
