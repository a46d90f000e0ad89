// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "support.hpp"
#include "tcv/ndcore/errors.hpp"
#include "tcv/ndcore/linalg.hpp"
#include "tcv/ndcore/parallel.hpp"
#include "tcv/ndcore/rng.hpp"

using namespace tcv;
using tcv::testing::mean_se;

TEST_CASE("gaussian_sample is a pure function of the stream state") {
    RngStream a(1, 0, 0);
    RngStream b(1, 0, 0);
    const Vec64 x = gaussian_sample(a, 2);
    const Vec64 y = gaussian_sample(b, 2);
    CHECK(x == y);
    CHECK(a == b);
    CHECK(a.counter() > 0);
    const Vec64 next = gaussian_sample(a, 2);
    CHECK(next != x);
}

TEST_CASE("gaussian_sample moments over 1e6 draws") {
    RngStream rng(1234);
    const std::size_t n = 1'000'000;
    const Vec64 z = gaussian_sample(rng, n);
    double m1 = 0.0;
    double m2 = 0.0;
    double m4 = 0.0;
    for (double v : z) {
        m1 += v;
        m2 += v * v;
        m4 += v * v * v * v;
    }
    m1 /= n;
    m2 /= n;
    m4 /= n;
    CHECK(std::abs(m1) <= 0.005);
    CHECK(std::abs(m2 - m1 * m1 - 1.0) <= 0.01);
    CHECK(std::abs(m4 - 3.0) <= 0.05);
}

TEST_CASE("uniform draws lie in [0, 1) and uniform_index in range") {
    RngStream rng(5);
    for (int i = 0; i < 10000; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        CHECK(rng.uniform_index(7) < 7);
    }
}

TEST_CASE("split_stream determinism and distinctness") {
    const RngStream parent(42, 3, 17);
    RngStream c0 = split_stream(parent, 0);
    RngStream c1 = split_stream(parent, 1);
    RngStream c7a = split_stream(parent, 7);
    RngStream c7b = split_stream(parent, 7);
    CHECK(parent == RngStream(42, 3, 17));
    CHECK(c7a == c7b);
    CHECK(gaussian_sample(c7a, 8) == gaussian_sample(c7b, 8));
    CHECK(gaussian_sample(c0, 8) != gaussian_sample(c1, 8));
}

TEST_CASE("split children are uncorrelated") {
    const RngStream parent(9);
    RngStream a = split_stream(parent, 0);
    RngStream b = split_stream(parent, 1);
    const std::size_t n = 100'000;
    const Vec64 x = gaussian_sample(a, n);
    const Vec64 y = gaussian_sample(b, n);
    double sxy = 0.0;
    double sxx = 0.0;
    double syy = 0.0;
    const double mx = mean_se(x).mean;
    const double my = mean_se(y).mean;
    for (std::size_t i = 0; i < n; ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    CHECK(std::abs(sxy / std::sqrt(sxx * syy)) <= 0.01);
}

TEST_CASE("portable_log agrees with std::log") {
    RngStream rng(3);
    for (int i = 0; i < 10000; ++i) {
        const double x = std::exp(40.0 * (rng.uniform() - 0.5));
        CHECK(std::abs(portable_log(x) - std::log(x)) <= 4e-16 * std::max(1.0, std::abs(std::log(x))));
    }
    CHECK(portable_log(1.0) == 0.0);
}

TEST_CASE("gemv and gemm associativity (AB)x = A(Bx)") {
    RngStream rng(77);
    for (int trial = 0; trial < 5; ++trial) {
        const Mat64 a = random_gaussian_matrix(32, 32, rng);
        const Mat64 b = random_gaussian_matrix(32, 32, rng);
        const Vec64 x = gaussian_sample(rng, 32);
        Vec64 bx(32);
        Vec64 abx(32);
        Vec64 ab_x(32);
        gemv(view(b), x, bx);
        gemv(view(a), bx, abx);
        gemv(view(gemm(a, b)), x, ab_x);
        for (std::size_t i = 0; i < 32; ++i) {
            CHECK(tcv::testing::rel_close(abx[i], ab_x[i], 1e-12, 1e-12 * norm2(abx)));
        }
    }
}

TEST_CASE("gemv_t matches gemv of the transpose") {
    RngStream rng(8);
    const Mat64 a = random_gaussian_matrix(5, 3, rng);
    const Vec64 x = gaussian_sample(rng, 5);
    Vec64 y1(3);
    Vec64 y2(3);
    gemv_t(view(a), x, y1);
    gemv(view(transpose(a)), x, y2);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-14));
    }
}

TEST_CASE("pairwise_sum is accurate on ill-conditioned input") {
    std::vector<double> v(1 << 20, 0.1);
    CHECK(std::abs(pairwise_sum(v) - 0.1 * (1 << 20)) < 1e-8);
    CHECK(pairwise_sum(std::vector<double>{}) == 0.0);
}

TEST_CASE("parallel_for visits every index once and rethrows") {
    std::vector<int> hits(1000, 0);
    parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
    for (int h : hits) {
        CHECK(h == 1);
    }
    CHECK_THROWS_AS(parallel_for(10, 2,
                                 [](std::size_t i) {
                                     if (i == 5) {
                                         throw NumericalError("boom");
                                     }
                                 }),
                    NumericalError);
}
