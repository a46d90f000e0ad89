// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <filesystem>

#include "support.hpp"
#include "tcv/ndcore/errors.hpp"
#include "tcv/scorenet/checkpoint.hpp"
#include "tcv/scorenet/network.hpp"

using namespace tcv;
using tcv::testing::affine_network;
using tcv::testing::mlp;
using tcv::testing::random_network;

namespace {

double svd_max(MatView w) {
    Eigen::MatrixXd m(w.rows, w.cols);
    for (std::size_t r = 0; r < w.rows; ++r) {
        for (std::size_t c = 0; c < w.cols; ++c) {
            m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w(r, c);
        }
    }
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    return svd.singularValues()(0);
}

} // namespace

TEST_CASE("default config has 17154 parameters") {
    MlpConfig c;
    CHECK(parameter_count(c) == 2 * 128 + 128 + 128 * 128 + 128 + 128 * 2 + 2);
    CHECK(parameter_count(c) == 17154);
}

TEST_CASE("init is deterministic with zero biases and 1/sqrt(fan_in) scale") {
    MlpConfig c;
    const ScoreNetwork a = init_network(c, RngStream(7));
    const ScoreNetwork b = init_network(c, RngStream(7));
    CHECK(std::equal(a.theta().begin(), a.theta().end(), b.theta().begin()));
    for (std::size_t l = 0; l < a.layout().layers.size(); ++l) {
        for (double v : a.bias(l)) {
            CHECK(v == 0.0);
        }
    }
    // second layer: 128 x 128 weights with variance 1/128
    const MatView w = a.weight(1);
    double ss = 0.0;
    for (std::size_t i = 0; i < w.rows * w.cols; ++i) {
        ss += w.data[i] * w.data[i];
    }
    CHECK(ss / (w.rows * w.cols) == doctest::Approx(1.0 / 128).epsilon(0.05));
}

TEST_CASE("ScoreNetwork validates its parameter vector") {
    MlpConfig c = mlp(2, {4});
    CHECK_THROWS_AS(ScoreNetwork(c, std::vector<double>(3, 0.0)), ValidationError);
    std::vector<double> t(parameter_count(c), 0.0);
    t[0] = std::nan("");
    CHECK_THROWS_AS(ScoreNetwork(c, t), ValidationError);
    MlpConfig bad = mlp(2, {0});
    CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("spectral_normalize: diag(3,1) -> diag(1,1/3)") {
    const ScoreNetwork net = affine_network(2, {3, 0, 0, 1}, {0, 0});
    const ScoreNetwork n = spectral_normalize(net, 1000);
    const MatView w = n.weight(0);
    CHECK(w(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(w(1, 1) == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
    CHECK(w(0, 1) == 0.0);
}

TEST_CASE("spectral_normalize leaves the identity and zero matrices unchanged") {
    const ScoreNetwork id = affine_network(2, {1, 0, 0, 1}, {0, 0});
    const ScoreNetwork n = spectral_normalize(id, 1000);
    CHECK(n.weight(0)(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(n.weight(0)(1, 1) == doctest::Approx(1.0).epsilon(1e-12));
    const ScoreNetwork zero = affine_network(2, {0, 0, 0, 0}, {1, 1});
    const ScoreNetwork z = spectral_normalize(zero, 10);
    CHECK(std::equal(z.theta().begin(), z.theta().end(), zero.theta().begin()));
    CHECK_THROWS_AS(spectral_normalize(id, 0), ValidationError);
}

TEST_CASE("spectral_normalize of a random 64x64 matrix against an SVD oracle") {
    MlpConfig c = mlp(64, {});
    const ScoreNetwork net = init_network(c, RngStream(12));
    CHECK(svd_max(net.weight(0)) > 1.5);
    const ScoreNetwork n = spectral_normalize(net, 1000);
    CHECK(std::abs(svd_max(n.weight(0)) - 1.0) <= 1e-5);
    CHECK(svd_max(n.weight(0)) <= 1.0 + 1e-6);
}

TEST_CASE("spectrally normalized tanh network is 1-Lipschitz") {
    MlpConfig c = mlp(2, {32, 32});
    c.spectral_norm = true;
    const ScoreNetwork net = spectral_normalize(random_network(c, 5, 3.0), 1000);
    RngStream rng(1);
    for (int i = 0; i < 10000; ++i) {
        const Vec64 x = gaussian_sample(rng, 2);
        const Vec64 y = gaussian_sample(rng, 2);
        const Vec64 sx = net.evaluate(x);
        const Vec64 sy = net.evaluate(y);
        const double ds = std::hypot(sx[0] - sy[0], sx[1] - sy[1]);
        const double dx = std::hypot(x[0] - y[0], x[1] - y[1]);
        CHECK(ds <= dx * (1 + 1e-4));
    }
}

TEST_CASE("param_count_plan") {
    const ParamPlan p = param_count_plan(17154, 2, 2);
    CHECK(p.width == 128);
    CHECK(p.realized_count == 17154);
    CHECK(p.config.hidden_widths == std::vector<std::size_t>{128, 128});

    // depth 1: 2W + W + 2W + 2 = 5W + 2
    const ParamPlan one = param_count_plan(5002, 1, 2);
    CHECK(one.width == 1000);
    CHECK(one.realized_count == 5002);

    for (std::size_t depth = 1; depth <= 8; ++depth) {
        const ParamPlan q = param_count_plan(17000, depth, 2);
        CHECK(std::abs(static_cast<double>(q.realized_count) - 17000.0) <= 0.03 * 17000.0);
        CHECK(parameter_count(q.config) == q.realized_count);
    }
    CHECK_THROWS_AS(param_count_plan(5, 3, 2), ValidationError);
}

TEST_CASE("checkpoint round trip is exact") {
    const ScoreNetwork net = random_network(mlp(2, {8, 4}, ActivationKind::softplus), 17);
    const ScoreNetwork back = checkpoint_from_json(checkpoint_to_json(net));
    CHECK(back.config() == net.config());
    CHECK(std::equal(back.theta().begin(), back.theta().end(), net.theta().begin()));

    const auto path = std::filesystem::temp_directory_path() / "tcv_ckpt_test.json";
    save_checkpoint(net, path);
    const ScoreNetwork loaded = load_checkpoint(path);
    CHECK(std::equal(loaded.theta().begin(), loaded.theta().end(), net.theta().begin()));
    std::filesystem::remove(path);
    CHECK_THROWS_AS(checkpoint_from_json("{\"config\": 3}"), ValidationError);
}
