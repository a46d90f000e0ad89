// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <json.hpp>
#include <sstream>
#include <vector>

#include "support.hpp"
#include "tcv/dsm/loss.hpp"
#include "tcv/dsm/optimizer.hpp"
#include "tcv/dsm/schedule.hpp"
#include "tcv/dsm/train.hpp"
#include "tcv/ndcore/errors.hpp"

using namespace tcv;
using tcv::testing::affine_network;
using tcv::testing::mean_se;
using tcv::testing::mlp;
using tcv::testing::random_network;
using tcv::testing::rel_close;
using tcv::testing::within_se;

namespace {

Mat64 gaussian_data(std::size_t n, std::uint64_t seed) {
    RngStream rng(seed);
    Mat64 m(n, 2);
    for (auto& v : m.data()) {
        v = 1.5 * rng.gaussian();
    }
    return m;
}

} // namespace

TEST_CASE("dsm_loss examples") {
    MlpConfig c = mlp(2, {4});
    const ScoreNetwork zero(c, std::vector<double>(parameter_count(c), 0.0));
    CHECK(dsm_loss(zero, Vec64{1, 1}, Vec64{3, 4}, 1.0) == 12.5);
    CHECK(dsm_loss(zero, Vec64{1, 1}, Vec64{3, 4}, 2.0) == 3.125);
    // s ≡ -z/σ with z = 1, σ = 2
    const ScoreNetwork denoiser = affine_network(1, {0.0}, {-0.5});
    CHECK(dsm_loss(denoiser, Vec64{0.7}, Vec64{1.0}, 2.0) == 0.0);
    CHECK_THROWS_AS(dsm_loss(zero, Vec64{1, 1}, Vec64{3, 4}, 0.0), ValidationError);
}

TEST_CASE("tape loss equals the plain loss and differentiates correctly") {
    const ScoreNetwork net = random_network(mlp(2, {16, 16}), 3);
    const Vec64 x = {0.3, -0.4};
    const Vec64 z = {1.1, 0.2};
    const double sigma = 0.7;
    Tape tape(net.view());
    const NodeId l = record_dsm_loss(tape, x, z, sigma);
    tape.forward();
    CHECK(tape.scalar(l) == dsm_loss(net, x, z, sigma));
    const Vec64 g = tape.backward(l);
    RngStream rng(4);
    for (int d = 0; d < 10; ++d) {
        const Vec64 v = gaussian_sample(rng, net.param_count());
        ScoreNetwork plus = net;
        ScoreNetwork minus = net;
        for (std::size_t p = 0; p < v.size(); ++p) {
            plus.mutable_theta()[p] += 1e-5 * v[p];
            minus.mutable_theta()[p] -= 1e-5 * v[p];
        }
        const double fd = (dsm_loss(plus, x, z, sigma) - dsm_loss(minus, x, z, sigma)) / 2e-5;
        CHECK(rel_close(dot(g, v), fd, 1e-6, 1e-9));
    }
}

TEST_CASE("make_schedule") {
    const NoiseSchedule s = make_schedule(0.1, 10.0, 3);
    CHECK(s.levels[0] == 0.1);
    CHECK(s.levels[1] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(s.levels[2] == 10.0);
    CHECK_THROWS_AS(make_schedule(1.0, 1.0, 3), ValidationError);
    CHECK_THROWS_AS(make_schedule(2.0, 1.0, 3), ValidationError);
    CHECK_THROWS_AS(make_schedule(0.0, 1.0, 3), ValidationError);
    CHECK_THROWS_AS(make_schedule(0.1, 1.0, 1), ValidationError);

    const NoiseSchedule t = make_schedule(0.01, 1.0, 10);
    const double r = t.levels[1] / t.levels[0];
    for (std::size_t i = 1; i < t.size(); ++i) {
        CHECK(t.levels[i] > t.levels[i - 1]);
        CHECK(rel_close(t.levels[i] / t.levels[i - 1], r, 1e-12));
    }
}

TEST_CASE("sgd and adam updates") {
    OptimizerState sgd({OptimizerKind::sgd, 0.5}, 1);
    std::vector<double> theta = {1.0};
    sgd_update(sgd, theta, std::vector<double>{2.0});
    CHECK(theta[0] == 0.0);
    CHECK(sgd.step == 1);

    OptimizerState adam({OptimizerKind::adam, 0.01}, 2);
    theta = {1.0, 1.0};
    adam_update(adam, theta, std::vector<double>{3.0, -0.02});
    CHECK(theta[0] == doctest::Approx(0.99).epsilon(1e-9));
    CHECK(theta[1] == doctest::Approx(1.01).epsilon(1e-6));

    OptimizerState idle({OptimizerKind::adam, 0.01}, 2);
    theta = {0.5, -0.5};
    for (int i = 0; i < 100; ++i) {
        adam_update(idle, theta, std::vector<double>{0.0, 0.0});
    }
    CHECK(theta == std::vector<double>{0.5, -0.5});
    CHECK(idle.step == 100);
    CHECK_THROWS_AS(parse_optimizer("rmsprop"), ValidationError);
}

TEST_CASE("sgd descends a one-parameter quadratic") {
    OptimizerState s({OptimizerKind::sgd, 0.1}, 1);
    std::vector<double> theta = {5.0};
    for (int i = 0; i < 5; ++i) {
        const double before = theta[0];
        const double g = 2.0 * (theta[0] - 3.0);
        sgd_update(s, theta, std::vector<double>{g});
        CHECK((theta[0] - before) * g < 0.0);
    }
}

TEST_CASE("train_step moves against the batch gradient") {
    ScoreNetwork net = random_network(mlp(2, {8}), 5);
    const Mat64 batch = gaussian_data(10, 6);
    const NoiseSchedule sched = make_schedule(0.1, 1.0, 4);
    const BatchStats stats = batch_statistics(net, batch, RngStream(7), sched, nullptr);
    const std::vector<double> before(net.theta().begin(), net.theta().end());
    OptimizerState opt({OptimizerKind::sgd, 0.1}, net.param_count());
    const StepMetrics m = train_step(net, batch, RngStream(7), sched, opt, nullptr, nullptr);
    for (std::size_t j = 0; j < before.size(); ++j) {
        CHECK(net.theta()[j] - before[j] == doctest::Approx(-0.1 * stats.sum_g[j] / 10.0).epsilon(1e-12));
    }
    CHECK(std::isnan(m.rho_g_batch));
    std::size_t total = 0;
    for (auto h : m.sigma_histogram) {
        total += h;
    }
    CHECK(total == 10);
}

TEST_CASE("beta = 0 with a control variate is bit-identical to no control variate") {
    const Mat64 data = gaussian_data(200, 8);
    for (auto kind : {OptimizerKind::sgd, OptimizerKind::adam}) {
        TrainConfig cfg;
        cfg.batch_size = 10;
        cfg.steps = 5;
        cfg.seed = 9;
        cfg.optimizer = {kind, 1e-2};
        ScoreNetwork a = random_network(mlp(2, {8, 8}), 10);
        ScoreNetwork b = a;
        train(a, data, cfg, nullptr);
        TrainConfig cfg_cv = cfg;
        cfg_cv.use_cv = true;
        cfg_cv.cv = {Regime::small_sigma, 2, CvTarget::gradient};
        cfg_cv.beta_mode = BetaMode::fixed;
        cfg_cv.beta_fixed = 0.0;
        const ControlVariate cv(cfg_cv.cv, 2);
        train(b, data, cfg_cv, &cv);
        CHECK(std::equal(a.theta().begin(), a.theta().end(), b.theta().begin()));
    }
}

TEST_CASE("controlled gradient is unbiased for frozen theta and fixed beta") {
    const ScoreNetwork net = random_network(mlp(2, {8, 8}), 11);
    const Mat64 data = gaussian_data(1000, 12);
    const NoiseSchedule sched = make_schedule(0.01, 1.0, 10);
    const ControlVariate cv({Regime::small_sigma, 1, CvTarget::gradient}, 2);
    const std::size_t steps = 2000;
    const std::size_t b = 10;
    std::vector<std::vector<double>> diff(20, std::vector<double>(steps));
    std::vector<std::size_t> coords(20);
    for (std::size_t c = 0; c < coords.size(); ++c) {
        coords[c] = (c * 37) % net.param_count();
    }
    for (std::size_t s = 0; s < steps; ++s) {
        const RngStream st = step_stream(13, s);
        const Mat64 batch = draw_batch(data, b, split_stream(st, 0));
        const BatchStats stats = batch_statistics(net, batch, split_stream(st, 1), sched, &cv);
        for (std::size_t c = 0; c < coords.size(); ++c) {
            // controlled - raw with β = 0.8
            diff[c][s] = -0.8 * stats.sum_c[coords[c]] / static_cast<double>(b);
        }
    }
    for (auto& d : diff) {
        CHECK(within_se(mean_se(d), 0.0));
    }
}

TEST_CASE("training is deterministic, thread-count independent and logs JSON lines") {
    const Mat64 data = gaussian_data(100, 14);
    TrainConfig cfg;
    cfg.batch_size = 20;
    cfg.steps = 3;
    cfg.seed = 15;
    cfg.use_cv = true;
    cfg.cv = {Regime::small_sigma, 1, CvTarget::gradient};
    const ControlVariate cv(cfg.cv, 2);
    ScoreNetwork a = random_network(mlp(2, {8}), 16);
    ScoreNetwork b = a;
    ScoreNetwork c = a;
    std::ostringstream la;
    std::ostringstream lb;
    train(a, data, cfg, &cv, &la);
    train(b, data, cfg, &cv, &lb);
    cfg.threads = 3;
    train(c, data, cfg, &cv);
    CHECK(la.str() == lb.str());
    CHECK(std::equal(a.theta().begin(), a.theta().end(), b.theta().begin()));
    CHECK(std::equal(a.theta().begin(), a.theta().end(), c.theta().begin()));

    std::istringstream in(la.str());
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        for (const char* key : {"step", "loss_mean", "grad_norm", "rho_g_batch", "beta_norm", "sigma_histogram"}) {
            CHECK(j.contains(key));
        }
        ++lines;
    }
    CHECK(lines == 3);
}

TEST_CASE("ema beta is zero on the first step and the ratio is reported") {
    ScoreNetwork net = random_network(mlp(2, {8}), 17);
    const Mat64 data = gaussian_data(100, 18);
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.steps = 3;
    cfg.use_cv = true;
    cfg.cv = {Regime::small_sigma, 1, CvTarget::gradient};
    const ControlVariate cv(cfg.cv, 2);
    const auto m = train(net, data, cfg, &cv);
    CHECK(m[0].beta_norm == 0.0);
    CHECK(m[0].rho_g_batch == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(m[1].beta_norm > 0.0);
    CHECK(m[1].rho_g_batch >= 0.0);
}

TEST_CASE("spectral projection holds after every step") {
    MlpConfig c = mlp(2, {16, 16});
    c.spectral_norm = true;
    ScoreNetwork net = spectral_normalize(random_network(c, 19), 1000);
    const Mat64 data = gaussian_data(100, 20);
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.steps = 5;
    cfg.optimizer = {OptimizerKind::sgd, 0.5};
    train(net, data, cfg, nullptr);
    for (std::size_t l = 0; l < net.layout().layers.size(); ++l) {
        CHECK(spectral_norm_estimate(net.weight(l)) <= 1.0 + 1e-6);
    }
}

TEST_CASE("non-finite gradients abort with diagnostics") {
    ScoreNetwork net = random_network(mlp(2, {4}), 21);
    Mat64 batch(2, 2, 1e308);
    const NoiseSchedule sched = make_schedule(0.1, 1.0, 2);
    OptimizerState opt({OptimizerKind::sgd, 0.1}, net.param_count());
    net.mutable_theta()[net.layout().layers[1].bias_offset] = 1e308;
    CHECK_THROWS_AS(train_step(net, batch, RngStream(1), sched, opt, nullptr, nullptr), NumericalError);
}
