// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <array>
#include <cmath>
#include <limits>
#include <string>

#include "support.hpp"
#include "tcv/autodiff/activation.hpp"
#include "tcv/autodiff/jet.hpp"
#include "tcv/autodiff/tape.hpp"
#include "tcv/ndcore/errors.hpp"
#include "tcv/scorenet/network.hpp"

using namespace tcv;
using tcv::testing::affine_network;
using tcv::testing::mlp;
using tcv::testing::random_network;
using tcv::testing::rel_close;

namespace {

double scalar_readout(const ScoreNetwork& net, std::span<const double> x, std::span<const double> r) {
    const Vec64 s = net.evaluate(x);
    double acc = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        acc += s[i] * r[i];
    }
    return acc;
}

// Σ_i r_i · (every entry of the jet), a generic scalar functional F(s, ∂s, ∂²s).
NodeId jet_functional(Tape& tape, const JetNodes& jet, RngStream rng) {
    std::vector<NodeId> parts;
    std::vector<double> ones;
    auto add = [&](NodeId n) {
        const Vec64 r = gaussian_sample(rng, tape.size(n));
        parts.push_back(tape.dot(tape.constant(r), n));
        ones.push_back(1.0);
    };
    add(jet.value);
    for (NodeId n : jet.first) {
        add(n);
    }
    for (std::size_t i = 0; i < jet.dim; ++i) {
        for (std::size_t j = i; j < jet.dim && !jet.second.empty(); ++j) {
            add(jet.second[i * jet.dim + j]);
        }
    }
    // a product term so F is not linear in the jet
    parts.push_back(tape.dot(jet.value, jet.value));
    ones.push_back(0.3);
    return tape.combine(parts, ones);
}

double functional_value(const ScoreNetwork& net, std::span<const double> x, int order,
                        std::uint64_t seed) {
    Tape tape(net.view());
    const JetNodes jet = input_jet(tape, x, order);
    const NodeId f = jet_functional(tape, jet, RngStream(seed));
    tape.forward();
    return tape.scalar(f);
}

} // namespace

TEST_CASE("activation derivatives agree with finite differences on [-4, 4]") {
    const double h = 1e-5;
    for (auto kind : {ActivationKind::tanh, ActivationKind::softplus, ActivationKind::relu}) {
        const ActivationFamily act(kind);
        for (int m = 1; m <= 3; ++m) {
            for (double a = -4.0; a <= 4.0; a += 0.0625) {
                if (kind == ActivationKind::relu && std::abs(a) < 2 * h) {
                    continue;
                }
                const double fd = (act.derivative(a + h, m - 1) - act.derivative(a - h, m - 1)) / (2 * h);
                const double an = act.derivative(a, m);
                CHECK_MESSAGE(rel_close(an, fd, 1e-6, 1e-9), act.name(), " m=", m, " a=", a);
            }
        }
    }
}

TEST_CASE("activation parse and names") {
    CHECK(ActivationFamily::parse("tanh").kind() == ActivationKind::tanh);
    CHECK(ActivationFamily::parse("softplus").kind() == ActivationKind::softplus);
    CHECK(ActivationFamily::parse("relu").kind() == ActivationKind::relu);
    CHECK_THROWS_AS(ActivationFamily::parse("gelu"), ValidationError);
}

TEST_CASE("forward: identity affine, tanh at 0, softplus at 0") {
    const ScoreNetwork id = affine_network(2, {1, 0, 0, 1}, {0, 0});
    const Vec64 x = {1, 2};
    CHECK(id.evaluate(x) == Vec64{1, 2});

    const ActivationFamily tanh_act(ActivationKind::tanh);
    const ActivationFamily sp(ActivationKind::softplus);
    CHECK(tanh_act.derivative(0.0, 0) == 0.0);
    CHECK(sp.derivative(0.0, 0) == doctest::Approx(0.6931471805599453).epsilon(1e-15));
}

TEST_CASE("forward reports the first non-finite node") {
    const ScoreNetwork net = affine_network(1, {1}, {0});
    Tape tape(net.view());
    const double bad[1] = {std::numeric_limits<double>::quiet_NaN()};
    const NodeId c = tape.constant(bad);
    tape.affine(0, c, true);
    try {
        tape.forward();
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(std::string(e.what()).find("node 0") != std::string::npos);
    }
}

TEST_CASE("backward: y = w x gives dy/dw = x") {
    const ScoreNetwork net = affine_network(1, {2.0}, {0.5});
    Tape tape(net.view());
    const JetNodes jet = input_jet(tape, Vec64{3.0}, 0);
    const NodeId e = tape.constant(Vec64{1.0});
    const NodeId y = tape.dot(jet.value, e);
    tape.forward();
    const Vec64 g = tape.backward(y);
    CHECK(g[0] == 3.0);
    CHECK(g[1] == 1.0);
}

TEST_CASE("backward: y = tanh(w x) at w = 0, x = 5 gives 5") {
    // one hidden unit, identity readout
    ScoreNetwork net(mlp(1, {1}), {0.0, 0.0, 1.0, 0.0});
    Tape tape(net.view());
    const JetNodes jet = input_jet(tape, Vec64{5.0}, 0);
    const NodeId y = tape.dot(jet.value, tape.constant(Vec64{1.0}));
    tape.forward();
    const Vec64 g = tape.backward(y);
    CHECK(g[0] == doctest::Approx(5.0).epsilon(1e-15));
}

TEST_CASE("backward of a non-scalar node is a contract violation") {
    const ScoreNetwork net = random_network(mlp(2, {4}), 1);
    Tape tape(net.view());
    const JetNodes jet = input_jet(tape, Vec64{0.1, 0.2}, 0);
    tape.forward();
    CHECK_THROWS_AS(tape.backward(jet.value), ContractViolation);
}

TEST_CASE("backward matches directional finite differences on a 2-layer tanh MLP") {
    ScoreNetwork net = random_network(mlp(2, {16, 16}), 11);
    const Vec64 x = {0.3, -0.7};
    const Vec64 r = {0.8, -1.1};
    Tape tape(net.view());
    const JetNodes jet = input_jet(tape, x, 0);
    const NodeId y = tape.dot(jet.value, tape.constant(r));
    tape.forward();
    const Vec64 g = tape.backward(y);

    RngStream rng(5);
    const double h = 1e-5;
    for (int dir = 0; dir < 20; ++dir) {
        const Vec64 v = gaussian_sample(rng, net.param_count());
        ScoreNetwork plus = net;
        ScoreNetwork minus = net;
        for (std::size_t p = 0; p < v.size(); ++p) {
            plus.mutable_theta()[p] += h * v[p];
            minus.mutable_theta()[p] -= h * v[p];
        }
        const double fd = (scalar_readout(plus, x, r) - scalar_readout(minus, x, r)) / (2 * h);
        CHECK(rel_close(dot(g, v), fd, 1e-6, 1e-9));
    }
}

TEST_CASE("input_jet of a linear network: ds = W, d2s = 0") {
    const ScoreNetwork net = affine_network(2, {1.5, -2.0, 0.25, 3.0}, {0.1, 0.2});
    const JetValues jet = evaluate_jet(net.view(), Vec64{0.4, -0.9}, 1);
    // first[i] holds column i of W
    CHECK(jet.first[0] == Vec64{1.5, 0.25});
    CHECK(jet.first[1] == Vec64{-2.0, 3.0});

    const JetValues j2 = evaluate_jet(net.view(), Vec64{0.4, -0.9}, 2);
    for (const auto& h : j2.second) {
        CHECK(h == Vec64{0.0, 0.0});
    }
}

TEST_CASE("input_jet of a zero-weight network is zero") {
    MlpConfig c = mlp(2, {8, 8});
    const ScoreNetwork net(c, std::vector<double>(parameter_count(c), 0.0));
    const JetValues jet = evaluate_jet(net.view(), Vec64{1.0, 2.0}, 2);
    CHECK(jet.value == Vec64{0.0, 0.0});
    for (const auto& v : jet.first) {
        CHECK(v == Vec64{0.0, 0.0});
    }
    for (const auto& v : jet.second) {
        CHECK(v == Vec64{0.0, 0.0});
    }
}

TEST_CASE("input_jet matches finite differences on a random 2x64 tanh MLP") {
    const ScoreNetwork net = random_network(mlp(2, {64, 64}), 21);
    const Vec64 x = {0.35, -1.2};
    const JetValues jet = evaluate_jet(net.view(), x, 2);
    const double h = 1e-5;
    for (std::size_t i = 0; i < 2; ++i) {
        Vec64 xp = x;
        Vec64 xm = x;
        xp[i] += h;
        xm[i] -= h;
        const Vec64 sp = net.evaluate(xp);
        const Vec64 sm = net.evaluate(xm);
        const JetValues jp = evaluate_jet(net.view(), xp, 1);
        const JetValues jm = evaluate_jet(net.view(), xm, 1);
        for (std::size_t m = 0; m < 2; ++m) {
            const double fd = (sp[m] - sm[m]) / (2 * h);
            CHECK(rel_close(jet.first[i][m], fd, 1e-6, 1e-9));
            for (std::size_t j = 0; j < 2; ++j) {
                const double fd2 = (jp.first[j][m] - jm.first[j][m]) / (2 * h);
                CHECK(rel_close(jet.second[i * 2 + j][m], fd2, 1e-4, 1e-7));
            }
        }
    }
}

TEST_CASE("Hessian slices are symmetric") {
    const ScoreNetwork net = random_network(mlp(3, {32, 32}, ActivationKind::softplus), 8);
    const JetValues jet = evaluate_jet(net.view(), Vec64{0.1, 0.5, -0.3}, 2);
    for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) {
            for (std::size_t m = 0; m < 3; ++m) {
                CHECK(std::abs(jet.second[i * 3 + j][m] - jet.second[j * 3 + i][m]) <= 1e-12);
            }
        }
    }
}

TEST_CASE("relu jets of order 2 are rejected") {
    const ScoreNetwork net = random_network(mlp(2, {8}, ActivationKind::relu), 2);
    Tape tape(net.view());
    CHECK_THROWS_AS(input_jet(tape, Vec64{0.1, 0.2}, 2), ValidationError);
    CHECK_NOTHROW(input_jet(tape, Vec64{0.1, 0.2}, 1));
}

TEST_CASE("reverse over jet matches finite differences in theta") {
    for (auto kind : {ActivationKind::tanh, ActivationKind::softplus}) {
        const ScoreNetwork net = random_network(mlp(2, {24, 24}, kind), 31);
        const Vec64 x = {0.7, 0.2};
        Tape tape(net.view());
        const JetNodes jet = input_jet(tape, x, 2);
        const NodeId f = jet_functional(tape, jet, RngStream(123));
        tape.forward();
        const Vec64 g = tape.backward(f);

        RngStream rng(6);
        const double h = 1e-5;
        for (int dir = 0; dir < 20; ++dir) {
            const Vec64 v = gaussian_sample(rng, net.param_count());
            ScoreNetwork plus = net;
            ScoreNetwork minus = net;
            for (std::size_t p = 0; p < v.size(); ++p) {
                plus.mutable_theta()[p] += h * v[p];
                minus.mutable_theta()[p] -= h * v[p];
            }
            const double fd =
                (functional_value(plus, x, 2, 123) - functional_value(minus, x, 2, 123)) / (2 * h);
            CHECK(rel_close(dot(g, v), fd, 1e-4, 1e-7));
        }
    }
}

TEST_CASE("forward and backward are pure") {
    const ScoreNetwork net = random_network(mlp(2, {16, 16}), 41);
    auto run = [&] {
        Tape tape(net.view());
        const JetNodes jet = input_jet(tape, Vec64{0.2, 0.9}, 2);
        const NodeId f = jet_functional(tape, jet, RngStream(1));
        tape.forward();
        Vec64 g = tape.backward(f);
        g.push_back(tape.scalar(f));
        return g;
    };
    CHECK(run() == run());
}

TEST_CASE("tape forward equals ScoreNetwork::evaluate bit-exactly") {
    const ScoreNetwork net = random_network(mlp(2, {128, 128}), 3);
    RngStream rng(4);
    for (int i = 0; i < 50; ++i) {
        const Vec64 x = gaussian_sample(rng, 2);
        const JetValues jet = evaluate_jet(net.view(), x, 0);
        CHECK(jet.value == net.evaluate(x));
    }
}
