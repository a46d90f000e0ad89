// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/dsm/loss.hpp"

#include <array>
#include <cmath>

#include "tcv/autodiff/jet.hpp"
#include "tcv/ndcore/errors.hpp"

namespace tcv {

double loss_weight(double sigma, double power) {
    if (power == 2.0) {
        return sigma * sigma;
    }
    return std::pow(sigma, power);
}

Vec64 perturb(std::span<const double> x, std::span<const double> z, double sigma) {
    if (x.size() != z.size()) {
        throw ValidationError("perturb: x and z differ in length");
    }
    Vec64 out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = x[i] + sigma * z[i];
    }
    return out;
}

namespace {

Vec64 scaled_target(std::span<const double> z, double sigma) {
    Vec64 t(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        t[i] = z[i] / sigma;
    }
    return t;
}

} // namespace

double dsm_loss(const ScoreNetwork& net, std::span<const double> x, std::span<const double> z,
                double sigma) {
    require(sigma > 0.0, "dsm_loss: sigma must be positive");
    require(x.size() == net.dim(), "dsm_loss: x has the wrong dimension");
    const Vec64 s = net.evaluate(perturb(x, z, sigma));
    const Vec64 t = scaled_target(z, sigma);
    Vec64 u(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        u[i] = s[i] + t[i];
    }
    return 0.5 * pairwise_dot(u, u);
}

NodeId record_dsm_loss(Tape& tape, std::span<const double> x, std::span<const double> z,
                       double sigma) {
    require(sigma > 0.0, "dsm_loss: sigma must be positive");
    const JetNodes jet = input_jet(tape, perturb(x, z, sigma), 0);
    const NodeId t = tape.constant(scaled_target(z, sigma));
    const std::array<NodeId, 2> parts = {jet.value, t};
    const std::array<double, 2> ones = {1.0, 1.0};
    const NodeId u = tape.combine(parts, ones);
    const NodeId sq = tape.dot(u, u);
    const std::array<NodeId, 1> one = {sq};
    const std::array<double, 1> half = {0.5};
    return tape.combine(one, half);
}

} // namespace tcv
