// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/autodiff/activation.hpp"

#include <cmath>

#include "tcv/ndcore/errors.hpp"

namespace tcv {
namespace {

double logistic(double a) {
    if (a >= 0.0) {
        return 1.0 / (1.0 + std::exp(-a));
    }
    const double e = std::exp(a);
    return e / (1.0 + e);
}

double softplus(double a) {
    // log(1 + e^a) without overflow
    return a > 0.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

} // namespace

ActivationFamily ActivationFamily::parse(std::string_view name) {
    if (name == "tanh") {
        return ActivationFamily(ActivationKind::tanh);
    }
    if (name == "softplus") {
        return ActivationFamily(ActivationKind::softplus);
    }
    if (name == "relu") {
        return ActivationFamily(ActivationKind::relu);
    }
    throw ValidationError("unknown activation '" + std::string(name) + "'");
}

std::string ActivationFamily::name() const {
    switch (kind_) {
    case ActivationKind::tanh:
        return "tanh";
    case ActivationKind::softplus:
        return "softplus";
    case ActivationKind::relu:
        return "relu";
    }
    return "?";
}

double ActivationFamily::derivative(double a, int order) const {
    switch (kind_) {
    case ActivationKind::tanh: {
        const double t = std::tanh(a);
        const double sech2 = 1.0 - t * t;
        switch (order) {
        case 0:
            return t;
        case 1:
            return sech2;
        case 2:
            return -2.0 * t * sech2;
        case 3:
            return sech2 * (6.0 * t * t - 2.0);
        }
        break;
    }
    case ActivationKind::softplus: {
        if (order == 0) {
            return softplus(a);
        }
        const double p = logistic(a);
        switch (order) {
        case 1:
            return p;
        case 2:
            return p * (1.0 - p);
        case 3:
            return p * (1.0 - p) * (1.0 - 2.0 * p);
        }
        break;
    }
    case ActivationKind::relu:
        switch (order) {
        case 0:
            return a > 0.0 ? a : 0.0;
        case 1:
            return a > 0.0 ? 1.0 : 0.0;
        case 2:
        case 3:
            return 0.0;
        }
        break;
    }
    throw ContractViolation("activation derivative order out of range");
}

void ActivationFamily::apply(std::span<const double> in, std::span<double> out, int order) const {
    for (std::size_t i = 0; i < in.size(); ++i) {
        out[i] = derivative(in[i], order);
    }
}

} // namespace tcv
