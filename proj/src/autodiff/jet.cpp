// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/autodiff/jet.hpp"

#include <array>

#include "tcv/ndcore/errors.hpp"

namespace tcv {
namespace {

// Resolves α (|α| <= 2) to the flat (first, second) slot convention.
struct Slot {
    int order = 0;
    std::size_t i = 0;
    std::size_t j = 0;
};

Slot resolve(std::span<const int> alpha, std::size_t dim, int max_order) {
    if (alpha.size() != dim) {
        throw ContractViolation("jet: multi-index length differs from input dimension");
    }
    Slot slot;
    std::array<std::size_t, 2> hits{};
    for (std::size_t d = 0; d < dim; ++d) {
        if (alpha[d] < 0) {
            throw ContractViolation("jet: negative exponent");
        }
        for (int r = 0; r < alpha[d]; ++r) {
            if (slot.order >= 2) {
                throw ContractViolation("jet: derivative order above 2 is not available");
            }
            hits[static_cast<std::size_t>(slot.order++)] = d;
        }
    }
    if (slot.order > max_order) {
        throw ContractViolation("jet: derivative order exceeds the recorded jet order");
    }
    slot.i = hits[0];
    slot.j = hits[1];
    return slot;
}

} // namespace

NodeId JetNodes::derivative(std::span<const int> alpha) const {
    const Slot s = resolve(alpha, dim, order);
    switch (s.order) {
    case 0:
        return value;
    case 1:
        return first[s.i];
    default:
        return second[s.i * dim + s.j];
    }
}

const Vec64& JetValues::derivative(std::span<const int> alpha) const {
    const Slot s = resolve(alpha, dim, order);
    switch (s.order) {
    case 0:
        return value;
    case 1:
        return first[s.i];
    default:
        return second[s.i * dim + s.j];
    }
}

JetNodes input_jet(Tape& tape, std::span<const double> x, int max_order) {
    const MlpView& net = tape.network();
    const std::size_t dim = x.size();
    if (dim != net.input_dim) {
        throw ValidationError("input_jet: x has the wrong dimension");
    }
    if (max_order < 0 || max_order > 2) {
        throw ValidationError("input_jet: max_order must be 0, 1 or 2");
    }
    if (max_order > net.activation.max_jet_order()) {
        throw ValidationError("input_jet: " + net.activation.name() +
                              " has a vanishing second derivative; order 2 jets are rejected");
    }
    const auto& layers = net.layout->layers;

    NodeId h = tape.constant(x);
    std::vector<NodeId> h1(dim, kNoNode);
    std::vector<NodeId> h2(dim * dim, kNoNode); // zero at the input
    if (max_order >= 1) {
        Vec64 e(dim, 0.0);
        for (std::size_t i = 0; i < dim; ++i) {
            e[i] = 1.0;
            h1[i] = tape.constant(e);
            e[i] = 0.0;
        }
    }

    for (std::size_t l = 0; l + 1 < layers.size(); ++l) {
        const NodeId a = tape.affine(l, h, true);
        std::vector<NodeId> a1(dim, kNoNode);
        std::vector<NodeId> a2(dim * dim, kNoNode);
        for (std::size_t i = 0; i < dim && max_order >= 1; ++i) {
            a1[i] = tape.affine(l, h1[i], false);
        }
        for (std::size_t i = 0; i < dim && max_order >= 2; ++i) {
            for (std::size_t j = i; j < dim; ++j) {
                if (h2[i * dim + j] != kNoNode) {
                    a2[i * dim + j] = tape.affine(l, h2[i * dim + j], false);
                }
            }
        }

        h = tape.activation(a, 0);
        if (max_order >= 1) {
            const NodeId p1 = tape.activation(a, 1);
            for (std::size_t i = 0; i < dim; ++i) {
                h1[i] = tape.mul(p1, a1[i]);
            }
            if (max_order >= 2) {
                const NodeId p2 = tape.activation(a, 2);
                for (std::size_t i = 0; i < dim; ++i) {
                    const NodeId q = tape.mul(p2, a1[i]);
                    for (std::size_t j = i; j < dim; ++j) {
                        NodeId y = tape.mul(q, a1[j]);
                        if (a2[i * dim + j] != kNoNode) {
                            const std::array<NodeId, 2> parts = {y, tape.mul(p1, a2[i * dim + j])};
                            const std::array<double, 2> ones = {1.0, 1.0};
                            y = tape.combine(parts, ones);
                        }
                        h2[i * dim + j] = y;
                        h2[j * dim + i] = y;
                    }
                }
            }
        }
    }

    const std::size_t out = layers.size() - 1;
    JetNodes jet;
    jet.dim = dim;
    jet.order = max_order;
    jet.value = tape.affine(out, h, true);
    if (max_order >= 1) {
        jet.first.resize(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            jet.first[i] = tape.affine(out, h1[i], false);
        }
    }
    if (max_order >= 2) {
        jet.second.assign(dim * dim, kNoNode);
        for (std::size_t i = 0; i < dim; ++i) {
            for (std::size_t j = i; j < dim; ++j) {
                const NodeId n = h2[i * dim + j] != kNoNode
                                     ? tape.affine(out, h2[i * dim + j], false)
                                     : tape.constant(Vec64(layers[out].rows, 0.0));
                jet.second[i * dim + j] = n;
                jet.second[j * dim + i] = n;
            }
        }
    }
    return jet;
}

JetValues read_jet(const Tape& tape, const JetNodes& jet) {
    auto copy = [&](NodeId n) {
        const auto v = tape.value(n);
        return Vec64(v.begin(), v.end());
    };
    JetValues out;
    out.dim = jet.dim;
    out.order = jet.order;
    out.value = copy(jet.value);
    for (NodeId n : jet.first) {
        out.first.push_back(copy(n));
    }
    for (NodeId n : jet.second) {
        out.second.push_back(copy(n));
    }
    return out;
}

JetValues evaluate_jet(const MlpView& net, std::span<const double> x, int max_order) {
    Tape tape(net);
    const JetNodes jet = input_jet(tape, x, max_order);
    tape.forward();
    return read_jet(tape, jet);
}

} // namespace tcv
