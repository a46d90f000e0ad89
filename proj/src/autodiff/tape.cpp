// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0

#include "tcv/autodiff/tape.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tcv/ndcore/errors.hpp"

namespace tcv {

namespace kernels {

void affine(MatView w, const double* bias, std::span<const double> in, std::span<double> out) {
    for (std::size_t r = 0; r < w.rows; ++r) {
        const double* row = w.data + r * w.cols;
        double acc = 0.0;
        for (std::size_t c = 0; c < w.cols; ++c) {
            acc += row[c] * in[c];
        }
        out[r] = bias != nullptr ? acc + bias[r] : acc;
    }
}

MatView weight_view(std::span<const double> theta, const LayerShape& layer) noexcept {
    return {theta.data() + layer.weight_offset, layer.rows, layer.cols};
}

} // namespace kernels

Tape::Tape(MlpView net) : net_(net) {
    if (net_.layout == nullptr) {
        throw ContractViolation("Tape: network layout is null");
    }
    if (net_.theta.size() != net_.layout->count) {
        throw ContractViolation("Tape: parameter vector length does not match layout");
    }
}

void Tape::clear() noexcept {
    nodes_.clear();
    terms_.clear();
    values_.clear();
    forward_done_ = false;
}

void Tape::check(NodeId id) const {
    if (id >= nodes_.size()) {
        throw ContractViolation("Tape: node " + std::to_string(id) + " does not exist yet");
    }
}

NodeId Tape::push(Node node) {
    node.offset = values_.size();
    values_.resize(values_.size() + node.size, 0.0);
    nodes_.push_back(node);
    forward_done_ = false;
    return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Tape::constant(std::span<const double> v) {
    Node n;
    n.kind = Kind::constant;
    n.size = v.size();
    const NodeId id = push(n);
    std::copy(v.begin(), v.end(), values_.begin() + static_cast<std::ptrdiff_t>(nodes_[id].offset));
    return id;
}

NodeId Tape::affine(std::size_t layer, NodeId in, bool with_bias) {
    check(in);
    const auto& shape = net_.layout->layers.at(layer);
    if (nodes_[in].size != shape.cols) {
        throw ContractViolation("Tape::affine: input length does not match layer width");
    }
    Node n;
    n.kind = Kind::affine;
    n.a = in;
    n.layer = static_cast<std::uint32_t>(layer);
    n.with_bias = with_bias;
    n.size = shape.rows;
    return push(n);
}

NodeId Tape::activation(NodeId in, int order) {
    check(in);
    if (order < 0 || order > ActivationFamily::kMaxOrder - 1) {
        throw ContractViolation("Tape::activation: order must be in [0, 2]");
    }
    Node n;
    n.kind = Kind::activation;
    n.a = in;
    n.order = static_cast<std::uint8_t>(order);
    n.size = nodes_[in].size;
    return push(n);
}

NodeId Tape::mul(NodeId a, NodeId b) {
    check(a);
    check(b);
    if (nodes_[a].size != nodes_[b].size) {
        throw ContractViolation("Tape::mul: length mismatch");
    }
    Node n;
    n.kind = Kind::mul;
    n.a = a;
    n.b = b;
    n.size = nodes_[a].size;
    return push(n);
}

NodeId Tape::combine(std::span<const NodeId> in, std::span<const double> coefs, double offset) {
    if (in.empty() || in.size() != coefs.size()) {
        throw ContractViolation("Tape::combine: need one coefficient per input");
    }
    const std::size_t size = (check(in[0]), nodes_[in[0]].size);
    Node n;
    n.kind = Kind::combine;
    n.size = size;
    n.terms_begin = terms_.size();
    n.terms_count = in.size();
    n.scalar_offset = offset;
    for (std::size_t i = 0; i < in.size(); ++i) {
        check(in[i]);
        if (nodes_[in[i]].size != size) {
            throw ContractViolation("Tape::combine: length mismatch");
        }
        terms_.push_back({in[i], coefs[i]});
    }
    return push(n);
}

NodeId Tape::dot(NodeId a, NodeId b) {
    check(a);
    check(b);
    if (nodes_[a].size != nodes_[b].size) {
        throw ContractViolation("Tape::dot: length mismatch");
    }
    Node n;
    n.kind = Kind::dot;
    n.a = a;
    n.b = b;
    n.size = 1;
    return push(n);
}

void Tape::set_constant(NodeId node, std::span<const double> v) {
    check(node);
    if (nodes_[node].kind != Kind::constant || nodes_[node].size != v.size()) {
        throw ContractViolation("Tape::set_constant: not a constant of that length");
    }
    std::copy(v.begin(), v.end(), val(node));
    forward_done_ = false;
}

void Tape::forward() {
    const auto& act = net_.activation;
    for (NodeId id = 0; id < nodes_.size(); ++id) {
        const Node& n = nodes_[id];
        double* out = val(id);
        switch (n.kind) {
        case Kind::constant:
            break;
        case Kind::affine: {
            const auto& shape = net_.layout->layers[n.layer];
            const double* bias = n.with_bias ? net_.theta.data() + shape.bias_offset : nullptr;
            kernels::affine(kernels::weight_view(net_.theta, shape), bias,
                            {val(n.a), nodes_[n.a].size}, {out, n.size});
            break;
        }
        case Kind::activation:
            act.apply({val(n.a), n.size}, {out, n.size}, n.order);
            break;
        case Kind::mul: {
            const double* a = val(n.a);
            const double* b = val(n.b);
            for (std::size_t i = 0; i < n.size; ++i) {
                out[i] = a[i] * b[i];
            }
            break;
        }
        case Kind::combine: {
            if (n.size == 1) {
                scratch_.resize(n.terms_count);
                for (std::size_t t = 0; t < n.terms_count; ++t) {
                    const Term& term = terms_[n.terms_begin + t];
                    scratch_[t] = term.coef * val(term.node)[0];
                }
                out[0] = pairwise_sum(scratch_) + n.scalar_offset;
            } else {
                std::fill(out, out + n.size, n.scalar_offset);
                for (std::size_t t = 0; t < n.terms_count; ++t) {
                    const Term& term = terms_[n.terms_begin + t];
                    const double* in = val(term.node);
                    for (std::size_t i = 0; i < n.size; ++i) {
                        out[i] += term.coef * in[i];
                    }
                }
            }
            break;
        }
        case Kind::dot:
            out[0] = pairwise_dot({val(n.a), nodes_[n.a].size}, {val(n.b), nodes_[n.b].size});
            break;
        }
        for (std::size_t i = 0; i < n.size; ++i) {
            if (!std::isfinite(out[i])) {
                throw NumericalError("non-finite value at tape node " + std::to_string(id));
            }
        }
    }
    forward_done_ = true;
}

std::span<const double> Tape::value(NodeId node) const {
    check(node);
    return {val(node), nodes_[node].size};
}

std::span<const double> Tape::adjoint(NodeId node) const {
    check(node);
    if (adjoints_.size() < values_.size()) {
        throw ContractViolation("Tape::adjoint: no backward pass has run");
    }
    return {adjoints_.data() + nodes_[node].offset, nodes_[node].size};
}

double Tape::scalar(NodeId node) const {
    check(node);
    if (nodes_[node].size != 1) {
        throw ContractViolation("Tape::scalar: node is not scalar");
    }
    return val(node)[0];
}

std::vector<double> Tape::backward(NodeId output) {
    std::vector<double> grad(param_count(), 0.0);
    run_backward(output, grad, 1.0);
    return grad;
}

void Tape::backward_into(NodeId output, std::span<double> grad, double scale) {
    if (grad.size() != param_count()) {
        throw ContractViolation("Tape::backward_into: gradient buffer has wrong length");
    }
    run_backward(output, grad, scale);
}

void Tape::run_backward(NodeId output, std::span<double> grad, double scale) {
    check(output);
    if (nodes_[output].size != 1) {
        throw ContractViolation("Tape::backward: output node is not scalar");
    }
    if (!forward_done_) {
        throw ContractViolation("Tape::backward: forward() has not been run");
    }
    adjoints_.assign(values_.size(), 0.0);
    reached_.assign(nodes_.size(), 0);
    adj(output)[0] = scale;
    touch(output);

    const auto& act = net_.activation;
    for (NodeId id = output + 1; id-- > 0;) {
        if (!reached_[id]) {
            continue;
        }
        const Node& n = nodes_[id];
        const double* g = adj(id);
        switch (n.kind) {
        case Kind::constant:
            break;
        case Kind::affine: {
            const auto& shape = net_.layout->layers[n.layer];
            const double* in = val(n.a);
            double* gw = grad.data() + shape.weight_offset;
            for (std::size_t r = 0; r < shape.rows; ++r) {
                const double gr = g[r];
                if (gr == 0.0) {
                    continue;
                }
                double* row = gw + r * shape.cols;
                for (std::size_t c = 0; c < shape.cols; ++c) {
                    row[c] += gr * in[c];
                }
            }
            if (n.with_bias) {
                double* gb = grad.data() + shape.bias_offset;
                for (std::size_t r = 0; r < shape.rows; ++r) {
                    gb[r] += g[r];
                }
            }
            if (nodes_[n.a].kind != Kind::constant) {
                gemv_t(kernels::weight_view(net_.theta, shape), {g, n.size},
                       {adj(n.a), shape.cols}, true);
                touch(n.a);
            }
            break;
        }
        case Kind::activation: {
            const double* in = val(n.a);
            double* ga = adj(n.a);
            for (std::size_t i = 0; i < n.size; ++i) {
                ga[i] += g[i] * act.derivative(in[i], n.order + 1);
            }
            touch(n.a);
            break;
        }
        case Kind::mul: {
            const double* a = val(n.a);
            const double* b = val(n.b);
            double* ga = adj(n.a);
            for (std::size_t i = 0; i < n.size; ++i) {
                ga[i] += g[i] * b[i];
            }
            double* gb = adj(n.b);
            for (std::size_t i = 0; i < n.size; ++i) {
                gb[i] += g[i] * a[i];
            }
            touch(n.a);
            touch(n.b);
            break;
        }
        case Kind::combine:
            for (std::size_t t = 0; t < n.terms_count; ++t) {
                const Term& term = terms_[n.terms_begin + t];
                double* gi = adj(term.node);
                for (std::size_t i = 0; i < n.size; ++i) {
                    gi[i] += term.coef * g[i];
                }
                touch(term.node);
            }
            break;
        case Kind::dot: {
            const double s = g[0];
            const std::size_t len = nodes_[n.a].size;
            const double* a = val(n.a);
            const double* b = val(n.b);
            double* ga = adj(n.a);
            for (std::size_t i = 0; i < len; ++i) {
                ga[i] += s * b[i];
            }
            double* gb = adj(n.b);
            for (std::size_t i = 0; i < len; ++i) {
                gb[i] += s * a[i];
            }
            touch(n.a);
            touch(n.b);
            break;
        }
        }
    }
}

} // namespace tcv
