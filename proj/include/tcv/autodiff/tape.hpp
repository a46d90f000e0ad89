// Copyright 2026 The taylorcv Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode tape over a small primitive set: affine maps bound to the
// layers of a flat parameter vector, elementwise activation derivatives of
// order m, elementwise products, linear combinations and inner products.
//
// Input derivatives of the network are ordinary nodes on the tape (see
// jet.hpp), so a single reverse pass differentiates any scalar built from
// s, ∂s and ∂²s with respect to the parameters.

#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "tcv/autodiff/activation.hpp"
#include "tcv/ndcore/linalg.hpp"

namespace tcv {

/// One dense layer inside a flat parameter vector: W (rows x cols, row-major)
/// at weight_offset, bias (rows) at bias_offset.
struct LayerShape {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
};

struct ParamLayout {
    std::vector<LayerShape> layers;
    std::size_t count = 0;
};

/// Non-owning view of an MLP: parameters, their layout and the activation.
struct MlpView {
    std::span<const double> theta;
    const ParamLayout* layout = nullptr;
    ActivationFamily activation;
    std::size_t input_dim = 0;
};

namespace kernels {

/// out = W in + b (b may be null). Shared by the tape and plain evaluation so
/// both produce bit-identical results.
void affine(MatView w, const double* bias, std::span<const double> in, std::span<double> out);

MatView weight_view(std::span<const double> theta, const LayerShape& layer) noexcept;

} // namespace kernels

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = std::numeric_limits<NodeId>::max();

class Tape {
public:
    explicit Tape(MlpView net);

    /// Drops all nodes but keeps buffers and the parameter binding.
    void clear() noexcept;

    NodeId constant(std::span<const double> v);
    NodeId affine(std::size_t layer, NodeId in, bool with_bias);
    NodeId activation(NodeId in, int order);
    NodeId mul(NodeId a, NodeId b);
    /// Σ coefs[i] * in[i] (+ offset on every entry); inputs share one length.
    NodeId combine(std::span<const NodeId> in, std::span<const double> coefs, double offset = 0.0);
    NodeId dot(NodeId a, NodeId b);

    /// Replaces the value of a constant node; call forward() afterwards.
    void set_constant(NodeId node, std::span<const double> v);

    /// Evaluates every node in order. Throws NumericalError naming the first
    /// node that produced a non-finite value.
    void forward();

    /// Gradient of a scalar node with respect to every parameter. Requires a
    /// prior forward(). Adjoints of intermediate nodes stay readable via
    /// adjoint() until the next backward().
    std::vector<double> backward(NodeId output);

    /// Same as backward() but accumulates scale * gradient into `grad`.
    void backward_into(NodeId output, std::span<double> grad, double scale = 1.0);

    std::span<const double> value(NodeId node) const;
    std::span<const double> adjoint(NodeId node) const;
    double scalar(NodeId node) const;
    std::size_t size(NodeId node) const { return nodes_.at(node).size; }
    std::size_t node_count() const noexcept { return nodes_.size(); }
    std::size_t param_count() const noexcept { return net_.layout->count; }
    const MlpView& network() const noexcept { return net_; }

private:
    enum class Kind : std::uint8_t { constant, affine, activation, mul, combine, dot };

    struct Node {
        Kind kind = Kind::constant;
        bool with_bias = false;
        std::uint8_t order = 0;
        NodeId a = kNoNode;
        NodeId b = kNoNode;
        std::uint32_t layer = 0;
        std::size_t size = 0;
        std::size_t offset = 0;
        std::size_t terms_begin = 0;
        std::size_t terms_count = 0;
        double scalar_offset = 0.0;
    };

    struct Term {
        NodeId node;
        double coef;
    };

    NodeId push(Node node);
    void check(NodeId id) const;
    double* val(NodeId id) { return values_.data() + nodes_[id].offset; }
    const double* val(NodeId id) const { return values_.data() + nodes_[id].offset; }
    double* adj(NodeId id) { return adjoints_.data() + nodes_[id].offset; }
    void touch(NodeId id) { reached_[id] = 1; }
    void run_backward(NodeId output, std::span<double> grad, double scale);

    MlpView net_;
    std::vector<Node> nodes_;
    std::vector<Term> terms_;
    std::vector<double> values_;
    std::vector<double> adjoints_;
    std::vector<std::uint8_t> reached_;
    std::vector<double> scratch_;
    bool forward_done_ = false;
};

} // namespace tcv
