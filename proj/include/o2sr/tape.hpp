#pragma once

#include <functional>
#include <vector>

#include "o2sr/kernels.hpp"
#include "o2sr/tensor.hpp"

// Reverse-mode differentiation over FeatureMap values. Each op pushes its
// result plus a closure that routes the output gradient to its inputs and to
// any parameter gradient buffers. With recording off the same op calls run a
// plain forward pass.
namespace o2sr {

using Var = int;

/// A parameter tensor and, optionally, where its gradient accumulates.
struct ParamRef {
    const Tensor* value = nullptr;
    Tensor* grad = nullptr;
};

class Tape {
public:
    using Backward = std::function<void(Tape&, Var)>;

    explicit Tape(bool record = true) : record_(record) {}

    bool recording() const { return record_; }

    /// Input that never receives a gradient.
    Var constant(FeatureMap value);

    /// Input whose gradient is tracked (used by gradient checks).
    Var leaf(FeatureMap value);

    Var push(FeatureMap value, bool requires_grad, Backward backward);

    const FeatureMap& value(Var v) const { return nodes_.at(v).value; }
    bool requires_grad(Var v) const { return nodes_.at(v).requires_grad; }

    /// Gradient buffer of v, allocated as zeros on first use.
    FeatureMap& grad(Var v);

    /// Null when nothing has flowed into v.
    const FeatureMap* grad_if(Var v) const;

    /// Seeds d(out) and runs all recorded closures in reverse order.
    void backward(Var out, FeatureMap seed);

    std::size_t size() const { return nodes_.size(); }

private:
    struct Node {
        FeatureMap value;
        FeatureMap grad;
        bool requires_grad = false;
        Backward backward;
    };

    bool record_;
    std::vector<Node> nodes_;
};

namespace ops {

Var conv2d(Tape& t, Var x, ParamRef weight, ParamRef bias, int groups = 1,
           kernels::Padding pad = kernels::Padding::reflect);

/// Fixed one-pixel shifts per channel group, zero fill.
Var shift(Tape& t, Var x);

/// Per-channel O_v + O_h of x as a C x 1 x 1 map.
Var orientation_gate(Tape& t, Var x);

/// x scaled per channel by a C x 1 x 1 gate.
Var scale_channels(Tape& t, Var x, Var gate);

Var add(Tape& t, Var a, Var b);
Var sigmoid(Tape& t, Var x);
Var relu(Tape& t, Var x);
Var gelu(Tape& t, Var x);

/// Stacks inputs along the channel axis.
Var concat(Tape& t, const std::vector<Var>& xs);

Var global_avg_pool(Tape& t, Var x);

/// Normalizes each pixel's channel vector, then applies gamma/beta.
Var layer_norm(Tape& t, Var x, ParamRef gamma, ParamRef beta, double eps = 1e-5);

/// rel_bias.value may be null.
Var window_attention(Tape& t, Var qkv, int heads, int window, ParamRef rel_bias);

Var pixel_shuffle(Tape& t, Var x, int factor);

/// Reflect-pads the bottom and right edges.
Var pad_bottom_right(Tape& t, Var x, int rows, int cols);

/// Keeps the top-left height x width window.
Var crop(Tape& t, Var x, int height, int width);

} // namespace ops

} // namespace o2sr
