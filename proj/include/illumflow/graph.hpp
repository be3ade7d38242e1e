#pragma once

#include <functional>
#include <memory>

#include "illumflow/tensor.hpp"

namespace illumflow::ad {

struct Node {
    Tensor value;
    Tensor grad;  // allocated by backward()
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backprop;  // scatters node.grad into parents
};

// Handle into the tape; cheap to copy.
class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> n) : node_(std::move(n)) {}

    static Var constant(Tensor t);
    static Var leaf(Tensor t);  // participates in gradients

    bool valid() const { return node_ != nullptr; }
    const Tensor& value() const { return node_->value; }
    const Tensor& grad() const { return node_->grad; }
    std::shared_ptr<Node> node() const { return node_; }
    double item() const { return node_->value.data.at(0); }

private:
    std::shared_ptr<Node> node_;
};

// Runs reverse-mode accumulation from a scalar loss; grads of all reachable
// requires_grad nodes are populated (zeroed first).
void backward(const Var& loss);

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);  // elementwise
Var divide(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var silu(const Var& a);
// clamp to [0,1]; subgradient 1 inside, 0 outside
Var clamp01(const Var& a);

// x:[Cin,H,W], w:[Cout,Cin,k,k], b:[Cout]; zero "same" padding (k odd).
Var conv2d(const Var& x, const Var& w, const Var& b);
// broadcast-add a per-channel vector b:[C] onto x:[C,H,W]
Var bias_broadcast(const Var& x, const Var& b);
// y = W x + b with x:[n], W:[m,n], b:[m]
Var dense(const Var& x, const Var& w, const Var& b);
// separable valid-range convolution of x:[C,H,W] with a fixed 1-D kernel,
// applied along rows then columns
Var blur_separable_valid(const Var& x, const std::vector<double>& kernel);
Var mean(const Var& a);
// mean of squared elementwise difference
Var mse(const Var& a, const Var& b);

}  // namespace illumflow::ad
