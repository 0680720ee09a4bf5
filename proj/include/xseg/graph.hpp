#pragma once

#include <cstdint>
#include <vector>

#include "xseg/tensor.hpp"

namespace xseg {

using NodeId = int32_t;

// Reverse-mode tape over Tensor values. Forward values are computed eagerly at
// node creation; topological order is insertion order and parents always have
// smaller ids. A graph is single-owner: build, call backward on a scalar root,
// read grads. Repeated backward calls accumulate until zero_grads().
class Graph {
public:
    NodeId input(Tensor t);
    NodeId constant(Tensor t) { return input(std::move(t)); }
    NodeId scalar(double v) { return input(Tensor::scalar(v)); }

    // Elementwise; one operand may be a 1x1x1 scalar (broadcast).
    NodeId add(NodeId a, NodeId b);
    NodeId sub(NodeId a, NodeId b);
    NodeId mul(NodeId a, NodeId b);
    NodeId div(NodeId a, NodeId b);
    NodeId add_const(NodeId a, double k);
    NodeId mul_const(NodeId a, double k);

    NodeId relu(NodeId a);
    NodeId sigmoid(NodeId a);
    NodeId log_eps(NodeId a, double eps);  // log(x + eps)
    NodeId sqrt(NodeId a);

    NodeId sum(NodeId a);
    NodeId mean(NodeId a);

    // Zero padding k/2, odd kernel, stride 1 or 2. w is (out_ch*in_ch, k, k),
    // b is (out_ch, 1, 1).
    NodeId conv2d(NodeId x, NodeId w, NodeId b, int out_ch, int in_ch, int k, int stride);
    // Fully connected on a (in,1,1) vector. w is (out*in,1,1), b is (out,1,1).
    NodeId dense(NodeId x, NodeId w, NodeId b, int out_dim, int in_dim);

    NodeId nearest_up2(NodeId a);
    NodeId bilinear_resize(NodeId a, int out_h, int out_w);
    NodeId maxpool3(NodeId a);  // stride 1, replicate padding, first-index ties
    NodeId minpool3(NodeId a);  // composed as -maxpool3(-x)
    NodeId global_avg_pool(NodeId a);
    NodeId channel_concat(NodeId a, NodeId b);
    NodeId stop_gradient(NodeId a);

    const Tensor& val(NodeId id) const { return nodes_[check(id)].val; }
    const Tensor& grad(NodeId id) const { return nodes_[check(id)].grad; }

    // Accumulates d(root)/d(node) into every node's grad. Root must be scalar.
    void backward(NodeId root);
    void zero_grads();

    // Hash over every relu sign and pool argmax choice seen during forward
    // construction; two evaluations with equal signatures followed the same
    // smooth branch of the function.
    uint64_t signature() const { return sig_; }
    size_t size() const { return nodes_.size(); }

private:
    enum class Op {
        Input,
        Add,
        Sub,
        Mul,
        Div,
        AddConst,
        MulConst,
        Relu,
        Sigmoid,
        LogEps,
        Sqrt,
        Sum,
        Mean,
        Conv2d,
        Dense,
        NearestUp2,
        Bilinear,
        MaxPool3,
        GlobalAvgPool,
        ChannelConcat,
        StopGrad,
    };

    struct Node {
        Op op;
        NodeId a = -1, b = -1, c = -1;
        double k0 = 0.0;            // op constant (AddConst/MulConst/LogEps eps)
        int i0 = 0, i1 = 0, i2 = 0, i3 = 0;  // conv/dense/resize metadata
        Tensor val;
        Tensor grad;
        std::vector<int32_t> arg;   // pool argmax flat indices
    };

    NodeId push(Node n);
    NodeId check(NodeId id) const;
    NodeId binary(Op op, NodeId a, NodeId b);
    void sig_mix(uint64_t x) { sig_ = (sig_ ^ x) * 0x100000001b3ULL; }

    std::vector<Node> nodes_;
    uint64_t sig_ = 0xcbf29ce484222325ULL;
};

}  // namespace xseg
