#pragma once

#include <functional>
#include <vector>

#include "xseg/graph.hpp"

namespace xseg {

// Adam with global-norm gradient clipping applied before the moment updates.
class Adam {
public:
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {}

    // params and grads are parallel lists of same-shaped tensors. Returns the
    // pre-clip global norm; *post_norm (optional) receives the clipped norm.
    double step(const std::vector<Tensor*>& params, std::vector<Tensor>& grads, double clip_norm,
                double* post_norm = nullptr);

private:
    double lr_, b1_, b2_, eps_;
    int t_ = 0;
    std::vector<Tensor> m_, v_;
};

// Per-sample graph evaluation with gradients reduced in sample-index order.
// The builder receives a fresh graph, the ids of the parameter leaves (same
// order as `params`), the sample index, and a per-sample metrics row to fill;
// it returns the scalar root. Thread count > 1 runs samples concurrently but
// the reduction stays deterministic.
struct BatchResult {
    std::vector<Tensor> grads;            // summed over samples
    std::vector<double> losses;           // root value per sample
    std::vector<std::vector<double>> metrics;
};

using SampleBuilder =
    std::function<NodeId(Graph&, const std::vector<NodeId>&, int sample, std::vector<double>&)>;

BatchResult batch_backward(const std::vector<const Tensor*>& params, const SampleBuilder& build,
                           int n_samples, int threads);

}  // namespace xseg
