#pragma once

#include <array>

#include "xseg/graph.hpp"

namespace xseg {

// Coefficients of the composite objectives. All must be >= 0, eps > 0.
struct LossWeights {
    double lambda_div = 0.2;
    double lambda_c = 1.0;
    double gamma_aux = 0.5;
    double alpha1 = 0.1;
    double alpha2 = 0.5;
    double beta1 = 0.5;
    double beta2 = 0.1;
    double beta3 = 0.2;
    double eps = 1e-6;
    void validate() const;
};

// Mass-overlap penalty: 1 - (2*sum(p.phi)+eps) / (sum p + sum phi + eps).
// phi must be non-negative.
NodeId l_ovlp(Graph& g, NodeId p, NodeId phi, double eps = 1e-6);

// Pixel-mean divergence of the normalized probability mass against a
// gradient-stopped focus distribution. p_tilde = p/(sum p + eps) is built
// in-graph; phi_norm is consumed as-is.
NodeId l_div(Graph& g, NodeId p, NodeId phi_norm, double eps = 1e-6);

// l_ovlp + lambda_div * l_div.
NodeId l_align(Graph& g, NodeId p, NodeId phi, NodeId phi_norm, const LossWeights& w);

// Sobel gradient-magnitude Dice penalty between a soft prediction and the
// mask.
NodeId l_edge(Graph& g, NodeId p_star, NodeId y, double eps = 1e-6);
// Same with caller-supplied 3x3 derivative kernels (row-major); the fixture
// suites use this to demonstrate sensitivity to the kernel choice.
NodeId l_edge_with_kernels(Graph& g, NodeId p_star, NodeId y, const std::array<double, 9>& kx,
                           const std::array<double, 9>& ky, double eps = 1e-6);

// Iterative morphological thinning: erode/open via 3x3 min/max pooling,
// k extra erosion rounds, output clamped to [0,1]. Differentiable.
NodeId soft_skeleton(Graph& g, NodeId p, int k);

// Dice penalty between soft skeletons of p and y (same k for both).
NodeId l_cline(Graph& g, NodeId p, NodeId y, int k, double eps = 1e-6);

// 0.5 * l_edge + 0.5 * l_cline.
NodeId l_anat(Graph& g, NodeId p, NodeId y, int k, double eps = 1e-6);

// Region term on logits: 0.5 * BCE(sigmoid(s), y) + 0.5 * soft-Dice loss.
NodeId l_region(Graph& g, NodeId s_logits, NodeId y, double eps = 1e-6);

// BCE between the confidence map and the gradient-stopped probability field.
NodeId l_conf(Graph& g, NodeId m_c, NodeId p_star, double eps = 1e-6);

// Mean absolute deviation over the 4 box coordinates.
NodeId l_box(Graph& g, NodeId b, NodeId b_gt);

}  // namespace xseg
