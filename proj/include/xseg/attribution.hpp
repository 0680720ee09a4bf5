#pragma once

#include <vector>

#include "xseg/graph.hpp"

namespace xseg {

// Activations and gradients captured at the final encoder block for one
// extraction. Gradients are with respect to exactly one surrogate scalar.
struct EncoderTap {
    Tensor activations;          // (C_e, H_e, W_e)
    Tensor gradients;            // same shape
    bool has_gradients = false;
};

// Dense attribution field at output resolution. phi is non-negative;
// phi_norm is its l1-normalized form (uniform when degenerate).
struct XaiField {
    Field2D phi;
    Field2D phi_norm;
    bool degenerate = false;
};

// Spatial mean of each gradient channel.
std::vector<double> channel_weights(const EncoderTap& tap);

// phi = bilinear_resize(relu(sum_c w_c * A_c), H, W); phi_norm = phi / (sum phi + eps).
// A gated-out (all-zero) map yields the uniform distribution and sets the
// degenerate flag so callers can skip divergence terms.
XaiField xai_field(const EncoderTap& tap, int out_h, int out_w, double eps = 1e-6);

// Scalar surrogate: sum of logits over pixels predicted positive
// (sigmoid(s) > 0.5); falls back to the total probability mass when no pixel
// is positive so the extraction gradient never vanishes. The selection mask
// is treated as a constant.
NodeId surrogate_scalar(Graph& g, NodeId s_logits);

// Copies activations (and gradients, if backward has populated them) from a
// tapped node.
EncoderTap harvest_tap(const Graph& g, NodeId tap_node);

}  // namespace xseg
