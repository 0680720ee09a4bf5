#pragma once

#include <string>
#include <vector>

#include "xseg/attribution.hpp"
#include "xseg/graph.hpp"

namespace xseg {

// Normalized corner box, x = column axis, half-open upper edges.
struct Box {
    double x_min = 0.0, y_min = 0.0, x_max = 0.0, y_max = 0.0;
};

// Encoder-decoder with a tapped final encoder block, residual channel MLP
// refinement, box projection head, box-prompted decoder, auxiliary decoder
// and confidence head. Under 100k parameters.
struct ModelParams {
    Tensor pre_g, pre_b;                    // per-channel affine normalization
    Tensor e1w, e1b, e2w, e2b, e3w, e3b;    // encoder, stride-2 convs to H/8
    Tensor r1w, r1b, r2w, r2b;              // channel MLP (1x1 convs), residual
    Tensor bxw, bxb;                        // box head, gap -> affine(32->4)
    Tensor d1w, d1b, d2w, d2b, d3w, d3b;    // decoder on E + box channel
    Tensor a1w, a1b, a2w, a2b, a3w, a3b;    // auxiliary decoder on E'
    Tensor c1w, c1b, c2w, c2b;              // confidence head on sigmoid(a)

    // r2w/r2b start at zero so the refinement is the identity at init.
    static ModelParams init(uint64_t seed);
    std::vector<Tensor*> all();
    std::vector<const Tensor*> all() const;
    size_t count() const;
};

inline constexpr int kEncoderChannels = 32;

struct ForwardNodes {
    NodeId s = -1;        // main logits, 1xHxW
    NodeId a = -1;        // auxiliary logits (-1 when skipped)
    NodeId m_c = -1;      // confidence map (-1 when skipped)
    NodeId b = -1;        // box vector node, (4,1,1)
    NodeId encoder = -1;  // tapped final encoder activations E
    NodeId refined = -1;  // E'
    Box box;              // box values read back from the graph
    bool box_degenerate = false;
};

// Builds the full forward pass in one graph. H and W must be divisible by 8.
// param_ids must follow ModelParams::all() order. with_aux=false skips the
// auxiliary decoder and confidence head.
ForwardNodes model_forward(Graph& g, const std::vector<NodeId>& param_ids, const Field2D& image,
                           bool with_aux = true);

// Convenience for inference-style calls; parameters become constant leaves.
ForwardNodes model_forward(Graph& g, const ModelParams& params, const Field2D& image,
                           bool with_aux = true);

// Binary box-interior channel on the pixel grid (floor/ceil edges); a
// degenerate box (min >= max on either axis) gives all zeros and sets the
// flag. Not differentiable; consumed as a constant.
Mask2D rasterize_box(const Box& b, int h, int w, bool* degenerate = nullptr);

// Tight normalized bounding box of the 1-pixels; empty mask -> zero box with
// flag.
Box box_from_mask(const Mask2D& y, bool* empty = nullptr);

struct InferResult {
    Field2D p_final;
    Field2D p_raw;
    Field2D m_c;
    XaiField xai;
    Box box;
};

// Full inference with confidence modulation s' = s + kappa * logit(m_c)
// (m_c clamped to [1e-4, 1-1e-4]); kappa = 0 reproduces the raw
// probabilities bit-exactly. The attribution field is extracted from a
// surrogate backward pass for reporting.
InferResult infer(const ModelParams& params, const Field2D& image, double kappa);

// SEGM checkpoint.
void save_model(const ModelParams& params, const std::string& path);
ModelParams load_model(const std::string& path);

}  // namespace xseg
