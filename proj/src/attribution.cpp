#include "xseg/attribution.hpp"

#include <stdexcept>

namespace xseg {

std::vector<double> channel_weights(const EncoderTap& tap) {
    if (!tap.has_gradients)
        throw std::invalid_argument("channel_weights: tap gradients not populated");
    if (!tap.activations.same_shape(tap.gradients))
        throw std::invalid_argument("channel_weights: activation/gradient shape mismatch " +
                                    tap.activations.shape_str() + " vs " + tap.gradients.shape_str());
    const Tensor& gr = tap.gradients;
    std::vector<double> w(size_t(gr.ch));
    const double inv = 1.0 / double(gr.h * gr.w);
    for (int c = 0; c < gr.ch; ++c) {
        double s = 0.0;
        for (int i = 0; i < gr.h; ++i)
            for (int j = 0; j < gr.w; ++j) s += gr.at(c, i, j);
        w[size_t(c)] = s * inv;
    }
    return w;
}

XaiField xai_field(const EncoderTap& tap, int out_h, int out_w, double eps) {
    const Tensor& act = tap.activations;
    if (out_h < act.h || out_w < act.w)
        throw std::invalid_argument("xai_field: output shape smaller than encoder shape");
    std::vector<double> w = channel_weights(tap);
    Tensor coarse(1, act.h, act.w);
    for (int c = 0; c < act.ch; ++c)
        for (int i = 0; i < act.h; ++i)
            for (int j = 0; j < act.w; ++j) coarse.at(0, i, j) += w[size_t(c)] * act.at(c, i, j);
    for (double& v : coarse.v) v = v > 0.0 ? v : 0.0;  // one-sided gate
    Tensor lifted = t_bilinear_resize(coarse, out_h, out_w);

    XaiField out;
    out.phi = to_field(lifted);
    double mass = t_sum(lifted);
    out.phi_norm = Field2D(out_h, out_w);
    if (mass < eps) {
        out.degenerate = true;
        const float u = float(1.0 / double(out_h) / double(out_w));
        for (float& v : out.phi_norm.data) v = u;
    } else {
        const double inv = 1.0 / (mass + eps);
        for (size_t i = 0; i < lifted.size(); ++i) out.phi_norm.data[i] = float(lifted.v[i] * inv);
    }
    return out;
}

NodeId surrogate_scalar(Graph& g, NodeId s_logits) {
    const Tensor& s = g.val(s_logits);
    Tensor mask(s.ch, s.h, s.w);
    bool any = false;
    for (size_t i = 0; i < s.size(); ++i) {
        if (s.v[i] > 0.0) {  // sigmoid(s) > 0.5
            mask.v[i] = 1.0;
            any = true;
        }
    }
    if (any) return g.sum(g.mul(s_logits, g.constant(std::move(mask))));
    return g.sum(g.sigmoid(s_logits));
}

EncoderTap harvest_tap(const Graph& g, NodeId tap_node) {
    EncoderTap tap;
    tap.activations = g.val(tap_node);
    const Tensor& gr = g.grad(tap_node);
    if (gr.size() == tap.activations.size()) {
        tap.gradients = gr;
        tap.has_gradients = true;
    }
    return tap;
}

}  // namespace xseg
