#include "xseg/losses.hpp"

#include <algorithm>
#include <stdexcept>

namespace xseg {

void LossWeights::validate() const {
    auto nonneg = [](double v, const char* name) {
        if (v < 0.0) throw std::invalid_argument(std::string("LossWeights: ") + name + " must be >= 0");
    };
    nonneg(lambda_div, "lambda_div");
    nonneg(lambda_c, "lambda_c");
    nonneg(gamma_aux, "gamma_aux");
    nonneg(alpha1, "alpha1");
    nonneg(alpha2, "alpha2");
    nonneg(beta1, "beta1");
    nonneg(beta2, "beta2");
    nonneg(beta3, "beta3");
    if (eps <= 0.0) throw std::invalid_argument("LossWeights: eps must be > 0");
}

namespace {

// 1 - (2*sum(a.b)+eps)/(sum a + sum b + eps), the shared Dice-style ratio for
// [0,1]-valued fields.
NodeId dice_penalty(Graph& g, NodeId a, NodeId b, double eps) {
    NodeId num = g.add_const(g.mul_const(g.sum(g.mul(a, b)), 2.0), eps);
    NodeId den = g.add_const(g.add(g.sum(a), g.sum(b)), eps);
    return g.sub(g.scalar(1.0), g.div(num, den));
}

// 1 - (2*sum(a.b)+eps)/(sum a^2 + sum b^2 + eps): normalized inner-product
// ratio. Unlike the plain Dice ratio this stays in [0,1] for unbounded
// magnitudes and vanishes exactly when a == b.
NodeId inner_product_penalty(Graph& g, NodeId a, NodeId b, double eps) {
    NodeId num = g.add_const(g.mul_const(g.sum(g.mul(a, b)), 2.0), eps);
    NodeId den = g.add_const(g.add(g.sum(g.mul(a, a)), g.sum(g.mul(b, b))), eps);
    return g.sub(g.scalar(1.0), g.div(num, den));
}

void require_nonneg(const Graph& g, NodeId id, const char* what) {
    for (double v : g.val(id).v)
        if (v < 0.0) throw std::invalid_argument(std::string(what) + ": negative entries");
}

}  // namespace

NodeId l_ovlp(Graph& g, NodeId p, NodeId phi, double eps) {
    if (!g.val(p).same_shape(g.val(phi)))
        throw std::invalid_argument("l_ovlp: shape mismatch " + g.val(p).shape_str() + " vs " +
                                    g.val(phi).shape_str());
    require_nonneg(g, phi, "l_ovlp phi");
    return dice_penalty(g, p, phi, eps);
}

NodeId l_div(Graph& g, NodeId p, NodeId phi_norm, double eps) {
    if (!g.val(p).same_shape(g.val(phi_norm)))
        throw std::invalid_argument("l_div: shape mismatch " + g.val(p).shape_str() + " vs " +
                                    g.val(phi_norm).shape_str());
    NodeId p_tilde = g.div(p, g.add_const(g.sum(p), eps));
    NodeId log_p = g.log_eps(p_tilde, eps);
    NodeId log_phi = g.log_eps(phi_norm, eps);
    return g.mean(g.mul(p_tilde, g.sub(log_p, log_phi)));
}

NodeId l_align(Graph& g, NodeId p, NodeId phi, NodeId phi_norm, const LossWeights& w) {
    NodeId ovlp = l_ovlp(g, p, phi, w.eps);
    NodeId div = l_div(g, p, phi_norm, w.eps);
    return g.add(ovlp, g.mul_const(div, w.lambda_div));
}

NodeId l_edge_with_kernels(Graph& g, NodeId p_star, NodeId y, const std::array<double, 9>& kx,
                           const std::array<double, 9>& ky, double eps) {
    const Tensor& tp = g.val(p_star);
    if (!tp.same_shape(g.val(y)))
        throw std::invalid_argument("l_edge: shape mismatch " + tp.shape_str() + " vs " +
                                    g.val(y).shape_str());
    Tensor wx(1, 3, 3), wy(1, 3, 3);
    std::copy(kx.begin(), kx.end(), wx.v.begin());
    std::copy(ky.begin(), ky.end(), wy.v.begin());
    NodeId nwx = g.constant(std::move(wx));
    NodeId nwy = g.constant(std::move(wy));
    NodeId zero_bias = g.constant(Tensor(1, 1, 1));
    auto grad_mag = [&](NodeId f) {
        NodeId dx = g.conv2d(f, nwx, zero_bias, 1, 1, 3, 1);
        NodeId dy = g.conv2d(f, nwy, zero_bias, 1, 1, 3, 1);
        return g.sqrt(g.add_const(g.add(g.mul(dx, dx), g.mul(dy, dy)), eps));
    };
    return inner_product_penalty(g, grad_mag(p_star), grad_mag(y), eps);
}

NodeId l_edge(Graph& g, NodeId p_star, NodeId y, double eps) {
    static constexpr std::array<double, 9> kSobelX = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
    static constexpr std::array<double, 9> kSobelY = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
    return l_edge_with_kernels(g, p_star, y, kSobelX, kSobelY, eps);
}

NodeId soft_skeleton(Graph& g, NodeId p, int k) {
    if (k < 0) throw std::invalid_argument("soft_skeleton: k must be >= 0");
    auto open = [&](NodeId f) { return g.maxpool3(g.minpool3(f)); };
    NodeId cur = p;
    NodeId skel = g.relu(g.sub(cur, open(cur)));
    for (int t = 1; t <= k; ++t) {
        cur = g.minpool3(cur);
        NodeId delta = g.relu(g.sub(cur, open(cur)));
        skel = g.add(skel, g.relu(g.mul(delta, g.sub(g.scalar(1.0), skel))));
    }
    // clamp to [0,1]: min(x,1) = x - relu(x-1)
    return g.sub(skel, g.relu(g.add_const(skel, -1.0)));
}

NodeId l_cline(Graph& g, NodeId p, NodeId y, int k, double eps) {
    return dice_penalty(g, soft_skeleton(g, p, k), soft_skeleton(g, y, k), eps);
}

NodeId l_anat(Graph& g, NodeId p, NodeId y, int k, double eps) {
    NodeId edge = l_edge(g, p, y, eps);
    NodeId cline = l_cline(g, p, y, k, eps);
    return g.add(g.mul_const(edge, 0.5), g.mul_const(cline, 0.5));
}

NodeId l_region(Graph& g, NodeId s_logits, NodeId y, double eps) {
    if (!g.val(s_logits).same_shape(g.val(y)))
        throw std::invalid_argument("l_region: shape mismatch " + g.val(s_logits).shape_str() +
                                    " vs " + g.val(y).shape_str());
    NodeId p = g.sigmoid(s_logits);
    NodeId one = g.scalar(1.0);
    NodeId bce = g.mul_const(
        g.mean(g.add(g.mul(y, g.log_eps(p, eps)), g.mul(g.sub(one, y), g.log_eps(g.sub(one, p), eps)))),
        -1.0);
    NodeId dice = dice_penalty(g, p, y, eps);
    return g.add(g.mul_const(bce, 0.5), g.mul_const(dice, 0.5));
}

NodeId l_conf(Graph& g, NodeId m_c, NodeId p_star, double eps) {
    if (!g.val(m_c).same_shape(g.val(p_star)))
        throw std::invalid_argument("l_conf: shape mismatch " + g.val(m_c).shape_str() + " vs " +
                                    g.val(p_star).shape_str());
    NodeId target = g.stop_gradient(p_star);
    NodeId one = g.scalar(1.0);
    return g.mul_const(g.mean(g.add(g.mul(target, g.log_eps(m_c, eps)),
                                    g.mul(g.sub(one, target), g.log_eps(g.sub(one, m_c), eps)))),
                       -1.0);
}

NodeId l_box(Graph& g, NodeId b, NodeId b_gt) {
    if (!g.val(b).same_shape(g.val(b_gt)))
        throw std::invalid_argument("l_box: shape mismatch " + g.val(b).shape_str() + " vs " +
                                    g.val(b_gt).shape_str());
    NodeId d = g.sub(b, b_gt);
    NodeId abs = g.add(g.relu(d), g.relu(g.mul_const(d, -1.0)));
    return g.mean(abs);
}

}  // namespace xseg
