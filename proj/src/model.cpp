#include "xseg/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "xseg/rng.hpp"
#include "xseg/serialize.hpp"

namespace xseg {

namespace {

Tensor kaiming(Rng& rng, int c, int h, int w, int fan_in) {
    Tensor t(c, h, w);
    double limit = std::sqrt(6.0 / double(fan_in));
    for (double& v : t.v) v = rng.uniform(-limit, limit);
    return t;
}

const std::vector<std::vector<uint32_t>>& model_dims() {
    static const std::vector<std::vector<uint32_t>> dims = {
        {1}, {1},                              // pre-encoder affine
        {16, 1, 3, 3}, {16},                   // enc1
        {32, 16, 3, 3}, {32},                  // enc2
        {32, 32, 3, 3}, {32},                  // enc3
        {32, 32, 1, 1}, {32},                  // ref mlp 1
        {32, 32, 1, 1}, {32},                  // ref mlp 2
        {4, 32}, {4},                          // box head
        {16, 33, 3, 3}, {16},                  // dec1 (E + box channel)
        {8, 16, 3, 3}, {8},                    // dec2
        {1, 8, 3, 3}, {1},                     // dec3
        {16, 32, 3, 3}, {16},                  // aux1
        {8, 16, 3, 3}, {8},                    // aux2
        {1, 8, 3, 3}, {1},                     // aux3
        {8, 1, 3, 3}, {8},                     // conf1
        {1, 8, 3, 3}, {1},                     // conf2
    };
    return dims;
}

}  // namespace

ModelParams ModelParams::init(uint64_t seed) {
    ModelParams p;
    int stream = 0;
    auto next = [&]() { return Rng(Rng::mix(seed, uint64_t(stream++))); };
    p.pre_g = Tensor::scalar(1.0);
    p.pre_b = Tensor::scalar(0.0);
    Rng r = next();
    p.e1w = kaiming(r, 16 * 1, 3, 3, 1 * 9);
    p.e1b = Tensor(16, 1, 1);
    r = next();
    p.e2w = kaiming(r, 32 * 16, 3, 3, 16 * 9);
    p.e2b = Tensor(32, 1, 1);
    r = next();
    p.e3w = kaiming(r, 32 * 32, 3, 3, 32 * 9);
    p.e3b = Tensor(32, 1, 1);
    r = next();
    p.r1w = kaiming(r, 32 * 32, 1, 1, 32);
    p.r1b = Tensor(32, 1, 1);
    p.r2w = Tensor(32 * 32, 1, 1);  // zero: E' == E at init
    p.r2b = Tensor(32, 1, 1);
    r = next();
    p.bxw = kaiming(r, 4 * 32, 1, 1, 32);
    p.bxb = Tensor(4, 1, 1);
    r = next();
    p.d1w = kaiming(r, 16 * 33, 3, 3, 33 * 9);
    p.d1b = Tensor(16, 1, 1);
    r = next();
    p.d2w = kaiming(r, 8 * 16, 3, 3, 16 * 9);
    p.d2b = Tensor(8, 1, 1);
    r = next();
    p.d3w = kaiming(r, 1 * 8, 3, 3, 8 * 9);
    p.d3b = Tensor(1, 1, 1);
    r = next();
    p.a1w = kaiming(r, 16 * 32, 3, 3, 32 * 9);
    p.a1b = Tensor(16, 1, 1);
    r = next();
    p.a2w = kaiming(r, 8 * 16, 3, 3, 16 * 9);
    p.a2b = Tensor(8, 1, 1);
    r = next();
    p.a3w = kaiming(r, 1 * 8, 3, 3, 8 * 9);
    p.a3b = Tensor(1, 1, 1);
    r = next();
    p.c1w = kaiming(r, 8 * 1, 3, 3, 1 * 9);
    p.c1b = Tensor(8, 1, 1);
    r = next();
    p.c2w = kaiming(r, 1 * 8, 3, 3, 8 * 9);
    p.c2b = Tensor(1, 1, 1);
    return p;
}

std::vector<Tensor*> ModelParams::all() {
    return {&pre_g, &pre_b, &e1w, &e1b, &e2w, &e2b, &e3w, &e3b, &r1w, &r1b, &r2w, &r2b,
            &bxw,   &bxb,   &d1w, &d1b, &d2w, &d2b, &d3w, &d3b, &a1w, &a1b, &a2w, &a2b,
            &a3w,   &a3b,   &c1w, &c1b, &c2w, &c2b};
}

std::vector<const Tensor*> ModelParams::all() const {
    return {&pre_g, &pre_b, &e1w, &e1b, &e2w, &e2b, &e3w, &e3b, &r1w, &r1b, &r2w, &r2b,
            &bxw,   &bxb,   &d1w, &d1b, &d2w, &d2b, &d3w, &d3b, &a1w, &a1b, &a2w, &a2b,
            &a3w,   &a3b,   &c1w, &c1b, &c2w, &c2b};
}

size_t ModelParams::count() const {
    size_t n = 0;
    for (const Tensor* t : all()) n += t->size();
    return n;
}

Mask2D rasterize_box(const Box& b, int h, int w, bool* degenerate) {
    Mask2D out(h, w);
    bool degen = b.x_min >= b.x_max || b.y_min >= b.y_max;
    if (degenerate) *degenerate = degen;
    if (degen) return out;
    int j0 = std::max(0, int(std::floor(b.x_min * w)));
    int j1 = std::min(w, int(std::ceil(b.x_max * w)));
    int i0 = std::max(0, int(std::floor(b.y_min * h)));
    int i1 = std::min(h, int(std::ceil(b.y_max * h)));
    for (int i = i0; i < i1; ++i)
        for (int j = j0; j < j1; ++j) out.at(i, j) = 1;
    return out;
}

Box box_from_mask(const Mask2D& y, bool* empty) {
    int imin = y.height, imax = -1, jmin = y.width, jmax = -1;
    for (int i = 0; i < y.height; ++i)
        for (int j = 0; j < y.width; ++j)
            if (y.at(i, j)) {
                imin = std::min(imin, i);
                imax = std::max(imax, i);
                jmin = std::min(jmin, j);
                jmax = std::max(jmax, j);
            }
    Box b;
    bool is_empty = imax < 0;
    if (empty) *empty = is_empty;
    if (is_empty) return b;
    b.x_min = double(jmin) / y.width;
    b.x_max = double(jmax + 1) / y.width;
    b.y_min = double(imin) / y.height;
    b.y_max = double(imax + 1) / y.height;
    return b;
}

ForwardNodes model_forward(Graph& g, const std::vector<NodeId>& pid, const Field2D& image,
                           bool with_aux) {
    if (pid.size() != 30) throw std::invalid_argument("model_forward: expected 30 parameter nodes");
    if (image.height % 8 != 0 || image.width % 8 != 0)
        throw std::invalid_argument("model_forward: H and W must be divisible by 8, got " +
                                    std::to_string(image.height) + "x" + std::to_string(image.width));
    enum {
        PRE_G, PRE_B, E1W, E1B, E2W, E2B, E3W, E3B, R1W, R1B, R2W, R2B,
        BXW, BXB, D1W, D1B, D2W, D2B, D3W, D3B, A1W, A1B, A2W, A2B,
        A3W, A3B, C1W, C1B, C2W, C2B,
    };
    ForwardNodes out;
    NodeId x = g.input(to_tensor(image));
    NodeId xn = g.add(g.mul(x, pid[PRE_G]), pid[PRE_B]);
    NodeId e1 = g.relu(g.conv2d(xn, pid[E1W], pid[E1B], 16, 1, 3, 2));
    NodeId e2 = g.relu(g.conv2d(e1, pid[E2W], pid[E2B], 32, 16, 3, 2));
    NodeId enc = g.relu(g.conv2d(e2, pid[E3W], pid[E3B], 32, 32, 3, 2));
    out.encoder = enc;

    // channel MLP with residual connection (1x1 convolutions)
    NodeId m1 = g.relu(g.conv2d(enc, pid[R1W], pid[R1B], 32, 32, 1, 1));
    NodeId m2 = g.conv2d(m1, pid[R2W], pid[R2B], 32, 32, 1, 1);
    NodeId refined = g.add(enc, m2);
    out.refined = refined;

    // box prompt
    NodeId pooled = g.global_avg_pool(enc);
    NodeId box_node = g.sigmoid(g.dense(pooled, pid[BXW], pid[BXB], 4, 32));
    out.b = box_node;
    const Tensor& bv = g.val(box_node);
    out.box = {bv.v[0], bv.v[1], bv.v[2], bv.v[3]};
    Mask2D box_chan = rasterize_box(out.box, image.height / 8, image.width / 8, &out.box_degenerate);

    // decoder on E + rasterized prompt channel
    NodeId dec_in = g.channel_concat(enc, g.constant(to_tensor(box_chan)));
    NodeId d1 = g.relu(g.conv2d(g.nearest_up2(dec_in), pid[D1W], pid[D1B], 16, 33, 3, 1));
    NodeId d2 = g.relu(g.conv2d(g.nearest_up2(d1), pid[D2W], pid[D2B], 8, 16, 3, 1));
    out.s = g.conv2d(g.nearest_up2(d2), pid[D3W], pid[D3B], 1, 8, 3, 1);

    if (with_aux) {
        NodeId a1 = g.relu(g.conv2d(g.nearest_up2(refined), pid[A1W], pid[A1B], 16, 32, 3, 1));
        NodeId a2 = g.relu(g.conv2d(g.nearest_up2(a1), pid[A2W], pid[A2B], 8, 16, 3, 1));
        out.a = g.conv2d(g.nearest_up2(a2), pid[A3W], pid[A3B], 1, 8, 3, 1);
        NodeId p_aux = g.sigmoid(out.a);
        NodeId c1 = g.relu(g.conv2d(p_aux, pid[C1W], pid[C1B], 8, 1, 3, 1));
        out.m_c = g.sigmoid(g.conv2d(c1, pid[C2W], pid[C2B], 1, 8, 3, 1));
    }
    return out;
}

ForwardNodes model_forward(Graph& g, const ModelParams& params, const Field2D& image,
                           bool with_aux) {
    std::vector<NodeId> pid;
    for (const Tensor* t : params.all()) pid.push_back(g.input(*t));
    return model_forward(g, pid, image, with_aux);
}

InferResult infer(const ModelParams& params, const Field2D& image, double kappa) {
    if (kappa < 0.0) throw std::invalid_argument("infer: kappa must be >= 0");
    Graph g;
    ForwardNodes fw = model_forward(g, params, image, true);
    InferResult out;
    out.box = fw.box;
    const Tensor& s = g.val(fw.s);
    const Tensor& mc = g.val(fw.m_c);
    out.p_raw = to_field(t_sigmoid(s));
    out.m_c = to_field(mc);

    Tensor s_mod = s;
    constexpr double kDelta = 1e-4;
    for (size_t i = 0; i < s_mod.size(); ++i) {
        double m = std::clamp(mc.v[i], kDelta, 1.0 - kDelta);
        s_mod.v[i] = s.v[i] + kappa * std::log(m / (1.0 - m));
    }
    out.p_final = to_field(t_sigmoid(s_mod));

    NodeId sur = surrogate_scalar(g, fw.s);
    g.backward(sur);
    EncoderTap tap = harvest_tap(g, fw.encoder);
    out.xai = xai_field(tap, image.height, image.width);
    return out;
}

void save_model(const ModelParams& params, const std::string& path) {
    write_blob(path, "SEGM", params.all(), model_dims());
}

ModelParams load_model(const std::string& path) {
    ModelParams p = ModelParams::init(0);
    read_blob(path, "SEGM", p.all(), model_dims());
    return p;
}

}  // namespace xseg
