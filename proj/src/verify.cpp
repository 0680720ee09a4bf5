#include "xseg/verify.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "xseg/losses.hpp"
#include "xseg/morphology.hpp"
#include "xseg/oracle.hpp"
#include "xseg/pairnet.hpp"
#include "xseg/probe.hpp"
#include "xseg/rng.hpp"

namespace xseg {

namespace {

Tensor random_field(Rng& rng, int h, int w, double lo = -2.0, double hi = 2.0) {
    Tensor t(1, h, w);
    for (double& v : t.v) v = rng.uniform(lo, hi);
    return t;
}

Tensor random_nonneg(Rng& rng, int h, int w) {
    Tensor t(1, h, w);
    for (double& v : t.v) v = rng.uniform(0.0, 1.0);
    return t;
}

Tensor random_mask_tensor(Rng& rng, int h, int w, double density = 0.4) {
    Tensor t(1, h, w);
    for (double& v : t.v) v = rng.uniform() < density ? 1.0 : 0.0;
    return t;
}

Mask2D random_mask(Rng& rng, int h, int w, double density = 0.4) {
    Mask2D m(h, w);
    for (uint8_t& v : m.data) v = rng.uniform() < density ? 1 : 0;
    return m;
}

Tensor normalized_tensor(Rng& rng, int h, int w) {
    Tensor t = random_nonneg(rng, h, w);
    double s = 0.0;
    for (double v : t.v) s += v;
    for (double& v : t.v) v /= s;
    return t;
}

}  // namespace

GradCheckReport check_loss_gradients(const std::string& name, int n_inputs, uint64_t seed,
                                     double tol) {
    constexpr int H = 8, W = 8;
    constexpr double kH = 1e-3;
    GradCheckReport agg;
    agg.pass = true;
    for (int trial = 0; trial < n_inputs; ++trial) {
        Rng rng(Rng::mix(seed, uint64_t(trial)));
        GraphBuilder build;
        Tensor x0 = random_field(rng, H, W);

        if (name == "ovlp") {
            Tensor phi = random_nonneg(rng, H, W);
            build = [phi](Graph& g, NodeId x) {
                return l_ovlp(g, g.sigmoid(x), g.constant(phi));
            };
        } else if (name == "div") {
            Tensor phin = normalized_tensor(rng, H, W);
            build = [phin](Graph& g, NodeId x) {
                return l_div(g, g.sigmoid(x), g.constant(phin));
            };
        } else if (name == "align") {
            Tensor phi = random_nonneg(rng, H, W);
            Tensor phin = normalized_tensor(rng, H, W);
            build = [phi, phin](Graph& g, NodeId x) {
                LossWeights w;
                return l_align(g, g.sigmoid(x), g.constant(phi), g.constant(phin), w);
            };
        } else if (name == "edge") {
            Tensor y = random_mask_tensor(rng, H, W);
            build = [y](Graph& g, NodeId x) { return l_edge(g, g.sigmoid(x), g.constant(y)); };
        } else if (name == "cline") {
            Tensor y = random_mask_tensor(rng, H, W);
            build = [y](Graph& g, NodeId x) {
                return l_cline(g, g.sigmoid(x), g.constant(y), 3);
            };
        } else if (name == "anat") {
            Tensor y = random_mask_tensor(rng, H, W);
            build = [y](Graph& g, NodeId x) {
                return l_anat(g, g.sigmoid(x), g.constant(y), 3);
            };
        } else if (name == "region") {
            Tensor y = random_mask_tensor(rng, H, W);
            build = [y](Graph& g, NodeId x) { return l_region(g, x, g.constant(y)); };
        } else if (name == "conf") {
            Tensor target = random_nonneg(rng, H, W);
            build = [target](Graph& g, NodeId x) {
                return l_conf(g, g.sigmoid(x), g.constant(target));
            };
        } else if (name == "box") {
            x0 = Tensor(4, 1, 1);
            for (double& v : x0.v) v = rng.uniform(-2.0, 2.0);
            Tensor gt(4, 1, 1);
            gt.v = {rng.uniform(0.0, 0.4), rng.uniform(0.0, 0.4), rng.uniform(0.5, 1.0),
                    rng.uniform(0.5, 1.0)};
            build = [gt](Graph& g, NodeId x) { return l_box(g, g.sigmoid(x), g.constant(gt)); };
        } else if (name == "pair") {
            Mask2D prev = random_mask(rng, H, W);
            Mask2D next = random_mask(rng, H, W);
            PairNetParams params = PairNetParams::init(Rng::mix(seed, 0xc0ffee + uint64_t(trial)));
            build = [prev, next, params](Graph& g, NodeId x) {
                std::vector<PairSpecEntry> preds{{g.sigmoid(x), &prev, &next}};
                LPairResult lp = l_pair(g, preds, params, 1.0);
                return lp.node;
            };
        } else {
            throw std::invalid_argument("unknown loss name '" + name + "'");
        }

        GradCheckReport rep = grad_check(build, x0, kH, tol);
        agg.max_rel_err = std::max(agg.max_rel_err, rep.max_rel_err);
        agg.checked += rep.checked;
        agg.excluded += rep.excluded;
        agg.pass = agg.pass && rep.pass;
    }
    return agg;
}

VerifySummary verify_gradients(int inputs_per_loss, uint64_t seed, bool log_lines) {
    static const char* kLosses[] = {"ovlp", "div",    "align", "edge", "cline",
                                    "anat", "region", "conf",  "box",  "pair"};
    VerifySummary out;
    char buf[160];
    for (const char* name : kLosses) {
        GradCheckReport rep = check_loss_gradients(name, inputs_per_loss, seed);
        out.grad_max_rel_err = std::max(out.grad_max_rel_err, rep.max_rel_err);
        out.grad_excluded += rep.excluded;
        out.pass = out.pass && rep.pass;
        std::snprintf(buf, sizeof(buf), "grad %-6s max_rel_err=%.3g checked=%d excluded=%d %s\n",
                      name, rep.max_rel_err, rep.checked, rep.excluded, rep.pass ? "ok" : "FAIL");
        out.detail += buf;
        if (log_lines) std::fputs(buf, stdout);
    }
    return out;
}

namespace {

// direct Sobel edge-loss evaluation, no graph involved
double edge_loss_direct(const Tensor& p, const Tensor& y, double eps) {
    static const double kx[9] = {-1, 0, 1, -2, 0, 2, -1, 0, 1};
    static const double ky[9] = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
    const int h = p.h, w = p.w;
    auto grad_mag = [&](const Tensor& f) {
        std::vector<double> out(size_t(h) * size_t(w));
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double dx = 0.0, dy = 0.0;
                for (int a = -1; a <= 1; ++a)
                    for (int b = -1; b <= 1; ++b) {
                        int ii = i + a, jj = j + b;
                        if (ii < 0 || ii >= h || jj < 0 || jj >= w) continue;
                        dx += kx[(a + 1) * 3 + (b + 1)] * f.at(0, ii, jj);
                        dy += ky[(a + 1) * 3 + (b + 1)] * f.at(0, ii, jj);
                    }
                out[size_t(i) * w + j] = std::sqrt(dx * dx + dy * dy + eps);
            }
        return out;
    };
    std::vector<double> gp = grad_mag(p), gy = grad_mag(y);
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < gp.size(); ++i) {
        num += gp[i] * gy[i];
        den += gp[i] * gp[i] + gy[i] * gy[i];
    }
    return 1.0 - (2.0 * num + eps) / (den + eps);
}

}  // namespace

VerifySummary verify_metrics(int random_pairs, uint64_t seed, bool log_lines) {
    VerifySummary out;
    char buf[200];
    Rng rng(seed);
    int d2_bad = 0, dt_bad = 0, bnd_bad = 0, dil_bad = 0, ch_bad = 0, hd_bad = 0;
    for (int t = 0; t < random_pairs; ++t) {
        int h = 4 + rng.uniform_int(29);  // up to 32
        int w = 4 + rng.uniform_int(29);
        double density = rng.uniform(0.02, 0.4);
        Mask2D a = random_mask(rng, h, w, t % 17 == 0 ? 0.0 : density);
        Mask2D b = random_mask(rng, h, w, t % 23 == 0 ? 0.0 : density);
        ++out.metric_cases;

        if (squared_edt(a) != oracle::squared_edt(a)) ++d2_bad;
        DistanceField df = distance_transform(a);
        std::vector<int64_t> od2 = oracle::squared_edt(a);
        for (size_t i = 0; i < od2.size(); ++i)
            if (df.dist.data[i] != float(std::sqrt(double(od2[i])))) {
                ++dt_bad;
                break;
            }
        if (boundary(a).data != oracle::boundary(a).data) ++bnd_bad;
        int r = rng.uniform_int(5);
        if (dilate(a, r).data != oracle::dilate(a, r).data) ++dil_bad;

        Mask2D ba = boundary(a), bb = boundary(b);
        if (chamfer(ba, bb).value != oracle::chamfer(ba, bb)) ++ch_bad;
        if (hd95(a, b).value != oracle::hd95(a, b)) ++hd_bad;
    }
    out.metric_mismatches = d2_bad + dt_bad + bnd_bad + dil_bad + ch_bad + hd_bad;
    std::snprintf(buf, sizeof(buf),
                  "metrics %d cases: edt=%d dt=%d boundary=%d dilate=%d chamfer=%d hd95=%d "
                  "mismatches\n",
                  out.metric_cases, d2_bad, dt_bad, bnd_bad, dil_bad, ch_bad, hd_bad);
    out.detail += buf;
    if (log_lines) std::fputs(buf, stdout);

    // frozen fixtures: these fail if someone swaps a kernel or a mix weight
    {
        Rng frng(Rng::mix(seed, 0xf1));
        Tensor p(1, 8, 8), y = random_mask_tensor(frng, 8, 8);
        for (double& v : p.v) v = frng.uniform(0.0, 1.0);
        Graph g;
        double got = g.val(l_edge(g, g.constant(p), g.constant(y))).item();
        double want = edge_loss_direct(p, y, 1e-6);
        bool ok = std::abs(got - want) < 1e-9;
        if (!ok) ++out.metric_mismatches;
        std::snprintf(buf, sizeof(buf), "fixture edge_loss got=%.12g want=%.12g %s\n", got, want,
                      ok ? "ok" : "FAIL");
        out.detail += buf;
        if (log_lines) std::fputs(buf, stdout);
    }
    {
        // balanced mask, zero logits: closed-form region loss
        constexpr double eps = 1e-6;
        Tensor y(1, 8, 8);
        for (int j = 0; j < 32; ++j) y.v[size_t(j)] = 1.0;
        Graph g;
        double got = g.val(l_region(g, g.constant(Tensor(1, 8, 8)), g.constant(y))).item();
        double n = 64.0;
        double bce = -std::log(0.5 + eps);
        double dice = 1.0 - (n / 2.0 + eps) / (n + eps);
        double want = 0.5 * bce + 0.5 * dice;
        bool ok = std::abs(got - want) < 1e-9;
        if (!ok) ++out.metric_mismatches;
        std::snprintf(buf, sizeof(buf), "fixture region_loss got=%.12g want=%.12g %s\n", got, want,
                      ok ? "ok" : "FAIL");
        out.detail += buf;
        if (log_lines) std::fputs(buf, stdout);
    }
    out.pass = out.metric_mismatches == 0;
    return out;
}

}  // namespace xseg
