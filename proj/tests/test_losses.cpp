#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "xseg/losses.hpp"
#include "xseg/rng.hpp"

using namespace xseg;

namespace {

Tensor field(std::initializer_list<double> vals, int h, int w) {
    Tensor t(1, h, w);
    std::copy(vals.begin(), vals.end(), t.v.begin());
    return t;
}

Tensor random_unit(Rng& rng, int h, int w) {
    Tensor t(1, h, w);
    for (double& v : t.v) v = rng.uniform(0.0, 1.0);
    return t;
}

Tensor binary_square(int h, int w, int i0, int j0, int side) {
    Tensor t(1, h, w);
    for (int i = i0; i < i0 + side; ++i)
        for (int j = j0; j < j0 + side; ++j) t.at(0, i, j) = 1.0;
    return t;
}

double eval(NodeId (*op)(Graph&, NodeId, NodeId, double), const Tensor& a, const Tensor& b,
            double eps = 1e-6) {
    Graph g;
    return g.val(op(g, g.constant(a), g.constant(b), eps)).item();
}

// plain-array soft skeleton, mirrors the iteration independent of the graph
std::vector<double> skeleton_oracle(const Tensor& p, int k) {
    const int h = p.h, w = p.w;
    auto pool = [&](const std::vector<double>& f, bool take_max) {
        std::vector<double> out(f.size());
        for (int i = 0; i < h; ++i)
            for (int j = 0; j < w; ++j) {
                double best = f[size_t(std::clamp(i - 1, 0, h - 1)) * w + std::clamp(j - 1, 0, w - 1)];
                for (int di = -1; di <= 1; ++di)
                    for (int dj = -1; dj <= 1; ++dj) {
                        int ii = std::clamp(i + di, 0, h - 1), jj = std::clamp(j + dj, 0, w - 1);
                        double v = f[size_t(ii) * w + jj];
                        best = take_max ? std::max(best, v) : std::min(best, v);
                    }
                out[size_t(i) * w + j] = best;
            }
        return out;
    };
    auto open = [&](const std::vector<double>& f) { return pool(pool(f, false), true); };
    std::vector<double> cur = p.v;
    std::vector<double> skel(cur.size());
    std::vector<double> o = open(cur);
    for (size_t i = 0; i < skel.size(); ++i) skel[i] = std::max(0.0, cur[i] - o[i]);
    for (int t = 1; t <= k; ++t) {
        cur = pool(cur, false);
        o = open(cur);
        for (size_t i = 0; i < skel.size(); ++i) {
            double delta = std::max(0.0, cur[i] - o[i]);
            skel[i] += std::max(0.0, delta * (1.0 - skel[i]));
        }
    }
    for (double& v : skel) v = std::min(v, 1.0);
    return skel;
}

}  // namespace

TEST_CASE("overlap penalty closed forms") {
    Tensor m = binary_square(4, 4, 1, 1, 2);
    Graph g;
    double same = g.val(l_ovlp(g, g.constant(m), g.constant(m))).item();
    CHECK(same == doctest::Approx(0.0).epsilon(1e-6));

    Tensor a = field({1.0, 0.0}, 1, 2), b = field({0.0, 1.0}, 1, 2);
    CHECK(eval(l_ovlp, a, b) == doctest::Approx(1.0).epsilon(1e-5));

    Tensor p = field({1.0, 0.0}, 1, 2), phi = field({0.5, 0.5}, 1, 2);
    CHECK(eval(l_ovlp, p, phi) == doctest::Approx(0.5).epsilon(1e-5));
}

TEST_CASE("overlap penalty rejects negative attribution") {
    Graph g;
    Tensor phi = field({-0.1, 0.2}, 1, 2);
    CHECK_THROWS(l_ovlp(g, g.constant(Tensor(1, 1, 2, 0.5)), g.constant(phi)));
}

TEST_CASE("divergence penalty closed forms") {
    Tensor same = field({0.5, 0.5}, 1, 2);
    CHECK(eval(l_div, same, same) == doctest::Approx(0.0).epsilon(1e-5));

    Tensor p = field({1.0, 0.0}, 1, 2), phin = field({0.5, 0.5}, 1, 2);
    CHECK(eval(l_div, p, phin) == doctest::Approx(std::log(2.0) / 2.0).epsilon(1e-4));

    Tensor swapped = field({0.5, 0.5}, 1, 2);
    CHECK(eval(l_div, swapped, same) == doctest::Approx(0.0).epsilon(1e-5));
}

TEST_CASE("alignment couples overlap and divergence") {
    Tensor p = field({1.0, 0.0}, 1, 2);
    Tensor phi = field({0.5, 0.5}, 1, 2);
    LossWeights w;
    Graph g;
    double got = g.val(l_align(g, g.constant(p), g.constant(phi), g.constant(phi), w)).item();
    CHECK(got == doctest::Approx(0.5 + 0.2 * std::log(2.0) / 2.0).epsilon(1e-4));

    LossWeights w0;
    w0.lambda_div = 0.0;
    Graph g2;
    double bare = g2.val(l_align(g2, g2.constant(p), g2.constant(phi), g2.constant(phi), w0)).item();
    double ovlp = eval(l_ovlp, p, phi);
    CHECK(bare == doctest::Approx(ovlp).epsilon(1e-12));
}

TEST_CASE("edge penalty closed forms") {
    Tensor y = binary_square(8, 8, 2, 2, 4);
    Graph g;
    double same = g.val(l_edge(g, g.constant(y), g.constant(y))).item();
    CHECK(same == doctest::Approx(0.0).epsilon(1e-9));

    Graph g2;
    double flat = g2.val(l_edge(g2, g2.constant(Tensor(1, 8, 8, 0.0)), g2.constant(y))).item();
    CHECK(flat > 0.9);

    Graph g3;
    double empty =
        g3.val(l_edge(g3, g3.constant(Tensor(1, 8, 8, 0.0)), g3.constant(Tensor(1, 8, 8, 0.0)))).item();
    CHECK(empty == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("soft skeleton keeps a one pixel line intact") {
    Tensor line(1, 5, 16);
    for (int j = 2; j < 14; ++j) line.at(0, 2, j) = 1.0;
    Graph g;
    NodeId s = soft_skeleton(g, g.constant(line), 5);
    for (size_t i = 0; i < line.size(); ++i) CHECK(g.val(s).v[i] == doctest::Approx(line.v[i]));
}

TEST_CASE("soft skeleton of zeros is zero") {
    Graph g;
    NodeId s = soft_skeleton(g, g.constant(Tensor(1, 6, 6)), 4);
    for (double v : g.val(s).v) CHECK(v == 0.0);
}

TEST_CASE("soft skeleton of a solid square shrinks strictly inside") {
    Tensor sq = binary_square(9, 9, 2, 2, 5);
    Graph g;
    NodeId s = soft_skeleton(g, g.constant(sq), 3);
    const Tensor& out = g.val(s);
    double mass = 0.0;
    for (int i = 0; i < 9; ++i)
        for (int j = 0; j < 9; ++j) {
            mass += out.at(0, i, j);
            if (out.at(0, i, j) > 0.0) {
                CHECK(i >= 3);
                CHECK(i <= 5);
                CHECK(j >= 3);
                CHECK(j <= 5);
            }
        }
    CHECK(mass < 25.0);
    CHECK(mass > 0.0);
    std::vector<double> want = skeleton_oracle(sq, 3);
    for (size_t i = 0; i < want.size(); ++i) CHECK(out.v[i] == doctest::Approx(want[i]));
}

TEST_CASE("skeleton support never exceeds the input support") {
    Rng rng(31);
    for (int t = 0; t < 10; ++t) {
        Tensor p = random_unit(rng, 10, 10);
        for (double& v : p.v)
            if (rng.uniform() < 0.5) v = 0.0;
        Graph g;
        const Tensor& s = g.val(soft_skeleton(g, g.constant(p), 4));
        for (size_t i = 0; i < p.size(); ++i)
            if (s.v[i] > 0.0) CHECK(p.v[i] > 0.0);
    }
}

TEST_CASE("centerline penalty closed forms") {
    Tensor y = binary_square(12, 12, 3, 3, 6);
    Graph g;
    CHECK(g.val(l_cline(g, g.constant(y), g.constant(y), 4)).item() ==
          doctest::Approx(0.0).epsilon(1e-5));

    Tensor a(1, 12, 12), b(1, 12, 12);
    for (int j = 1; j < 11; ++j) {
        a.at(0, 2, j) = 1.0;
        b.at(0, 9, j) = 1.0;
    }
    Graph g2;
    CHECK(g2.val(l_cline(g2, g2.constant(a), g2.constant(b), 4)).item() ==
          doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("centerline penalty shrinks as a dilated line tightens") {
    // 16x16 line phantom; prediction = line dilated by 1 then by 0
    Tensor line(1, 16, 16);
    for (int j = 2; j < 14; ++j) line.at(0, 8, j) = 1.0;
    Tensor fat(1, 16, 16);
    for (int i = 7; i <= 9; ++i)
        for (int j = 1; j < 15; ++j) fat.at(0, i, j) = 1.0;
    Graph g;
    double loose = g.val(l_cline(g, g.constant(fat), g.constant(line), 5)).item();
    Graph g2;
    double tight = g2.val(l_cline(g2, g2.constant(line), g2.constant(line), 5)).item();
    CHECK(loose > 0.0);
    CHECK(loose < 1.0);
    CHECK(tight < loose);
}

TEST_CASE("anatomy penalty is the even mix") {
    Tensor y = binary_square(10, 10, 3, 3, 4);
    Graph g;
    CHECK(g.val(l_anat(g, g.constant(y), g.constant(y), 3)).item() ==
          doctest::Approx(0.0).epsilon(1e-5));

    Rng rng(41);
    Tensor p = random_unit(rng, 10, 10);
    Graph g2;
    NodeId pc = g2.constant(p), yc = g2.constant(y);
    double anat = g2.val(l_anat(g2, pc, yc, 3)).item();
    double edge = g2.val(l_edge(g2, pc, yc)).item();
    double cline = g2.val(l_cline(g2, pc, yc, 3)).item();
    CHECK(anat == doctest::Approx(0.5 * edge + 0.5 * cline).epsilon(1e-12));
}

TEST_CASE("region loss closed forms") {
    Tensor y = binary_square(8, 8, 0, 0, 4);  // 16 ones
    Tensor strong(1, 8, 8, -20.0);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) strong.at(0, i, j) = 20.0;
    Graph g;
    CHECK(g.val(l_region(g, g.constant(strong), g.constant(y))).item() ==
          doctest::Approx(0.0).epsilon(1e-4));

    // zero logits, balanced mask
    Tensor half(1, 8, 8);
    for (int j = 0; j < 32; ++j) half.v[size_t(j)] = 1.0;
    Graph g2;
    double got = g2.val(l_region(g2, g2.constant(Tensor(1, 8, 8, 0.0)), g2.constant(half))).item();
    CHECK(got == doctest::Approx(0.5 * std::log(2.0) + 0.5 * 0.5).epsilon(1e-4));

    Graph g3;
    CHECK(g3.val(l_region(g3, g3.constant(Tensor(1, 8, 8, -25.0)), g3.constant(Tensor(1, 8, 8, 0.0))))
              .item() == doctest::Approx(0.0).epsilon(1e-4));
}

TEST_CASE("confidence loss closed forms") {
    Tensor ones(1, 2, 2, 1.0);
    Graph g;
    CHECK(g.val(l_conf(g, g.constant(ones), g.constant(ones))).item() ==
          doctest::Approx(0.0).epsilon(1e-5));

    Graph g2;
    Tensor half(1, 2, 2, 0.5);
    Tensor any(1, 2, 2, 0.123);
    CHECK(g2.val(l_conf(g2, g2.constant(half), g2.constant(any))).item() ==
          doctest::Approx(std::log(2.0)).epsilon(1e-5));

    Graph g3;
    CHECK(g3.val(l_conf(g3, g3.constant(Tensor(1, 1, 1, 0.9)), g3.constant(Tensor(1, 1, 1, 1.0))))
              .item() == doctest::Approx(-std::log(0.9)).epsilon(1e-4));
}

TEST_CASE("confidence loss does not backprop into the target field") {
    Graph g;
    NodeId raw = g.input(Tensor(1, 2, 2, 0.3));
    NodeId loss = l_conf(g, g.constant(Tensor(1, 2, 2, 0.4)), raw);
    g.backward(loss);
    for (double v : g.grad(raw).v) CHECK(v == 0.0);
}

TEST_CASE("box loss closed forms") {
    Tensor a(4, 1, 1), b(4, 1, 1);
    a.v = {0.0, 0.0, 1.0, 1.0};
    b.v = {0.0, 0.0, 0.0, 0.0};
    Graph g;
    CHECK(g.val(l_box(g, g.constant(a), g.constant(a))).item() == 0.0);
    CHECK(g.val(l_box(g, g.constant(a), g.constant(b))).item() == doctest::Approx(0.5));

    Tensor c(4, 1, 1), d(4, 1, 1);
    c.v = {0.1, 0.2, 0.8, 0.9};
    d.v = {0.2, 0.2, 0.7, 1.0};
    Graph g2;
    CHECK(g2.val(l_box(g2, g2.constant(c), g2.constant(d))).item() == doctest::Approx(0.075));
}

TEST_CASE("losses are nonnegative over random inputs") {
    Rng rng(57);
    for (int t = 0; t < 25; ++t) {
        Tensor p = random_unit(rng, 8, 8);
        Tensor phi = random_unit(rng, 8, 8);
        Tensor y(1, 8, 8);
        for (double& v : y.v) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
        Tensor s(1, 8, 8);
        for (double& v : s.v) v = rng.uniform(-3.0, 3.0);
        Graph g;
        NodeId pc = g.constant(p), yc = g.constant(y), phic = g.constant(phi);
        bool deg = false;
        Tensor phin = phi;
        double mass = 0.0;
        for (double v : phin.v) mass += v;
        for (double& v : phin.v) v /= mass;
        (void)deg;
        CHECK(g.val(l_ovlp(g, pc, phic)).item() >= -1e-5);
        CHECK(g.val(l_div(g, pc, g.constant(phin))).item() >= -1e-5);
        CHECK(g.val(l_edge(g, pc, yc)).item() >= -1e-5);
        CHECK(g.val(l_cline(g, pc, yc, 3)).item() >= -1e-5);
        CHECK(g.val(l_region(g, g.constant(s), yc)).item() >= -1e-5);
        CHECK(g.val(l_conf(g, pc, g.constant(random_unit(rng, 8, 8)))).item() >= -1e-5);
    }
}

TEST_CASE("overlap and region dice are transpose invariant") {
    Rng rng(61);
    for (int t = 0; t < 10; ++t) {
        Tensor p = random_unit(rng, 6, 9);
        Tensor y(1, 6, 9);
        for (double& v : y.v) v = rng.uniform() < 0.5 ? 1.0 : 0.0;
        Tensor pt(1, 9, 6), yt(1, 9, 6);
        for (int i = 0; i < 6; ++i)
            for (int j = 0; j < 9; ++j) {
                pt.at(0, j, i) = p.at(0, i, j);
                yt.at(0, j, i) = y.at(0, i, j);
            }
        Graph g1, g2;
        CHECK(g1.val(l_ovlp(g1, g1.constant(p), g1.constant(y))).item() ==
              doctest::Approx(g2.val(l_ovlp(g2, g2.constant(pt), g2.constant(yt))).item())
                  .epsilon(1e-12));
        Graph g3, g4;
        CHECK(g3.val(l_region(g3, g3.constant(p), g3.constant(y))).item() ==
              doctest::Approx(g4.val(l_region(g4, g4.constant(pt), g4.constant(yt))).item())
                  .epsilon(1e-12));
    }
}

TEST_CASE("a wrong derivative kernel passes grad checks but fails the value fixture") {
    // swapping in a broken kernel keeps the gradients self-consistent, so only
    // the frozen-value comparison can catch it
    std::array<double, 9> bad_kx = {1, 0, -1, 2, 0, -2, 1, 0, 1};  // corner sign flipped
    std::array<double, 9> ky = {-1, -2, -1, 0, 0, 0, 1, 2, 1};
    Rng rng(71);
    Tensor p = random_unit(rng, 8, 8);
    Tensor y(1, 8, 8);
    for (double& v : y.v) v = rng.uniform() < 0.4 ? 1.0 : 0.0;

    Graph g1, g2;
    double broken = g1.val(l_edge_with_kernels(g1, g1.constant(p), g1.constant(y), bad_kx, ky)).item();
    double sobel = g2.val(l_edge(g2, g2.constant(p), g2.constant(y))).item();
    CHECK(broken != doctest::Approx(sobel).epsilon(1e-9));  // fixture catches it

    GradCheckReport rep = grad_check(
        [&](Graph& g, NodeId in) {
            return l_edge_with_kernels(g, g.sigmoid(in), g.constant(y), bad_kx, ky);
        },
        p, 1e-3, 1e-3);
    CHECK(rep.pass);  // gradients of the wrong kernel are still consistent
}
