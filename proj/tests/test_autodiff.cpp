#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "xseg/gradcheck.hpp"
#include "xseg/losses.hpp"
#include "xseg/rng.hpp"

using namespace xseg;

namespace {

Tensor field(std::initializer_list<double> vals, int h, int w) {
    Tensor t(1, h, w);
    std::copy(vals.begin(), vals.end(), t.v.begin());
    return t;
}

}  // namespace

TEST_CASE("sigmoid value and derivative at zero") {
    Graph g;
    NodeId x = g.input(Tensor::scalar(0.0));
    NodeId y = g.sigmoid(x);
    CHECK(g.val(y).item() == doctest::Approx(0.5));
    g.backward(y);
    CHECK(g.grad(x).v[0] == doctest::Approx(0.25));
}

TEST_CASE("sum backward is all ones") {
    Graph g;
    NodeId x = g.input(Tensor(1, 3, 2, 1.5));
    NodeId s = g.sum(x);
    g.backward(s);
    for (double v : g.grad(x).v) CHECK(v == 1.0);
}

TEST_CASE("elementwise square gradient") {
    Graph g;
    NodeId x = g.input(field({1.0, 2.0}, 1, 2));
    NodeId s = g.sum(g.mul(x, x));
    g.backward(s);
    CHECK(g.grad(x).v[0] == doctest::Approx(2.0));
    CHECK(g.grad(x).v[1] == doctest::Approx(4.0));
}

TEST_CASE("mean of relu routes half weight to the active lane") {
    Graph g;
    NodeId x = g.input(field({-1.0, 3.0}, 1, 2));
    NodeId r = g.mean(g.relu(x));
    g.backward(r);
    CHECK(g.grad(x).v[0] == 0.0);
    CHECK(g.grad(x).v[1] == doctest::Approx(0.5));
}

TEST_CASE("conv2d with an identity kernel reproduces the input") {
    Graph g;
    Rng rng(3);
    Tensor x(1, 5, 7);
    for (double& v : x.v) v = rng.uniform(-1.0, 1.0);
    Tensor w(1, 3, 3);
    w.at(0, 1, 1) = 1.0;
    NodeId out = g.conv2d(g.input(x), g.input(w), g.input(Tensor(1, 1, 1)), 1, 1, 3, 1);
    for (size_t i = 0; i < x.size(); ++i) CHECK(g.val(out).v[i] == doctest::Approx(x.v[i]));
}

TEST_CASE("minpool on a constant field routes gradient to one representative") {
    Graph g;
    NodeId x = g.input(Tensor(1, 4, 4, 2.5));
    NodeId p = g.minpool3(x);
    for (double v : g.val(p).v) CHECK(v == doctest::Approx(2.5));
    NodeId s = g.sum(p);
    g.backward(s);
    // every output window picked exactly one argmin cell; mass is conserved
    double total = 0.0;
    for (double v : g.grad(x).v) total += v;
    CHECK(total == doctest::Approx(16.0));
    // first-index tie break: the top-left window representative is (0,0)
    CHECK(g.grad(x).v[0] >= 1.0);
}

TEST_CASE("stop_gradient blocks the adjoint") {
    Graph g;
    NodeId x = g.input(field({1.0, 2.0}, 1, 2));
    NodeId s = g.sum(g.mul(g.stop_gradient(x), x));
    g.backward(s);
    // d/dx de product sees only the live factor
    CHECK(g.grad(x).v[0] == doctest::Approx(1.0));
    CHECK(g.grad(x).v[1] == doctest::Approx(2.0));
}

TEST_CASE("repeated backward accumulates") {
    Graph g;
    NodeId x = g.input(field({1.0, -2.0}, 1, 2));
    NodeId s = g.sum(x);
    g.backward(s);
    g.backward(s);
    for (double v : g.grad(x).v) CHECK(v == doctest::Approx(2.0));
    g.zero_grads();
    g.backward(s);
    for (double v : g.grad(x).v) CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("backward requires a scalar root") {
    Graph g;
    NodeId x = g.input(Tensor(1, 2, 2, 1.0));
    CHECK_THROWS_AS(g.backward(x), std::invalid_argument);
}

TEST_CASE("shape mismatch names both shapes") {
    Graph g;
    NodeId a = g.input(Tensor(1, 2, 2));
    NodeId b = g.input(Tensor(1, 3, 2));
    try {
        g.add(a, b);
        FAIL("expected throw");
    } catch (const std::invalid_argument& e) {
        std::string msg = e.what();
        CHECK(msg.find("(1,2,2)") != std::string::npos);
        CHECK(msg.find("(1,3,2)") != std::string::npos);
    }
}

TEST_CASE("adjoint linearity") {
    Rng rng(11);
    for (int t = 0; t < 20; ++t) {
        Tensor x(1, 4, 4);
        for (double& v : x.v) v = rng.uniform(-1.0, 1.0);
        const double a = rng.uniform(-2.0, 2.0), b = rng.uniform(-2.0, 2.0);
        auto grad_of = [&](auto&& make_root) {
            Graph g;
            NodeId in = g.input(x);
            g.backward(make_root(g, in));
            return g.grad(in);
        };
        Tensor gf = grad_of([](Graph& g, NodeId in) { return g.sum(g.mul(in, in)); });
        Tensor gg = grad_of([](Graph& g, NodeId in) { return g.mean(g.sigmoid(in)); });
        Tensor gc = grad_of([&](Graph& g, NodeId in) {
            return g.add(g.mul_const(g.sum(g.mul(in, in)), a),
                         g.mul_const(g.mean(g.sigmoid(in)), b));
        });
        for (size_t i = 0; i < x.size(); ++i)
            CHECK(gc.v[i] == doctest::Approx(a * gf.v[i] + b * gg.v[i]).epsilon(1e-9));
    }
}

TEST_CASE("grad_check passes on a smooth objective") {
    Rng rng(7);
    Tensor x(1, 4, 4);
    for (double& v : x.v) v = rng.uniform(-1.0, 1.0);
    GradCheckReport rep = grad_check(
        [](Graph& g, NodeId in) { return g.sum(g.mul(in, in)); }, x, 1e-3, 1e-4);
    CHECK(rep.pass);
    CHECK(rep.excluded == 0);
}

TEST_CASE("grad_check excludes a coordinate pinned on a relu kink") {
    Tensor x = field({0.0, 1.0, -1.0, 0.5}, 2, 2);
    GradCheckReport rep = grad_check(
        [](Graph& g, NodeId in) { return g.sum(g.relu(in)); }, x, 1e-3, 1e-4);
    CHECK(rep.excluded == 1);
    CHECK(rep.checked == 3);
    CHECK(rep.pass);
}

TEST_CASE("grad_check covers the alignment loss against a fixed field") {
    Rng rng(21);
    Tensor x(1, 8, 8);
    for (double& v : x.v) v = rng.uniform(-2.0, 2.0);
    Tensor phi(1, 8, 8);
    for (double& v : phi.v) v = rng.uniform(0.0, 1.0);
    GradCheckReport rep = grad_check(
        [phi](Graph& g, NodeId in) { return l_ovlp(g, g.sigmoid(in), g.constant(phi)); }, x, 1e-3,
        1e-3);
    CHECK(rep.pass);
}

TEST_CASE("bilinear resize is the identity at equal shape and interpolates at 2x") {
    Graph g;
    Tensor x = field({0.0, 1.0, 2.0, 3.0}, 2, 2);
    NodeId same = g.bilinear_resize(g.input(x), 2, 2);
    for (size_t i = 0; i < x.size(); ++i) CHECK(g.val(same).v[i] == x.v[i]);
    NodeId up = g.bilinear_resize(g.input(x), 3, 3);
    CHECK(g.val(up).at(0, 0, 0) == doctest::Approx(0.0));
    CHECK(g.val(up).at(0, 2, 2) == doctest::Approx(3.0));
    CHECK(g.val(up).at(0, 1, 1) == doctest::Approx(1.5));  // center of the bilinear patch
}

TEST_CASE("nearest upsample duplicates and its adjoint sums") {
    Graph g;
    Tensor x = field({1.0, 2.0, 3.0, 4.0}, 2, 2);
    NodeId up = g.nearest_up2(g.input(x));
    CHECK(g.val(up).at(0, 0, 1) == 1.0);
    CHECK(g.val(up).at(0, 3, 3) == 4.0);
    NodeId s = g.sum(up);
    g.backward(s);
    for (double v : g.grad(0).v) CHECK(v == doctest::Approx(4.0));
}
