#include "xseg/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace xseg {

namespace {

struct Eval {
    double value;
    uint64_t sig;
};

Eval eval_at(const GraphBuilder& f, const Tensor& x) {
    Graph g;
    NodeId in = g.input(x);
    NodeId root = f(g, in);
    double v = g.val(root).item();
    if (!std::isfinite(v)) throw std::runtime_error("grad_check: non-finite objective at probe");
    return {v, g.signature()};
}

}  // namespace

GradCheckReport grad_check(const GraphBuilder& f, const Tensor& x0, double h, double tol) {
    if (h <= 0.0) throw std::invalid_argument("grad_check: h must be positive");
    Graph g;
    NodeId in = g.input(x0);
    NodeId root = f(g, in);
    if (!std::isfinite(g.val(root).item()))
        throw std::runtime_error("grad_check: non-finite objective at x0");
    const uint64_t sig0 = g.signature();
    g.backward(root);
    const Tensor analytic = g.grad(in);

    GradCheckReport rep;
    Tensor x = x0;
    for (size_t k = 0; k < x0.size(); ++k) {
        x.v[k] = x0.v[k] + h;
        Eval plus = eval_at(f, x);
        x.v[k] = x0.v[k] - h;
        Eval minus = eval_at(f, x);
        x.v[k] = x0.v[k];
        if (plus.sig != sig0 || minus.sig != sig0) {
            ++rep.excluded;
            continue;
        }
        double fd = (plus.value - minus.value) / (2.0 * h);
        double a = analytic.v[k];
        double rel = std::abs(a - fd) / std::max({1.0, std::abs(a), std::abs(fd)});
        rep.max_rel_err = std::max(rep.max_rel_err, rel);
        ++rep.checked;
    }
    rep.pass = rep.checked > 0 && rep.max_rel_err < tol;
    return rep;
}

}  // namespace xseg
