#include "xseg/graph.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace xseg {

namespace {

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
    throw std::invalid_argument(std::string(op) + ": incompatible shapes " + a.shape_str() +
                                " and " + b.shape_str());
}

}  // namespace

NodeId Graph::push(Node n) {
    nodes_.push_back(std::move(n));
    return NodeId(nodes_.size() - 1);
}

NodeId Graph::check(NodeId id) const {
    if (id < 0 || size_t(id) >= nodes_.size())
        throw std::invalid_argument("node id " + std::to_string(id) + " not in this graph");
    return id;
}

NodeId Graph::input(Tensor t) {
    Node n;
    n.op = Op::Input;
    n.val = std::move(t);
    return push(std::move(n));
}

NodeId Graph::binary(Op op, NodeId a, NodeId b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    const bool as = ta.is_scalar(), bs = tb.is_scalar();
    if (!as && !bs && !ta.same_shape(tb)) shape_error("elementwise op", ta, tb);
    const Tensor& shape = as ? tb : ta;
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.val = Tensor(shape.ch, shape.h, shape.w);
    const size_t m = n.val.size();
    for (size_t i = 0; i < m; ++i) {
        double x = ta.v[as ? 0 : i];
        double y = tb.v[bs ? 0 : i];
        switch (op) {
            case Op::Add: n.val.v[i] = x + y; break;
            case Op::Sub: n.val.v[i] = x - y; break;
            case Op::Mul: n.val.v[i] = x * y; break;
            case Op::Div: n.val.v[i] = x / y; break;
            default: break;
        }
    }
    return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) { return binary(Op::Add, a, b); }
NodeId Graph::sub(NodeId a, NodeId b) { return binary(Op::Sub, a, b); }
NodeId Graph::mul(NodeId a, NodeId b) { return binary(Op::Mul, a, b); }
NodeId Graph::div(NodeId a, NodeId b) { return binary(Op::Div, a, b); }

NodeId Graph::add_const(NodeId a, double k) {
    Node n;
    n.op = Op::AddConst;
    n.a = check(a);
    n.k0 = k;
    n.val = val(a);
    for (double& v : n.val.v) v += k;
    return push(std::move(n));
}

NodeId Graph::mul_const(NodeId a, double k) {
    Node n;
    n.op = Op::MulConst;
    n.a = check(a);
    n.k0 = k;
    n.val = val(a);
    for (double& v : n.val.v) v *= k;
    return push(std::move(n));
}

NodeId Graph::relu(NodeId a) {
    Node n;
    n.op = Op::Relu;
    n.a = check(a);
    n.val = val(a);
    for (double& v : n.val.v) {
        sig_mix(v > 0.0 ? 0x9eu : 0x61u);
        if (v < 0.0) v = 0.0;
    }
    return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId a) {
    Node n;
    n.op = Op::Sigmoid;
    n.a = check(a);
    n.val = val(a);
    for (double& v : n.val.v) v = 1.0 / (1.0 + std::exp(-v));
    return push(std::move(n));
}

NodeId Graph::log_eps(NodeId a, double eps) {
    Node n;
    n.op = Op::LogEps;
    n.a = check(a);
    n.k0 = eps;
    n.val = val(a);
    for (double& v : n.val.v) v = std::log(v + eps);
    return push(std::move(n));
}

NodeId Graph::sqrt(NodeId a) {
    Node n;
    n.op = Op::Sqrt;
    n.a = check(a);
    n.val = val(a);
    for (double& v : n.val.v) v = std::sqrt(v);
    return push(std::move(n));
}

NodeId Graph::sum(NodeId a) {
    Node n;
    n.op = Op::Sum;
    n.a = check(a);
    double s = 0.0;
    for (double v : val(a).v) s += v;
    n.val = Tensor::scalar(s);
    return push(std::move(n));
}

NodeId Graph::mean(NodeId a) {
    Node n;
    n.op = Op::Mean;
    n.a = check(a);
    const Tensor& t = val(a);
    double s = 0.0;
    for (double v : t.v) s += v;
    n.val = Tensor::scalar(s / double(t.size()));
    return push(std::move(n));
}

NodeId Graph::conv2d(NodeId x, NodeId w, NodeId b, int out_ch, int in_ch, int k, int stride) {
    const Tensor& tx = val(x);
    const Tensor& tw = val(w);
    const Tensor& tb = val(b);
    if (k % 2 == 0 || k < 1) throw std::invalid_argument("conv2d: kernel must be odd");
    if (stride != 1 && stride != 2) throw std::invalid_argument("conv2d: stride must be 1 or 2");
    if (tx.ch != in_ch) shape_error("conv2d input", tx, tw);
    if (tw.ch != out_ch * in_ch || tw.h != k || tw.w != k) shape_error("conv2d weights", tw, tx);
    if (tb.ch != out_ch || tb.h != 1 || tb.w != 1) shape_error("conv2d bias", tb, tx);
    const int pad = k / 2;
    const int ho = (tx.h + 2 * pad - k) / stride + 1;
    const int wo = (tx.w + 2 * pad - k) / stride + 1;
    Node n;
    n.op = Op::Conv2d;
    n.a = x;
    n.b = w;
    n.c = b;
    n.i0 = out_ch;
    n.i1 = in_ch;
    n.i2 = k;
    n.i3 = stride;
    n.val = Tensor(out_ch, ho, wo);
    for (int oc = 0; oc < out_ch; ++oc) {
        for (int oi = 0; oi < ho; ++oi) {
            for (int oj = 0; oj < wo; ++oj) {
                double acc = tb.v[size_t(oc)];
                for (int ic = 0; ic < in_ch; ++ic) {
                    const double* wrow = &tw.v[(size_t(oc) * in_ch + ic) * k * k];
                    for (int ki = 0; ki < k; ++ki) {
                        int ii = oi * stride + ki - pad;
                        if (ii < 0 || ii >= tx.h) continue;
                        const double* xrow = &tx.v[(size_t(ic) * tx.h + ii) * tx.w];
                        for (int kj = 0; kj < k; ++kj) {
                            int jj = oj * stride + kj - pad;
                            if (jj < 0 || jj >= tx.w) continue;
                            acc += wrow[ki * k + kj] * xrow[jj];
                        }
                    }
                }
                n.val.at(oc, oi, oj) = acc;
            }
        }
    }
    return push(std::move(n));
}

NodeId Graph::dense(NodeId x, NodeId w, NodeId b, int out_dim, int in_dim) {
    const Tensor& tx = val(x);
    const Tensor& tw = val(w);
    const Tensor& tb = val(b);
    if (tx.ch != in_dim || tx.h != 1 || tx.w != 1) shape_error("dense input", tx, tw);
    if (int(tw.size()) != out_dim * in_dim) shape_error("dense weights", tw, tx);
    if (tb.ch != out_dim) shape_error("dense bias", tb, tx);
    Node n;
    n.op = Op::Dense;
    n.a = x;
    n.b = w;
    n.c = b;
    n.i0 = out_dim;
    n.i1 = in_dim;
    n.val = Tensor(out_dim, 1, 1);
    for (int o = 0; o < out_dim; ++o) {
        double acc = tb.v[size_t(o)];
        for (int i = 0; i < in_dim; ++i) acc += tw.v[size_t(o) * in_dim + i] * tx.v[size_t(i)];
        n.val.v[size_t(o)] = acc;
    }
    return push(std::move(n));
}

NodeId Graph::nearest_up2(NodeId a) {
    const Tensor& t = val(a);
    Node n;
    n.op = Op::NearestUp2;
    n.a = check(a);
    n.val = Tensor(t.ch, t.h * 2, t.w * 2);
    for (int c = 0; c < t.ch; ++c)
        for (int i = 0; i < t.h; ++i)
            for (int j = 0; j < t.w; ++j) {
                double v = t.at(c, i, j);
                n.val.at(c, 2 * i, 2 * j) = v;
                n.val.at(c, 2 * i, 2 * j + 1) = v;
                n.val.at(c, 2 * i + 1, 2 * j) = v;
                n.val.at(c, 2 * i + 1, 2 * j + 1) = v;
            }
    return push(std::move(n));
}

NodeId Graph::bilinear_resize(NodeId a, int out_h, int out_w) {
    const Tensor& t = val(a);
    if (out_h < t.h || out_w < t.w)
        throw std::invalid_argument("bilinear_resize: output must not be smaller than input");
    Node n;
    n.op = Op::Bilinear;
    n.a = check(a);
    n.i0 = out_h;
    n.i1 = out_w;
    n.val = t_bilinear_resize(t, out_h, out_w);
    return push(std::move(n));
}

NodeId Graph::maxpool3(NodeId a) {
    const Tensor& t = val(a);
    Node n;
    n.op = Op::MaxPool3;
    n.a = check(a);
    n.val = Tensor(t.ch, t.h, t.w);
    n.arg.resize(t.size());
    size_t out_idx = 0;
    for (int c = 0; c < t.ch; ++c) {
        for (int i = 0; i < t.h; ++i) {
            for (int j = 0; j < t.w; ++j, ++out_idx) {
                double best = -std::numeric_limits<double>::infinity();
                int32_t best_idx = -1;
                for (int di = -1; di <= 1; ++di) {
                    int ii = std::clamp(i + di, 0, t.h - 1);
                    for (int dj = -1; dj <= 1; ++dj) {
                        int jj = std::clamp(j + dj, 0, t.w - 1);
                        double v = t.at(c, ii, jj);
                        if (v > best) {
                            best = v;
                            best_idx = int32_t((size_t(c) * t.h + ii) * t.w + jj);
                        }
                    }
                }
                n.val.v[out_idx] = best;
                n.arg[out_idx] = best_idx;
                sig_mix(uint64_t(uint32_t(best_idx)) + 0x517cc1b727220a95ULL);
            }
        }
    }
    return push(std::move(n));
}

NodeId Graph::minpool3(NodeId a) { return mul_const(maxpool3(mul_const(a, -1.0)), -1.0); }

NodeId Graph::global_avg_pool(NodeId a) {
    const Tensor& t = val(a);
    Node n;
    n.op = Op::GlobalAvgPool;
    n.a = check(a);
    n.val = Tensor(t.ch, 1, 1);
    const double inv = 1.0 / double(t.h * t.w);
    for (int c = 0; c < t.ch; ++c) {
        double s = 0.0;
        for (int i = 0; i < t.h; ++i)
            for (int j = 0; j < t.w; ++j) s += t.at(c, i, j);
        n.val.v[size_t(c)] = s * inv;
    }
    return push(std::move(n));
}

NodeId Graph::channel_concat(NodeId a, NodeId b) {
    const Tensor& ta = val(a);
    const Tensor& tb = val(b);
    if (ta.h != tb.h || ta.w != tb.w) shape_error("channel_concat", ta, tb);
    Node n;
    n.op = Op::ChannelConcat;
    n.a = a;
    n.b = b;
    n.val = Tensor(ta.ch + tb.ch, ta.h, ta.w);
    std::copy(ta.v.begin(), ta.v.end(), n.val.v.begin());
    std::copy(tb.v.begin(), tb.v.end(), n.val.v.begin() + ta.v.size());
    return push(std::move(n));
}

NodeId Graph::stop_gradient(NodeId a) {
    Node n;
    n.op = Op::StopGrad;
    n.a = check(a);
    n.val = val(a);
    return push(std::move(n));
}

void Graph::zero_grads() {
    for (Node& n : nodes_)
        std::fill(n.grad.v.begin(), n.grad.v.end(), 0.0);
}

void Graph::backward(NodeId root) {
    check(root);
    if (!nodes_[root].val.is_scalar())
        throw std::invalid_argument("backward: root must be scalar, has shape " +
                                    nodes_[root].val.shape_str());
    // mark the subgraph below the root
    std::vector<uint8_t> reach(size_t(root) + 1, 0);
    reach[size_t(root)] = 1;
    for (NodeId id = root; id >= 0; --id) {
        if (!reach[size_t(id)]) continue;
        const Node& n = nodes_[size_t(id)];
        if (n.op == Op::StopGrad) continue;  // value flows, adjoint does not
        if (n.a >= 0) reach[size_t(n.a)] = 1;
        if (n.b >= 0) reach[size_t(n.b)] = 1;
        if (n.c >= 0) reach[size_t(n.c)] = 1;
    }
    // fresh adjoints for this pass live in `grad` of unreachable... no: use a
    // scratch pass, then fold into grad so repeated calls accumulate.
    std::vector<Tensor> adj(size_t(root) + 1);
    for (NodeId id = 0; id <= root; ++id)
        if (reach[size_t(id)]) adj[size_t(id)] = Tensor(nodes_[size_t(id)].val.ch, nodes_[size_t(id)].val.h, nodes_[size_t(id)].val.w);
    adj[size_t(root)].v[0] = 1.0;

    for (NodeId id = root; id >= 0; --id) {
        if (!reach[size_t(id)]) continue;
        Node& n = nodes_[size_t(id)];
        const Tensor& g = adj[size_t(id)];
        auto acc = [&](NodeId p) -> Tensor& { return adj[size_t(p)]; };
        switch (n.op) {
            case Op::Input:
            case Op::StopGrad:
                break;
            case Op::Add:
            case Op::Sub:
            case Op::Mul:
            case Op::Div: {
                const Tensor& ta = nodes_[size_t(n.a)].val;
                const Tensor& tb = nodes_[size_t(n.b)].val;
                Tensor& ga = acc(n.a);
                Tensor& gb = acc(n.b);
                const bool as = ta.is_scalar() && !tb.is_scalar();
                const bool bs = tb.is_scalar() && !ta.is_scalar();
                for (size_t i = 0; i < g.size(); ++i) {
                    double x = ta.v[as ? 0 : i];
                    double y = tb.v[bs ? 0 : i];
                    double gi = g.v[i];
                    double da = 0.0, db = 0.0;
                    switch (n.op) {
                        case Op::Add: da = gi; db = gi; break;
                        case Op::Sub: da = gi; db = -gi; break;
                        case Op::Mul: da = gi * y; db = gi * x; break;
                        case Op::Div: da = gi / y; db = -gi * x / (y * y); break;
                        default: break;
                    }
                    ga.v[as ? 0 : i] += da;
                    gb.v[bs ? 0 : i] += db;
                }
                break;
            }
            case Op::AddConst: {
                Tensor& ga = acc(n.a);
                for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i];
                break;
            }
            case Op::MulConst: {
                Tensor& ga = acc(n.a);
                for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * n.k0;
                break;
            }
            case Op::Relu: {
                const Tensor& x = nodes_[size_t(n.a)].val;
                Tensor& ga = acc(n.a);
                for (size_t i = 0; i < g.size(); ++i)
                    if (x.v[i] > 0.0) ga.v[i] += g.v[i];
                break;
            }
            case Op::Sigmoid: {
                Tensor& ga = acc(n.a);
                for (size_t i = 0; i < g.size(); ++i) {
                    double y = n.val.v[i];
                    ga.v[i] += g.v[i] * y * (1.0 - y);
                }
                break;
            }
            case Op::LogEps: {
                const Tensor& x = nodes_[size_t(n.a)].val;
                Tensor& ga = acc(n.a);
                for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] / (x.v[i] + n.k0);
                break;
            }
            case Op::Sqrt: {
                Tensor& ga = acc(n.a);
                for (size_t i = 0; i < g.size(); ++i) ga.v[i] += g.v[i] * 0.5 / n.val.v[i];
                break;
            }
            case Op::Sum: {
                Tensor& ga = acc(n.a);
                double gi = g.v[0];
                for (size_t i = 0; i < ga.size(); ++i) ga.v[i] += gi;
                break;
            }
            case Op::Mean: {
                Tensor& ga = acc(n.a);
                double gi = g.v[0] / double(ga.size());
                for (size_t i = 0; i < ga.size(); ++i) ga.v[i] += gi;
                break;
            }
            case Op::Conv2d: {
                const Tensor& tx = nodes_[size_t(n.a)].val;
                const Tensor& tw = nodes_[size_t(n.b)].val;
                Tensor& gx = acc(n.a);
                Tensor& gw = acc(n.b);
                Tensor& gb = acc(n.c);
                const int out_ch = n.i0, in_ch = n.i1, k = n.i2, stride = n.i3;
                const int pad = k / 2;
                const int ho = n.val.h, wo = n.val.w;
                for (int oc = 0; oc < out_ch; ++oc) {
                    for (int oi = 0; oi < ho; ++oi) {
                        for (int oj = 0; oj < wo; ++oj) {
                            double gv = g.at(oc, oi, oj);
                            if (gv == 0.0) continue;
                            gb.v[size_t(oc)] += gv;
                            for (int ic = 0; ic < in_ch; ++ic) {
                                const double* wrow = &tw.v[(size_t(oc) * in_ch + ic) * k * k];
                                double* gwrow = &gw.v[(size_t(oc) * in_ch + ic) * k * k];
                                for (int ki = 0; ki < k; ++ki) {
                                    int ii = oi * stride + ki - pad;
                                    if (ii < 0 || ii >= tx.h) continue;
                                    const double* xrow = &tx.v[(size_t(ic) * tx.h + ii) * tx.w];
                                    double* gxrow = &gx.v[(size_t(ic) * tx.h + ii) * tx.w];
                                    for (int kj = 0; kj < k; ++kj) {
                                        int jj = oj * stride + kj - pad;
                                        if (jj < 0 || jj >= tx.w) continue;
                                        gwrow[ki * k + kj] += gv * xrow[jj];
                                        gxrow[jj] += gv * wrow[ki * k + kj];
                                    }
                                }
                            }
                        }
                    }
                }
                break;
            }
            case Op::Dense: {
                const Tensor& tx = nodes_[size_t(n.a)].val;
                const Tensor& tw = nodes_[size_t(n.b)].val;
                Tensor& gx = acc(n.a);
                Tensor& gw = acc(n.b);
                Tensor& gb = acc(n.c);
                const int out_dim = n.i0, in_dim = n.i1;
                for (int o = 0; o < out_dim; ++o) {
                    double gv = g.v[size_t(o)];
                    gb.v[size_t(o)] += gv;
                    for (int i = 0; i < in_dim; ++i) {
                        gw.v[size_t(o) * in_dim + i] += gv * tx.v[size_t(i)];
                        gx.v[size_t(i)] += gv * tw.v[size_t(o) * in_dim + i];
                    }
                }
                break;
            }
            case Op::NearestUp2: {
                Tensor& ga = acc(n.a);
                const Tensor& t = nodes_[size_t(n.a)].val;
                for (int c = 0; c < t.ch; ++c)
                    for (int i = 0; i < t.h; ++i)
                        for (int j = 0; j < t.w; ++j)
                            ga.at(c, i, j) += g.at(c, 2 * i, 2 * j) + g.at(c, 2 * i, 2 * j + 1) +
                                              g.at(c, 2 * i + 1, 2 * j) + g.at(c, 2 * i + 1, 2 * j + 1);
                break;
            }
            case Op::Bilinear: {
                Tensor& ga = acc(n.a);
                const Tensor& t = nodes_[size_t(n.a)].val;
                const int oh = n.val.h, ow = n.val.w;
                const double si = oh > 1 ? double(t.h - 1) / double(oh - 1) : 0.0;
                const double sj = ow > 1 ? double(t.w - 1) / double(ow - 1) : 0.0;
                for (int c = 0; c < t.ch; ++c) {
                    for (int i = 0; i < oh; ++i) {
                        double fi = si * i;
                        int i0 = int(fi);
                        int i1 = std::min(i0 + 1, t.h - 1);
                        double ti = fi - i0;
                        for (int j = 0; j < ow; ++j) {
                            double fj = sj * j;
                            int j0 = int(fj);
                            int j1 = std::min(j0 + 1, t.w - 1);
                            double tj = fj - j0;
                            double gv = g.at(c, i, j);
                            ga.at(c, i0, j0) += gv * (1 - ti) * (1 - tj);
                            ga.at(c, i0, j1) += gv * (1 - ti) * tj;
                            ga.at(c, i1, j0) += gv * ti * (1 - tj);
                            ga.at(c, i1, j1) += gv * ti * tj;
                        }
                    }
                }
                break;
            }
            case Op::MaxPool3: {
                Tensor& ga = acc(n.a);
                for (size_t i = 0; i < g.size(); ++i) ga.v[size_t(n.arg[i])] += g.v[i];
                break;
            }
            case Op::GlobalAvgPool: {
                Tensor& ga = acc(n.a);
                const Tensor& t = nodes_[size_t(n.a)].val;
                const double inv = 1.0 / double(t.h * t.w);
                for (int c = 0; c < t.ch; ++c) {
                    double gv = g.v[size_t(c)] * inv;
                    for (int i = 0; i < t.h; ++i)
                        for (int j = 0; j < t.w; ++j) ga.at(c, i, j) += gv;
                }
                break;
            }
            case Op::ChannelConcat: {
                Tensor& ga = acc(n.a);
                Tensor& gb = acc(n.b);
                for (size_t i = 0; i < ga.size(); ++i) ga.v[i] += g.v[i];
                for (size_t i = 0; i < gb.size(); ++i) gb.v[i] += g.v[ga.size() + i];
                break;
            }
        }
    }
    // fold this pass into the persistent grads
    for (NodeId id = 0; id <= root; ++id) {
        if (!reach[size_t(id)]) continue;
        Node& n = nodes_[size_t(id)];
        if (n.grad.size() != n.val.size()) n.grad = Tensor(n.val.ch, n.val.h, n.val.w);
        for (size_t i = 0; i < n.grad.size(); ++i) n.grad.v[i] += adj[size_t(id)].v[i];
    }
}

}  // namespace xseg
