#include "xseg/tensor.hpp"

#include <cmath>
#include <stdexcept>

namespace xseg {

std::string Tensor::shape_str() const {
    return "(" + std::to_string(ch) + "," + std::to_string(h) + "," + std::to_string(w) + ")";
}

double Tensor::item() const {
    if (!is_scalar()) throw std::invalid_argument("item() on non-scalar tensor " + shape_str());
    return v[0];
}

Tensor to_tensor(const Field2D& f) {
    Tensor t(1, f.height, f.width);
    for (size_t i = 0; i < f.data.size(); ++i) t.v[i] = double(f.data[i]);
    return t;
}

Tensor to_tensor(const Mask2D& m) {
    Tensor t(1, m.height, m.width);
    for (size_t i = 0; i < m.data.size(); ++i) t.v[i] = m.data[i] ? 1.0 : 0.0;
    return t;
}

Field2D to_field(const Tensor& t) {
    if (t.ch != 1) throw std::invalid_argument("to_field: tensor has " + std::to_string(t.ch) + " channels");
    Field2D f(t.h, t.w);
    for (size_t i = 0; i < t.v.size(); ++i) {
        if (!std::isfinite(t.v[i])) throw std::runtime_error("to_field: non-finite value");
        f.data[i] = float(t.v[i]);
    }
    return f;
}

Tensor t_relu(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.v) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor t_sigmoid(const Tensor& x) {
    Tensor out = x;
    for (double& v : out.v) v = 1.0 / (1.0 + std::exp(-v));
    return out;
}

Tensor t_bilinear_resize(const Tensor& x, int out_h, int out_w) {
    Tensor out(x.ch, out_h, out_w);
    const double si = out_h > 1 ? double(x.h - 1) / double(out_h - 1) : 0.0;
    const double sj = out_w > 1 ? double(x.w - 1) / double(out_w - 1) : 0.0;
    for (int c = 0; c < x.ch; ++c) {
        for (int i = 0; i < out_h; ++i) {
            double fi = si * i;
            int i0 = int(fi);
            int i1 = std::min(i0 + 1, x.h - 1);
            double ti = fi - i0;
            for (int j = 0; j < out_w; ++j) {
                double fj = sj * j;
                int j0 = int(fj);
                int j1 = std::min(j0 + 1, x.w - 1);
                double tj = fj - j0;
                out.at(c, i, j) = (1 - ti) * ((1 - tj) * x.at(c, i0, j0) + tj * x.at(c, i0, j1)) +
                                  ti * ((1 - tj) * x.at(c, i1, j0) + tj * x.at(c, i1, j1));
            }
        }
    }
    return out;
}

double t_sum(const Tensor& x) {
    double s = 0.0;
    for (double v : x.v) s += v;
    return s;
}

}  // namespace xseg
