#pragma once

#include <string>
#include <vector>

#include "xseg/field.hpp"

namespace xseg {

// Dense (channels, height, width) value in double precision; the working type
// of the autodiff graph and the model. Scalars are 1x1x1.
struct Tensor {
    int ch = 0;
    int h = 0;
    int w = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int c, int hh, int ww, double fill = 0.0)
        : ch(c), h(hh), w(ww), v(size_t(c) * size_t(hh) * size_t(ww), fill) {}

    static Tensor scalar(double x) {
        Tensor t(1, 1, 1);
        t.v[0] = x;
        return t;
    }

    double& at(int c, int i, int j) { return v[(size_t(c) * h + i) * w + j]; }
    double at(int c, int i, int j) const { return v[(size_t(c) * h + i) * w + j]; }
    size_t size() const { return v.size(); }
    bool is_scalar() const { return ch == 1 && h == 1 && w == 1; }
    bool same_shape(const Tensor& o) const { return ch == o.ch && h == o.h && w == o.w; }
    std::string shape_str() const;
    double item() const;  // value of a scalar tensor
};

Tensor to_tensor(const Field2D& f);
Tensor to_tensor(const Mask2D& m);
Field2D to_field(const Tensor& t);  // requires ch == 1; checks finiteness

// Plain (non-graph) helpers used by attribution and inference paths.
Tensor t_relu(const Tensor& x);
Tensor t_sigmoid(const Tensor& x);
Tensor t_bilinear_resize(const Tensor& x, int out_h, int out_w);
double t_sum(const Tensor& x);

}  // namespace xseg
