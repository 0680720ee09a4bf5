#include "xseg/morphology.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace xseg {

Mask2D binarize(const Field2D& p, float threshold) {
    Mask2D out(p.height, p.width);
    for (size_t i = 0; i < p.data.size(); ++i) out.data[i] = p.data[i] > threshold ? 1 : 0;
    return out;
}

Mask2D boundary(const Mask2D& y) {
    Mask2D out(y.height, y.width);
    const int h = y.height, w = y.width;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            if (!y.at(i, j)) continue;
            bool exposed = (i == 0 || !y.at(i - 1, j)) || (i == h - 1 || !y.at(i + 1, j)) ||
                           (j == 0 || !y.at(i, j - 1)) || (j == w - 1 || !y.at(i, j + 1));
            out.at(i, j) = exposed ? 1 : 0;
        }
    }
    return out;
}

Mask2D dilate(const Mask2D& y, int r) {
    if (r < 0) throw std::invalid_argument("dilate: r must be >= 0");
    Mask2D cur = y;
    const int h = y.height, w = y.width;
    for (int pass = 0; pass < r; ++pass) {
        Mask2D next(h, w);
        for (int i = 0; i < h; ++i) {
            for (int j = 0; j < w; ++j) {
                uint8_t v = 0;
                for (int di = -1; di <= 1 && !v; ++di) {
                    int ii = i + di;
                    if (ii < 0 || ii >= h) continue;
                    for (int dj = -1; dj <= 1; ++dj) {
                        int jj = j + dj;
                        if (jj < 0 || jj >= w) continue;
                        if (cur.at(ii, jj)) {
                            v = 1;
                            break;
                        }
                    }
                }
                next.at(i, j) = v;
            }
        }
        cur = std::move(next);
    }
    return cur;
}

namespace {

// 1-D squared-distance lower envelope (Felzenszwalb & Huttenlocher). f holds
// per-cell seeds as squared distances; INF marks absent seeds.
void edt_1d(const std::vector<int64_t>& f, int n, std::vector<int64_t>& d) {
    static constexpr int64_t INF = std::numeric_limits<int64_t>::max() / 4;
    std::vector<int> v(static_cast<size_t>(n));
    std::vector<double> z(static_cast<size_t>(n) + 1);
    int k = 0;
    v[0] = 0;
    z[0] = -std::numeric_limits<double>::infinity();
    z[1] = std::numeric_limits<double>::infinity();
    auto fq = [&](int q) { return double(f[size_t(q)]); };
    // skip leading INF cells so the envelope starts at a real parabola
    int first = 0;
    while (first < n && f[size_t(first)] >= INF) ++first;
    if (first == n) {
        for (int q = 0; q < n; ++q) d[size_t(q)] = INF;
        return;
    }
    v[0] = first;
    for (int q = first + 1; q < n; ++q) {
        if (f[size_t(q)] >= INF) continue;
        double s;
        while (true) {
            int p = v[k];
            s = ((fq(q) + double(q) * q) - (fq(p) + double(p) * p)) / (2.0 * (q - p));
            if (s <= z[k]) {
                --k;
            } else {
                break;
            }
        }
        ++k;
        v[k] = q;
        z[k] = s;
        z[k + 1] = std::numeric_limits<double>::infinity();
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < double(q)) ++k;
        int p = v[k];
        d[size_t(q)] = int64_t(q - p) * int64_t(q - p) + f[size_t(p)];
    }
}

}  // namespace

std::vector<int64_t> squared_edt(const Mask2D& y) {
    const int h = y.height, w = y.width;
    static constexpr int64_t INF = std::numeric_limits<int64_t>::max() / 4;
    std::vector<int64_t> g(size_t(h) * size_t(w));
    if (y.empty_mask()) {
        int64_t s = int64_t(h + w) * int64_t(h + w);
        std::fill(g.begin(), g.end(), s);
        return g;
    }
    // pass 1: per column, distance along rows
    std::vector<int64_t> col(static_cast<size_t>(h)), res(static_cast<size_t>(h));
    for (int j = 0; j < w; ++j) {
        for (int i = 0; i < h; ++i) col[size_t(i)] = y.at(i, j) ? 0 : INF;
        edt_1d(col, h, res);
        for (int i = 0; i < h; ++i) g[size_t(i) * w + j] = res[size_t(i)];
    }
    // pass 2: per row, combine with squared column distances
    std::vector<int64_t> row(static_cast<size_t>(w)), rres(static_cast<size_t>(w));
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) row[size_t(j)] = g[size_t(i) * w + j];
        edt_1d(row, w, rres);
        for (int j = 0; j < w; ++j) g[size_t(i) * w + j] = rres[size_t(j)];
    }
    return g;
}

DistanceField distance_transform(const Mask2D& y) {
    DistanceField out;
    out.empty_input = y.empty_mask();
    out.dist = Field2D(y.height, y.width);
    std::vector<int64_t> d2 = squared_edt(y);
    for (size_t i = 0; i < d2.size(); ++i) out.dist.data[i] = float(std::sqrt(double(d2[i])));
    return out;
}

}  // namespace xseg
