#include "xseg/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace xseg {
namespace oracle {

namespace {

struct Pt {
    int i, j;
};

std::vector<Pt> points(const Mask2D& m) {
    std::vector<Pt> out;
    for (int i = 0; i < m.height; ++i)
        for (int j = 0; j < m.width; ++j)
            if (m.at(i, j)) out.push_back({i, j});
    return out;
}

std::vector<double> directed(const std::vector<Pt>& from, const std::vector<Pt>& to) {
    std::vector<double> out;
    out.reserve(from.size());
    for (const Pt& a : from) {
        int64_t best = std::numeric_limits<int64_t>::max();
        for (const Pt& b : to) {
            int64_t di = a.i - b.i, dj = a.j - b.j;
            best = std::min(best, di * di + dj * dj);
        }
        out.push_back(std::sqrt(double(best)));
    }
    return out;
}

double pct95(std::vector<double> d) {
    std::sort(d.begin(), d.end());
    if (d.size() == 1) return d[0];
    double pos = 0.95 * double(d.size() - 1);
    size_t lo = size_t(pos);
    double frac = pos - double(lo);
    if (lo + 1 >= d.size()) return d.back();
    return d[lo] + frac * (d[lo + 1] - d[lo]);
}

}  // namespace

std::vector<int64_t> squared_edt(const Mask2D& y) {
    std::vector<Pt> seeds = points(y);
    std::vector<int64_t> out(y.data.size());
    if (seeds.empty()) {
        int64_t s = int64_t(y.height + y.width) * int64_t(y.height + y.width);
        std::fill(out.begin(), out.end(), s);
        return out;
    }
    for (int i = 0; i < y.height; ++i) {
        for (int j = 0; j < y.width; ++j) {
            int64_t best = std::numeric_limits<int64_t>::max();
            for (const Pt& s : seeds) {
                int64_t di = i - s.i, dj = j - s.j;
                best = std::min(best, di * di + dj * dj);
            }
            out[size_t(i) * y.width + j] = best;
        }
    }
    return out;
}

Mask2D boundary(const Mask2D& y) {
    Mask2D out(y.height, y.width);
    auto is_bg = [&](int i, int j) {
        return i < 0 || i >= y.height || j < 0 || j >= y.width || !y.at(i, j);
    };
    for (int i = 0; i < y.height; ++i)
        for (int j = 0; j < y.width; ++j)
            if (y.at(i, j) &&
                (is_bg(i - 1, j) || is_bg(i + 1, j) || is_bg(i, j - 1) || is_bg(i, j + 1)))
                out.at(i, j) = 1;
    return out;
}

Mask2D dilate(const Mask2D& y, int r) {
    Mask2D out(y.height, y.width);
    std::vector<Pt> seeds = points(y);
    for (int i = 0; i < y.height; ++i)
        for (int j = 0; j < y.width; ++j)
            for (const Pt& s : seeds) {
                if (std::max(std::abs(i - s.i), std::abs(j - s.j)) <= r) {
                    out.at(i, j) = 1;
                    break;
                }
            }
    return out;
}

double chamfer(const Mask2D& boundary_a, const Mask2D& boundary_b) {
    std::vector<Pt> pa = points(boundary_a), pb = points(boundary_b);
    if (pa.empty() && pb.empty()) return 0.0;
    if (pa.empty() || pb.empty()) return double(boundary_a.height + boundary_a.width);
    std::vector<double> ab = directed(pa, pb), ba = directed(pb, pa);
    double ma = 0.0, mb = 0.0;
    for (double d : ab) ma += d;
    for (double d : ba) mb += d;
    return 0.5 * (ma / double(ab.size()) + mb / double(ba.size()));
}

double hd95(const Mask2D& pred, const Mask2D& gt) {
    std::vector<Pt> pa = points(boundary(pred)), pb = points(boundary(gt));
    if (pa.empty() && pb.empty()) return 0.0;
    if (pa.empty() || pb.empty()) return double(pred.height + pred.width);
    return std::max(pct95(directed(pa, pb)), pct95(directed(pb, pa)));
}

}  // namespace oracle
}  // namespace xseg
