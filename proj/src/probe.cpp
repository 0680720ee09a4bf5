#include "xseg/probe.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "xseg/morphology.hpp"

namespace xseg {

namespace {

void require_same_shape(int h1, int w1, int h2, int w2, const char* what) {
    if (h1 != h2 || w1 != w2)
        throw std::invalid_argument(std::string(what) + ": shape mismatch (" + std::to_string(h1) +
                                    "x" + std::to_string(w1) + ") vs (" + std::to_string(h2) + "x" +
                                    std::to_string(w2) + ")");
}

std::vector<double> normalized(const Field2D& f, const char* what) {
    double mass = 0.0;
    for (float v : f.data) {
        if (v < 0.0f) throw std::invalid_argument(std::string(what) + ": negative entries");
        mass += double(v);
    }
    std::vector<double> out(f.data.size());
    if (mass <= 0.0) {
        std::fill(out.begin(), out.end(), 1.0 / double(f.data.size()));
    } else {
        for (size_t i = 0; i < out.size(); ++i) out[i] = double(f.data[i]) / mass;
    }
    return out;
}

// squared boundary-to-boundary distances from every 1-pixel of `from` to the
// nearest 1-pixel of `to`
std::vector<double> directed_distances(const Mask2D& from, const Mask2D& to) {
    std::vector<int64_t> d2 = squared_edt(to);
    std::vector<double> out;
    for (size_t i = 0; i < from.data.size(); ++i)
        if (from.data[i]) out.push_back(std::sqrt(double(d2[i])));
    return out;
}

double percentile95(std::vector<double> d) {
    std::sort(d.begin(), d.end());
    const size_t n = d.size();
    if (n == 1) return d[0];
    double pos = 0.95 * double(n - 1);
    size_t lo = size_t(pos);
    double frac = pos - double(lo);
    if (lo + 1 >= n) return d[n - 1];
    return d[lo] + frac * (d[lo + 1] - d[lo]);
}

}  // namespace

Field2D normalize_mass(const Field2D& f, bool* degenerate) {
    double mass = 0.0;
    for (float v : f.data) {
        if (v < 0.0f) throw std::invalid_argument("normalize_mass: negative entries");
        mass += double(v);
    }
    Field2D out(f.height, f.width);
    bool degen = mass <= 0.0;
    if (degen) {
        float u = float(1.0 / double(f.data.size()));
        std::fill(out.data.begin(), out.data.end(), u);
    } else {
        for (size_t i = 0; i < f.data.size(); ++i) out.data[i] = float(double(f.data[i]) / mass);
    }
    if (degenerate) *degenerate = degen;
    return out;
}

double jsd(const Field2D& a, const Field2D& b) {
    require_same_shape(a.height, a.width, b.height, b.width, "jsd");
    std::vector<double> p = normalized(a, "jsd");
    std::vector<double> q = normalized(b, "jsd");
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) {
        double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) acc += 0.5 * p[i] * std::log(p[i] / m);
        if (q[i] > 0.0) acc += 0.5 * q[i] * std::log(q[i] / m);
    }
    return acc;
}

FoiFmi foi_fmi(const Field2D& phi, const Mask2D& y, double eps) {
    require_same_shape(phi.height, phi.width, y.height, y.width, "foi_fmi");
    double inside = 0.0, total = 0.0;
    for (size_t i = 0; i < phi.data.size(); ++i) {
        double v = double(phi.data[i]);
        if (v < 0.0) throw std::invalid_argument("foi_fmi: negative entries");
        total += v;
        if (y.data[i]) inside += v;
    }
    FoiFmi out;
    out.foi = inside / (total + eps);
    out.fmi = 1.0 - out.foi;
    out.degenerate = total <= 0.0;
    return out;
}

double leak(const Field2D& f, const Mask2D& y, double eps) {
    require_same_shape(f.height, f.width, y.height, y.width, "leak");
    double outside = 0.0, total = 0.0;
    for (size_t i = 0; i < f.data.size(); ++i) {
        double v = double(f.data[i]);
        if (v < 0.0) throw std::invalid_argument("leak: negative entries");
        total += v;
        if (!y.data[i]) outside += v;
    }
    return outside / (total + eps);
}

double bcov(const Field2D& phi, const Mask2D& y, int r, double eps) {
    require_same_shape(phi.height, phi.width, y.height, y.width, "bcov");
    Mask2D band = dilate(boundary(y), r);
    double inside = 0.0, total = 0.0;
    for (size_t i = 0; i < phi.data.size(); ++i) {
        double v = double(phi.data[i]);
        if (v < 0.0) throw std::invalid_argument("bcov: negative entries");
        total += v;
        if (band.data[i]) inside += v;
    }
    return inside / (total + eps);
}

ChamferResult chamfer(const Mask2D& boundary_a, const Mask2D& boundary_b) {
    require_same_shape(boundary_a.height, boundary_a.width, boundary_b.height, boundary_b.width,
                       "chamfer");
    const bool ea = boundary_a.empty_mask(), eb = boundary_b.empty_mask();
    ChamferResult out;
    if (ea && eb) return out;
    if (ea || eb) {
        out.value = double(boundary_a.height + boundary_a.width);
        out.sentinel = true;
        return out;
    }
    std::vector<double> ab = directed_distances(boundary_a, boundary_b);
    std::vector<double> ba = directed_distances(boundary_b, boundary_a);
    double ma = 0.0, mb = 0.0;
    for (double d : ab) ma += d;
    for (double d : ba) mb += d;
    out.value = 0.5 * (ma / double(ab.size()) + mb / double(ba.size()));
    return out;
}

EConsResult e_cons(const MaskStack& preds) {
    if (preds.depth() < 2)
        throw std::invalid_argument("e_cons: stack depth " + std::to_string(preds.depth()) +
                                    " has no slice pairs");
    EConsResult out;
    double acc = 0.0;
    for (int i = 0; i + 1 < preds.depth(); ++i) {
        const Mask2D& a = preds.slices[size_t(i)];
        const Mask2D& b = preds.slices[size_t(i) + 1];
        if (a.empty_mask() || b.empty_mask()) {
            ++out.pairs_excluded;
            continue;
        }
        acc += chamfer(boundary(a), boundary(b)).value;
        ++out.pairs_used;
    }
    out.value = out.pairs_used > 0 ? acc / double(out.pairs_used) : 0.0;
    return out;
}

IouDice iou_dice(const Mask2D& pred, const Mask2D& gt) {
    require_same_shape(pred.height, pred.width, gt.height, gt.width, "iou_dice");
    size_t inter = 0, np = 0, ng = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        np += pred.data[i];
        ng += gt.data[i];
        inter += size_t(pred.data[i] & gt.data[i]);
    }
    IouDice out;
    if (np == 0 && ng == 0) {
        out.both_empty = true;  // nothing to find, nothing found
        return out;
    }
    size_t uni = np + ng - inter;
    out.iou = double(inter) / double(uni);
    out.dice = 2.0 * double(inter) / double(np + ng);
    return out;
}

Hd95Result hd95(const Mask2D& pred, const Mask2D& gt) {
    require_same_shape(pred.height, pred.width, gt.height, gt.width, "hd95");
    Mask2D bp = boundary(pred), bg = boundary(gt);
    const bool ep = bp.empty_mask(), eg = bg.empty_mask();
    Hd95Result out;
    if (ep && eg) return out;
    if (ep || eg) {
        out.value = double(pred.height + pred.width);
        out.sentinel = true;
        return out;
    }
    double d1 = percentile95(directed_distances(bp, bg));
    double d2 = percentile95(directed_distances(bg, bp));
    out.value = std::max(d1, d2);
    return out;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
    const size_t n = xs.size();
    if (n != ys.size()) throw std::invalid_argument("spearman: length mismatch");
    if (n < 2) throw std::invalid_argument("spearman: need at least 2 samples");
    auto ranks = [](std::span<const double> v) {
        const size_t n = v.size();
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = i;
        std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
        std::vector<double> r(n);
        size_t i = 0;
        while (i < n) {
            size_t j = i;
            while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
            double avg = 0.5 * double(i + j) + 1.0;  // average rank, 1-based
            for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
            i = j + 1;
        }
        return r;
    };
    std::vector<double> rx = ranks(xs), ry = ranks(ys);
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < n; ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= double(n);
    my /= double(n);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < n; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0)
        throw std::invalid_argument("spearman: zero rank variance");
    return sxy / std::sqrt(sxx * syy);
}

void write_probe_csv(const ProbeReport& rep, const std::string& path,
                     const std::vector<std::string>& header_lines) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    char buf[512];
    for (const std::string& h : header_lines) out << h << "\n";
    out << "slice_id,jsd,foi,fmi,leak_phi,leak_p,bcov_r" << rep.band_r
        << ",iou,dice,hd95_px,flags\n";
    for (const ProbeRow& r : rep.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%s\n",
                      r.slice_id.c_str(), r.jsd, r.foi, r.fmi, r.leak_phi, r.leak_p, r.bcov_r,
                      r.iou, r.dice, r.hd95_px, r.flags.c_str());
        out << buf;
    }
    out << "# footer\n";
    for (const auto& [vol, ec] : rep.e_cons_per_volume) {
        std::snprintf(buf, sizeof(buf), "e_cons,%s,%.9g,pairs_used=%d,pairs_excluded=%d\n",
                      vol.c_str(), ec.value, ec.pairs_used, ec.pairs_excluded);
        out << buf;
    }
    std::snprintf(buf, sizeof(buf), "e_cons_mean,%.9g\n", rep.e_cons_mean);
    out << buf;
    if (rep.has_spearman) {
        std::snprintf(buf, sizeof(buf), "spearman_jsd_err,%.9g\nspearman_fmi_err,%.9g\n",
                      rep.spearman_jsd_err, rep.spearman_fmi_err);
        out << buf;
    } else {
        out << "# spearman: skipped (n < 2)\n";
    }
}

}  // namespace xseg
