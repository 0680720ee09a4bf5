#include "xseg/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "xseg/rng.hpp"

namespace xseg {

namespace {

[[noreturn]] void spec_error(const char* field, const std::string& why) {
    throw std::invalid_argument(std::string("PhantomSpec: field '") + field + "' " + why);
}

}  // namespace

void PhantomSpec::validate() const {
    if (height <= 0 || height % 8 != 0) spec_error("height", "must be positive and divisible by 8");
    if (width <= 0 || width % 8 != 0) spec_error("width", "must be positive and divisible by 8");
    if (depth < 1) spec_error("depth", "must be >= 1");
    if (drift < 0.0) spec_error("drift", "must be >= 0");
    if (r_min <= 0.0 || r_max < r_min) spec_error("r_min/r_max", "must satisfy 0 < r_min <= r_max");
    if (w_min < 1.0 || w_max < w_min) spec_error("w_min/w_max", "must satisfy 1 <= w_min <= w_max");
    if (r_min - w_max < 1.0) spec_error("w_max", "lumen radius r - w must stay >= 1");
    if (r_max + 2.0 > 0.5 * std::min(height, width))
        spec_error("r_max", "disk must fit in frame after drift");
    if (noise < 0.0) spec_error("noise", "must be >= 0");
    if (distractors_min < 0 || distractors_max < distractors_min)
        spec_error("distractors_min/max", "must satisfy 0 <= min <= max");
    if (dr_min <= 0.0 || dr_max < dr_min) spec_error("dr_min/dr_max", "must satisfy 0 < min <= max");
    if (tier == Tier::complex) {
        if (w_min > 2.0) spec_error("w_min", "complex tier requires w_min <= 2");
        if (std::abs(mu_w - mu_b) > 2.0 * noise)
            spec_error("mu_w", "complex tier requires low wall contrast (|mu_w - mu_b| <= 2*noise)");
    }
}

PhantomSpec easy_spec() { return PhantomSpec{}; }

PhantomSpec complex_spec() {
    PhantomSpec s;
    s.w_min = 1.0;
    s.w_max = 2.0;
    s.mu_w = 0.28;
    s.distractors_min = 2;
    s.distractors_max = 4;
    s.tier = PhantomSpec::Tier::complex;
    return s;
}

PhantomVolume generate(const PhantomSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    const int h = spec.height, w = spec.width, d = spec.depth;

    // radii and wall thickness interpolate smoothly across depth
    double r0 = rng.uniform(spec.r_min, spec.r_max);
    double r1 = rng.uniform(spec.r_min, spec.r_max);
    double t0 = rng.uniform(spec.w_min, spec.w_max);
    double t1 = rng.uniform(spec.w_min, spec.w_max);
    auto lerp = [d](double a, double b, int i) {
        return d > 1 ? a + (b - a) * double(i) / double(d - 1) : a;
    };

    // smoothed seeded random walk for the center
    std::vector<double> cy(static_cast<size_t>(d)), cx(static_cast<size_t>(d));
    cy[0] = 0.5 * h + rng.uniform(-2.0, 2.0);
    cx[0] = 0.5 * w + rng.uniform(-2.0, 2.0);
    for (int i = 1; i < d; ++i) {
        cy[size_t(i)] = cy[size_t(i) - 1] + rng.normal(0.0, spec.drift);
        cx[size_t(i)] = cx[size_t(i) - 1] + rng.normal(0.0, spec.drift);
    }
    auto smooth3 = [d](std::vector<double>& v) {
        std::vector<double> out(v.size());
        for (int i = 0; i < d; ++i) {
            double a = v[size_t(std::max(0, i - 1))];
            double b = v[size_t(i)];
            double c = v[size_t(std::min(d - 1, i + 1))];
            out[size_t(i)] = 0.25 * a + 0.5 * b + 0.25 * c;
        }
        v = std::move(out);
    };
    smooth3(cy);
    smooth3(cx);
    for (int i = 0; i < d; ++i) {
        double margin = lerp(r0, r1, i) + 1.0;
        cy[size_t(i)] = std::clamp(cy[size_t(i)], margin, double(h) - margin);
        cx[size_t(i)] = std::clamp(cx[size_t(i)], margin, double(w) - margin);
    }

    // distractor tubes: static disks, disjoint from the aneurysm on every slice
    struct Disk {
        double cy, cx, r, intensity;
    };
    std::vector<Disk> distractors;
    int want = spec.distractors_min +
               (spec.distractors_max > spec.distractors_min
                    ? rng.uniform_int(spec.distractors_max - spec.distractors_min + 1)
                    : 0);
    for (int k = 0; k < want; ++k) {
        for (int attempt = 0; attempt < 200; ++attempt) {
            Disk disk;
            disk.r = rng.uniform(spec.dr_min, spec.dr_max);
            disk.cy = rng.uniform(disk.r + 1.0, double(h) - disk.r - 1.0);
            disk.cx = rng.uniform(disk.r + 1.0, double(w) - disk.r - 1.0);
            disk.intensity = spec.mu_w + rng.uniform(-spec.di_jitter, spec.di_jitter);
            bool ok = true;
            for (int i = 0; i < d && ok; ++i) {
                double dist = std::hypot(disk.cy - cy[size_t(i)], disk.cx - cx[size_t(i)]);
                if (dist <= disk.r + lerp(r0, r1, i) + 2.0) ok = false;
            }
            for (const Disk& other : distractors)
                if (std::hypot(disk.cy - other.cy, disk.cx - other.cx) <= disk.r + other.r + 1.0)
                    ok = false;
            if (ok) {
                distractors.push_back(disk);
                break;
            }
        }
    }

    PhantomVolume vol;
    for (int i = 0; i < d; ++i) {
        const double R = lerp(r0, r1, i);
        const double W = lerp(t0, t1, i);
        const double L = std::max(R - W, 1.0);
        Field2D img(h, w, float(spec.mu_b));
        Mask2D wall(h, w), lumen(h, w);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                double dy = double(y) - cy[size_t(i)];
                double dx = double(x) - cx[size_t(i)];
                double d2 = dy * dy + dx * dx;
                if (d2 <= R * R) {
                    bool in_lumen = d2 <= L * L;
                    img.at(y, x) = float(in_lumen ? spec.mu_l : spec.mu_w);
                    if (in_lumen) lumen.at(y, x) = 1;
                    if (!spec.annulus_only || !in_lumen) wall.at(y, x) = 1;
                } else {
                    for (const Disk& disk : distractors) {
                        double ddy = double(y) - disk.cy, ddx = double(x) - disk.cx;
                        if (ddy * ddy + ddx * ddx <= disk.r * disk.r) {
                            img.at(y, x) = float(disk.intensity);
                            break;
                        }
                    }
                }
            }
        }
        if (spec.noise > 0.0) {
            for (float& v : img.data)
                v = float(std::clamp(double(v) + rng.normal(0.0, spec.noise), 0.0, 1.0));
        }
        vol.images.slices.push_back(std::move(img));
        vol.wall_masks.slices.push_back(std::move(wall));
        vol.lumen_masks.slices.push_back(std::move(lumen));
    }
    return vol;
}

namespace {

std::string vol_id(int idx) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "vol_%04d", idx);
    return buf;
}

}  // namespace

Manifest make_dataset(const DatasetParams& params) {
    if (params.n_volumes < 1) throw std::invalid_argument("make_dataset: n_volumes must be >= 1");
    if (params.split <= 0.0 || params.split > 1.0)
        throw std::invalid_argument("make_dataset: split must be in (0, 1]");
    params.base_easy.validate();
    params.base_complex.validate();
    namespace fs = std::filesystem;
    fs::create_directories(params.out_dir);

    const int n = params.n_volumes;
    const int n_train = int(std::lround(params.split * n));
    const int n_test = n - n_train;
    const int n_complex_test = int(std::lround(params.complex_fraction * n_test));
    const int n_complex_train = int(std::lround(params.train_complex_fraction * n_train));

    Manifest man;
    char line[256];
    std::snprintf(line, sizeof(line), "# n_volumes=%d split=%g complex_fraction=%g seed=%llu", n,
                  params.split, params.complex_fraction, (unsigned long long)params.seed);
    man.echo.push_back(line);
    std::snprintf(line, sizeof(line),
                  "# easy: HxWxD=%dx%dx%d r=[%g,%g] w=[%g,%g] mu=(%g,%g,%g) noise=%g drift=%g",
                  params.base_easy.height, params.base_easy.width, params.base_easy.depth,
                  params.base_easy.r_min, params.base_easy.r_max, params.base_easy.w_min,
                  params.base_easy.w_max, params.base_easy.mu_b, params.base_easy.mu_w,
                  params.base_easy.mu_l, params.base_easy.noise, params.base_easy.drift);
    man.echo.push_back(line);
    std::snprintf(line, sizeof(line),
                  "# complex: r=[%g,%g] w=[%g,%g] mu_w=%g distractors=[%d,%d]",
                  params.base_complex.r_min, params.base_complex.r_max, params.base_complex.w_min,
                  params.base_complex.w_max, params.base_complex.mu_w,
                  params.base_complex.distractors_min, params.base_complex.distractors_max);
    man.echo.push_back(line);

    for (int idx = 0; idx < n; ++idx) {
        bool is_train = idx < n_train;
        // complex volumes sit at the tail of each side so counts are exact
        bool is_complex = is_train ? (idx >= n_train - n_complex_train)
                                   : (idx >= n - n_complex_test);
        PhantomSpec spec = is_complex ? params.base_complex : params.base_easy;
        spec.seed = Rng::mix(params.seed, uint64_t(idx));
        PhantomVolume vol = generate(spec);

        ManifestEntry e;
        e.id = vol_id(idx);
        e.split = is_train ? "train" : "test";
        e.tier = is_complex ? "complex" : "easy";
        e.image_path = e.id + "_img.f3d";
        e.wall_path = e.id + "_wall.f3d";
        e.lumen_path = e.id + "_lumen.f3d";
        e.seed = spec.seed;
        write_field_stack(vol.images, (fs::path(params.out_dir) / e.image_path).string());
        write_mask_stack(vol.wall_masks, (fs::path(params.out_dir) / e.wall_path).string());
        write_mask_stack(vol.lumen_masks, (fs::path(params.out_dir) / e.lumen_path).string());
        man.entries.push_back(std::move(e));
    }
    write_manifest(man, (fs::path(params.out_dir) / "manifest.txt").string());
    return man;
}

void write_manifest(const Manifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    for (const std::string& e : m.echo) out << e << "\n";
    out << "# id split tier image wall lumen seed\n";
    for (const ManifestEntry& e : m.entries)
        out << e.id << " " << e.split << " " << e.tier << " " << e.image_path << " " << e.wall_path
            << " " << e.lumen_path << " " << e.seed << "\n";
}

Manifest read_manifest(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    Manifest m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            m.echo.push_back(line);
            continue;
        }
        std::istringstream ss(line);
        ManifestEntry e;
        unsigned long long seed = 0;
        if (!(ss >> e.id >> e.split >> e.tier >> e.image_path >> e.wall_path >> e.lumen_path >> seed))
            throw std::runtime_error(path + ": malformed manifest line: " + line);
        if (e.split != "train" && e.split != "test")
            throw std::runtime_error(path + ": bad split tag '" + e.split + "'");
        if (e.tier != "easy" && e.tier != "complex")
            throw std::runtime_error(path + ": bad tier tag '" + e.tier + "'");
        e.seed = seed;
        m.entries.push_back(std::move(e));
    }
    if (m.entries.empty()) throw std::runtime_error(path + ": manifest lists no volumes");
    return m;
}

}  // namespace xseg
