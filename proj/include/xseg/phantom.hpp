#pragma once

#include <string>
#include <vector>

#include "xseg/field.hpp"

namespace xseg {

// Seeded synthetic slice stacks: a drifting annulus (outer region + lumen)
// over noisy background with confusable distractor vessels.
struct PhantomSpec {
    int height = 64, width = 64, depth = 8;
    uint64_t seed = 1;
    double drift = 1.0;               // center random-walk step sd, px/slice
    double r_min = 10.0, r_max = 16.0;   // outer radius range
    double w_min = 3.0, w_max = 6.0;     // wall thickness range (>= 1)
    double mu_b = 0.2, mu_w = 0.45, mu_l = 0.8;
    double noise = 0.05;              // image-only Gaussian noise sd
    int distractors_min = 1, distractors_max = 3;
    double dr_min = 2.0, dr_max = 5.0;   // distractor radius range
    double di_jitter = 0.05;          // distractor intensity spread around mu_w
    enum class Tier { easy, complex } tier = Tier::easy;
    bool annulus_only = false;        // wall mask as thin ring instead of full region

    void validate() const;  // throws naming the offending field
};

// Presets matching the two difficulty tiers.
PhantomSpec easy_spec();
PhantomSpec complex_spec();

struct PhantomVolume {
    FieldStack images;
    MaskStack wall_masks;   // full outer region by default (annulus_only: ring)
    MaskStack lumen_masks;  // always inside the outer region
};

PhantomVolume generate(const PhantomSpec& spec);

// ---------------------------------------------------------------------------
// Dataset assembly: volume-level split, test side partitioned into general
// and complex tiers, files stored as F3D1 triplets next to a plain manifest.
// ---------------------------------------------------------------------------
struct DatasetParams {
    int n_volumes = 10;
    double split = 0.8;              // train fraction (volume level)
    double complex_fraction = 0.5;   // of the test volumes
    double train_complex_fraction = 0.0;
    uint64_t seed = 1;
    PhantomSpec base_easy;
    PhantomSpec base_complex;
    std::string out_dir;

    DatasetParams() : base_easy(easy_spec()), base_complex(complex_spec()) {}
};

struct ManifestEntry {
    std::string id;
    std::string split;  // train | test
    std::string tier;   // easy | complex
    std::string image_path, wall_path, lumen_path;  // relative to manifest dir
    uint64_t seed = 0;
};

struct Manifest {
    std::vector<ManifestEntry> entries;
    std::vector<std::string> echo;  // config echo comment lines
};

Manifest make_dataset(const DatasetParams& params);

void write_manifest(const Manifest& m, const std::string& path);
Manifest read_manifest(const std::string& path);

}  // namespace xseg
