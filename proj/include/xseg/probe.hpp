#pragma once

#include <span>
#include <string>
#include <vector>

#include "xseg/field.hpp"

namespace xseg {

// l1-normalizes a non-negative field in double precision. Zero-mass input
// maps to the uniform distribution and sets *degenerate.
Field2D normalize_mass(const Field2D& f, bool* degenerate = nullptr);

// Symmetrized KL divergence (natural log, 0*log0 = 0) between the
// renormalized inputs; accepts raw non-negative fields. Result in [0, ln 2].
double jsd(const Field2D& a, const Field2D& b);

struct FoiFmi {
    double foi = 0.0;
    double fmi = 1.0;
    bool degenerate = false;  // zero attribution mass
};

// FOI = sum(phi*y) / (sum phi + eps); FMI = 1 - FOI.
FoiFmi foi_fmi(const Field2D& phi, const Mask2D& y, double eps = 1e-6);

// Mass on the mask complement: sum(f*(1-y)) / (sum f + eps).
double leak(const Field2D& f, const Mask2D& y, double eps = 1e-6);

// Fraction of attribution mass within the r-dilated one-pixel boundary band.
double bcov(const Field2D& phi, const Mask2D& y, int r, double eps = 1e-6);

struct ChamferResult {
    double value = 0.0;
    bool sentinel = false;  // one side empty; value is H+W
};

// Symmetric mean boundary distance between two boundary point sets.
// Both empty -> 0; one empty -> sentinel H+W with flag.
ChamferResult chamfer(const Mask2D& boundary_a, const Mask2D& boundary_b);

struct EConsResult {
    double value = 0.0;
    int pairs_used = 0;
    int pairs_excluded = 0;  // pairs with an empty slice
};

// Mean boundary chamfer over consecutive slice pairs; pairs with an empty
// slice are excluded. Throws on depth < 2.
EConsResult e_cons(const MaskStack& preds);

struct IouDice {
    double iou = 1.0;
    double dice = 1.0;
    bool both_empty = false;
};

IouDice iou_dice(const Mask2D& pred, const Mask2D& gt);

struct Hd95Result {
    double value = 0.0;
    bool sentinel = false;
};

// Max of the two directed 95th-percentile boundary distances (linear
// interpolation over sorted distances). Empty-side handling as chamfer.
Hd95Result hd95(const Mask2D& pred, const Mask2D& gt);

// Spearman rank correlation with average ranks on ties. Throws for n < 2.
double spearman(std::span<const double> xs, std::span<const double> ys);

// ---------------------------------------------------------------------------
// Per-slice report rows and the CSV layout used by the probe command.
// ---------------------------------------------------------------------------
struct ProbeRow {
    std::string slice_id;
    double jsd = 0.0, foi = 0.0, fmi = 1.0, leak_phi = 0.0, leak_p = 0.0, bcov_r = 0.0;
    double iou = 0.0, dice = 0.0, hd95_px = 0.0;
    std::string flags;
};

struct ProbeReport {
    int band_r = 1;
    std::vector<ProbeRow> rows;
    std::vector<std::pair<std::string, EConsResult>> e_cons_per_volume;
    double e_cons_mean = 0.0;
    bool has_spearman = false;
    double spearman_jsd_err = 0.0;
    double spearman_fmi_err = 0.0;
};

// Rows first (fixed column order, 9 significant digits), then footer lines
// for the consistency energy and rank correlations. header_lines are emitted
// verbatim before the column header.
void write_probe_csv(const ProbeReport& rep, const std::string& path,
                     const std::vector<std::string>& header_lines);

}  // namespace xseg
