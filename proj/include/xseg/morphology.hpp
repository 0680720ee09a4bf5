#pragma once

#include <cstdint>
#include <vector>

#include "xseg/field.hpp"

namespace xseg {

// out = 1 iff p > threshold (strict).
Mask2D binarize(const Field2D& p, float threshold);

// One-pixel morphological boundary: y==1 with at least one 4-neighbor that is
// 0 or out of bounds.
Mask2D boundary(const Mask2D& y);

// r-fold dilation with the 3x3 square structuring element, i.e. Chebyshev
// distance <= r to the nearest 1-pixel.
Mask2D dilate(const Mask2D& y, int r);

// Exact squared Euclidean distance to the nearest 1-pixel (two-pass lower
// envelope of parabolas). Empty mask: every entry is (H+W)^2 so the sentinel
// distance is exactly H+W.
std::vector<int64_t> squared_edt(const Mask2D& y);

struct DistanceField {
    Field2D dist;
    bool empty_input = false;  // sentinel H+W everywhere when set
};

// Exact Euclidean distance transform; matches the brute-force all-pairs
// minimum bit for bit.
DistanceField distance_transform(const Mask2D& y);

}  // namespace xseg
