#pragma once

#include <cstdint>
#include <vector>

#include "xseg/field.hpp"

namespace xseg {
// Brute-force reference implementations, kept deliberately independent of the
// production algorithms. They back the verify command and the oracle-equality
// test suites; everything here is O(n^2) or worse by construction.
namespace oracle {

// all-pairs minimum squared distance to a 1-pixel; empty mask -> (H+W)^2
std::vector<int64_t> squared_edt(const Mask2D& y);

Mask2D boundary(const Mask2D& y);

// direct Chebyshev-distance definition
Mask2D dilate(const Mask2D& y, int r);

double chamfer(const Mask2D& boundary_a, const Mask2D& boundary_b);

double hd95(const Mask2D& pred, const Mask2D& gt);

}  // namespace oracle
}  // namespace xseg
