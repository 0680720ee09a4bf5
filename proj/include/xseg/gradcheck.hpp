#pragma once

#include <functional>

#include "xseg/graph.hpp"

namespace xseg {

struct GradCheckReport {
    double max_rel_err = 0.0;
    int checked = 0;
    int excluded = 0;  // coordinates whose probe crossed a relu/pool branch
    bool pass = false;
};

// Builds a scalar root from an input node.
using GraphBuilder = std::function<NodeId(Graph&, NodeId)>;

// Central finite differences against reverse-mode gradients, coordinate by
// coordinate. rel err = |a-b| / max(1, |a|, |b|). A coordinate is excluded
// when the forward activation signature at x0, x+he or x-he differs: the
// probe straddles a relu/min/max kink and the difference quotient is invalid
// there.
GradCheckReport grad_check(const GraphBuilder& f, const Tensor& x0, double h, double tol);

}  // namespace xseg
