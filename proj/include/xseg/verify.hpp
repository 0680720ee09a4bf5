#pragma once

#include <string>

#include "xseg/gradcheck.hpp"

namespace xseg {

struct VerifySummary {
    bool pass = true;
    double grad_max_rel_err = 0.0;
    int grad_excluded = 0;
    int metric_cases = 0;
    int metric_mismatches = 0;
    std::string detail;
};

// Finite-difference checks for every composite loss on random 8x8 inputs.
VerifySummary verify_gradients(int inputs_per_loss = 20, uint64_t seed = 7,
                               bool log_lines = false);

// Exact-equality checks of the morphology/metric stack against the
// brute-force references, plus frozen value fixtures (Sobel edge loss,
// region loss closed forms).
VerifySummary verify_metrics(int random_pairs = 150, uint64_t seed = 7, bool log_lines = false);

// Named grad-check builders for the composite losses; shared by the verify
// command and the acceptance suite. Names: ovlp, div, align, edge, cline,
// anat, region, conf, box, pair.
GradCheckReport check_loss_gradients(const std::string& loss_name, int n_inputs, uint64_t seed,
                                     double tol = 1e-3);

}  // namespace xseg
