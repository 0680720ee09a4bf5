#pragma once

#include <string>
#include <vector>

#include "xseg/field.hpp"
#include "xseg/graph.hpp"

namespace xseg {

// One slice pair: channel 0 is the anatomically earlier slice. label is 1
// iff |i - j| == 1 within the same volume.
struct PairSample {
    Mask2D first;
    Mask2D second;
    int label = 0;
    int volume = 0;
    int i = 0, j = 0;  // slice indices, i < j
};

// conv(2->8, 3x3, s2) -> relu -> conv(8->16, 3x3, s2) -> relu -> gap ->
// affine(16->1) -> sigmoid. Under 5k parameters.
struct PairNetParams {
    Tensor c1w, c1b, c2w, c2b, fw, fb;

    static PairNetParams init(uint64_t seed);
    std::vector<Tensor*> all();
    std::vector<const Tensor*> all() const;
    size_t count() const;
};

// All depth-1 consecutive positives plus n_neg non-consecutive negatives
// sampled uniformly without replacement (ordered pairs, j > i). n_neg larger
// than the candidate pool clamps and sets *clamped.
std::vector<PairSample> sample_pairs(const MaskStack& volume, int n_neg, uint64_t seed,
                                     int volume_id = 0, bool* clamped = nullptr);

// Consistency score C(z) in (0,1) for a 2-channel input node.
NodeId pairnet_forward(Graph& g, const std::vector<NodeId>& param_ids, NodeId z);

// Convenience: builds param leaves internally (gradient path stops at them).
NodeId pairnet_score(Graph& g, const PairNetParams& params, NodeId z);

struct PairTrainHistory {
    std::vector<double> loss;      // mean BCE per epoch
    std::vector<double> accuracy;  // training accuracy per epoch
};

struct PairTrainOptions {
    int epochs = 50;
    double lr = 1e-3;
    uint64_t seed = 1;
    int batch = 16;
    int threads = 1;
    double clip_norm = 1.0;
};

// Shuffled-minibatch BCE training; deterministic under seed. Requires both
// classes present; epochs = 0 returns the seeded initialization.
PairNetParams train_pairnet(const std::vector<PairSample>& samples, const PairTrainOptions& opt,
                            PairTrainHistory* history = nullptr);

double pairnet_accuracy(const PairNetParams& params, const std::vector<PairSample>& samples);

// Regularizer terms for one prediction node: forward pair (p, next_gt) and
// backward pair (prev_gt, p) where the neighbor exists. Classifier parameters
// are gradient-stopped; the prediction stays soft so gradients flow.
struct PairPenalty {
    NodeId sum = -1;  // sum of (1 - C(z)) over the evaluated pairs; -1 if none
    int pairs = 0;
};

PairPenalty pair_penalty_terms(Graph& g, NodeId p, const Mask2D* prev_gt, const Mask2D* next_gt,
                               const PairNetParams& params);

// lambda_c * mean(1 - C(z)) over every listed (prediction, neighbor) pair in
// one graph; returns {-1, 0} when no pair is valid.
struct PairSpecEntry {
    NodeId pred;
    const Mask2D* prev_gt = nullptr;
    const Mask2D* next_gt = nullptr;
};

struct LPairResult {
    NodeId node = -1;
    int pairs = 0;
};

LPairResult l_pair(Graph& g, const std::vector<PairSpecEntry>& preds, const PairNetParams& params,
                   double lambda_c);

// P4RN checkpoint.
void save_pairnet(const PairNetParams& params, const std::string& path);
PairNetParams load_pairnet(const std::string& path);

void write_pair_history_csv(const PairTrainHistory& hist, const std::string& path,
                            const std::vector<std::string>& header_lines);

}  // namespace xseg
