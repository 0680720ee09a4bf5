#pragma once

#include <optional>
#include <string>
#include <vector>

#include "xseg/losses.hpp"
#include "xseg/model.hpp"
#include "xseg/pairnet.hpp"
#include "xseg/phantom.hpp"

namespace xseg {

// Two-stage curriculum settings. Stage weights shift at
// floor(stage_split * epochs) (0-based epochs; the boundary epoch is late).
struct CurriculumConfig {
    int epochs = 40;
    double stage_split = 0.5;
    LossWeights weights;
    double box_weight = 0.1;  // applied in both stages
    double lr = 1e-3;
    double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
    double clip_norm = 1.0;
    double kappa = 1.0;  // inference-time modulation strength
    int k_skel = 10;
    uint64_t seed = 42;
    int batch_size = 8;
    int threads = 1;
    bool use_xai = true;
    bool use_anat = true;
    bool use_refine = true;  // aux decoder + confidence head (and kappa at eval)
    bool use_pair = true;
    bool late_div_only = false;  // late alignment as bare divergence
    bool ramp = false;           // linear blend into late weights
    int ramp_epochs = 5;

    void validate() const;
    std::vector<std::string> echo() const;  // key=value block + deviation notes
};

// One training sample: a slice, its target mask and the neighboring
// ground-truth masks where they exist.
struct SliceSample {
    int volume = 0;
    int index = 0;
    std::string tier;
    Field2D image;
    Mask2D target;
    std::optional<Mask2D> prev_gt, next_gt;
};

enum class Target { wall, lumen };

// Loads the train-split slices of a manifest.
std::vector<SliceSample> load_training_set(const Manifest& manifest, const std::string& dir,
                                           Target target);

// One evaluation volume (any split).
struct EvalVolume {
    std::string id;
    std::string tier;
    FieldStack images;
    MaskStack targets;
};

std::vector<EvalVolume> load_eval_volumes(const Manifest& manifest, const std::string& dir,
                                          Target target, const std::string& tier_filter,
                                          const std::string& split = "test");

struct EpochStats {
    int epoch = 0;      // 1-based in reports
    int stage = 0;      // 0 early, 1 late
    double total = 0.0, main = 0.0, aux = 0.0, conf = 0.0, pair = 0.0, anat = 0.0;
    double ovlp = 0.0, div = 0.0, box = 0.0;
    double grad_pre = 0.0, grad_post = 0.0;
};

struct TrainReport {
    std::vector<std::string> config_echo;
    std::vector<EpochStats> epochs;
};

// L_seg = Lambda_main(s, y) + gamma_aux * Lambda_aux(a, y).
NodeId loss_seg(Graph& g, NodeId s, NodeId a, NodeId y, double gamma_aux, double eps);

// Effective per-term weights for an epoch (handles the hard switch and the
// optional ramp).
struct StageWeights {
    int stage = 0;
    double conf = 0.0, pair = 0.0, anat = 0.0, align = 0.0;
};
StageWeights stage_weights(const CurriculumConfig& cfg, int epoch);

// Adam curriculum training; deterministic under cfg.seed. The pair classifier
// may be null only when cfg.use_pair is false. Throws NumericError naming the
// first non-finite loss component.
ModelParams train(const std::vector<SliceSample>& dataset, const PairNetParams* pair_classifier,
                  const CurriculumConfig& cfg, TrainReport* report = nullptr);

void write_train_report_csv(const TrainReport& report, const std::string& path,
                            const std::vector<std::string>& extra_header);

}  // namespace xseg
