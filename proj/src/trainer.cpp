#include "xseg/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "xseg/errors.hpp"
#include "xseg/optimizer.hpp"
#include "xseg/rng.hpp"

namespace xseg {

void CurriculumConfig::validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (stage_split <= 0.0 || stage_split >= 1.0) throw ConfigError("stage_split must be in (0, 1)");
    if (clip_norm <= 0.0) throw ConfigError("clip_norm must be > 0");
    if (lr <= 0.0) throw ConfigError("lr must be > 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (kappa < 0.0) throw ConfigError("kappa must be >= 0");
    if (k_skel < 0) throw ConfigError("k_skel must be >= 0");
    weights.validate();
}

std::vector<std::string> CurriculumConfig::echo() const {
    char buf[160];
    std::vector<std::string> out;
    auto kv = [&](const char* k, double v) {
        std::snprintf(buf, sizeof(buf), "# %s=%.9g", k, v);
        out.push_back(buf);
    };
    kv("epochs", epochs);
    kv("stage_split", stage_split);
    kv("lr", lr);
    kv("clip_norm", clip_norm);
    kv("batch_size", batch_size);
    std::snprintf(buf, sizeof(buf), "# seed=%llu", (unsigned long long)seed);
    out.push_back(buf);
    kv("kappa", kappa);
    kv("k_skel", k_skel);
    kv("lambda_div", weights.lambda_div);
    kv("lambda_c", weights.lambda_c);
    kv("gamma_aux", weights.gamma_aux);
    kv("alpha1", weights.alpha1);
    kv("alpha2", weights.alpha2);
    kv("beta1", weights.beta1);
    kv("beta2", weights.beta2);
    kv("beta3", weights.beta3);
    kv("eps", weights.eps);
    kv("box_weight", box_weight);
    kv("use_xai", use_xai);
    kv("use_anat", use_anat);
    kv("use_refine", use_refine);
    kv("use_pair", use_pair);
    kv("ramp", ramp);
    std::snprintf(buf, sizeof(buf), "# late_alignment=%s", late_div_only ? "div_only" : "full");
    out.push_back(buf);
    out.push_back("# note: box term weight applied in both stages");
    if (!late_div_only)
        out.push_back("# note: late alignment couples overlap and divergence (full form)");
    return out;
}

namespace {

MaskStack load_target_stack(const std::string& dir, const ManifestEntry& e, Target target) {
    namespace fs = std::filesystem;
    const std::string& rel = target == Target::wall ? e.wall_path : e.lumen_path;
    return read_mask_stack((fs::path(dir) / rel).string());
}

}  // namespace

std::vector<SliceSample> load_training_set(const Manifest& manifest, const std::string& dir,
                                           Target target) {
    namespace fs = std::filesystem;
    std::vector<SliceSample> out;
    int vol_idx = 0;
    for (const ManifestEntry& e : manifest.entries) {
        if (e.split != "train") continue;
        FieldStack images = read_field_stack((fs::path(dir) / e.image_path).string());
        MaskStack gts = load_target_stack(dir, e, target);
        if (images.depth() != gts.depth())
            throw std::runtime_error(e.id + ": image/mask depth mismatch");
        for (int i = 0; i < images.depth(); ++i) {
            SliceSample s;
            s.volume = vol_idx;
            s.index = i;
            s.tier = e.tier;
            s.image = images.slices[size_t(i)];
            s.target = gts.slices[size_t(i)];
            if (i > 0) s.prev_gt = gts.slices[size_t(i) - 1];
            if (i + 1 < images.depth()) s.next_gt = gts.slices[size_t(i) + 1];
            out.push_back(std::move(s));
        }
        ++vol_idx;
    }
    if (out.empty()) throw std::runtime_error("manifest has no train-split volumes");
    return out;
}

std::vector<EvalVolume> load_eval_volumes(const Manifest& manifest, const std::string& dir,
                                          Target target, const std::string& tier_filter,
                                          const std::string& split) {
    namespace fs = std::filesystem;
    std::vector<EvalVolume> out;
    for (const ManifestEntry& e : manifest.entries) {
        if (!split.empty() && e.split != split) continue;
        if (tier_filter == "general") {
            if (e.tier != "easy") continue;
        } else if (tier_filter == "complex") {
            if (e.tier != "complex") continue;
        } else if (tier_filter != "all") {
            throw ConfigError("unknown tier filter '" + tier_filter + "'");
        }
        EvalVolume v;
        v.id = e.id;
        v.tier = e.tier;
        v.images = read_field_stack((fs::path(dir) / e.image_path).string());
        v.targets = load_target_stack(dir, e, target);
        out.push_back(std::move(v));
    }
    return out;
}

NodeId loss_seg(Graph& g, NodeId s, NodeId a, NodeId y, double gamma_aux, double eps) {
    NodeId main = l_region(g, s, y, eps);
    if (a < 0 || gamma_aux == 0.0) return main;
    return g.add(main, g.mul_const(l_region(g, a, y, eps), gamma_aux));
}

StageWeights stage_weights(const CurriculumConfig& cfg, int epoch) {
    const LossWeights& w = cfg.weights;
    const int switch_epoch = int(std::floor(cfg.stage_split * cfg.epochs));
    StageWeights early{0, cfg.use_refine ? w.alpha1 : 0.0, cfg.use_pair ? w.alpha2 : 0.0, 0.0, 0.0};
    StageWeights late{1, cfg.use_refine ? w.beta2 : 0.0, 0.0, cfg.use_anat ? w.beta1 : 0.0,
                      cfg.use_xai ? w.beta3 : 0.0};
    if (epoch < switch_epoch) return early;
    if (!cfg.ramp || cfg.ramp_epochs <= 1) return late;
    double t = std::min(1.0, double(epoch - switch_epoch + 1) / double(cfg.ramp_epochs));
    StageWeights out;
    out.stage = 1;
    out.conf = (1.0 - t) * early.conf + t * late.conf;
    out.pair = (1.0 - t) * early.pair + t * late.pair;
    out.anat = (1.0 - t) * early.anat + t * late.anat;
    out.align = (1.0 - t) * early.align + t * late.align;
    return out;
}

namespace {

// metrics row slots filled by the sample builder
enum MetricSlot {
    M_MAIN, M_AUX, M_CONF, M_PAIR_SUM, M_PAIR_N, M_ANAT, M_OVLP, M_DIV, M_BOX, M_SLOTS,
};

struct SampleTermConfig {
    StageWeights sw;
    double pair_scale = 0.0;  // lambda_c * alpha_pair * B / total_pairs
};

}  // namespace

ModelParams train(const std::vector<SliceSample>& dataset, const PairNetParams* pair_classifier,
                  const CurriculumConfig& cfg, TrainReport* report) {
    cfg.validate();
    if (dataset.empty()) throw std::invalid_argument("train: dataset is empty");
    if (cfg.use_pair && cfg.weights.alpha2 > 0.0 && !pair_classifier)
        throw std::invalid_argument("train: pair regularizer enabled but no classifier given");

    ModelParams params = ModelParams::init(cfg.seed);
    if (report) report->config_echo = cfg.echo();
    if (cfg.epochs == 0) return params;

    Adam adam(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps);
    Rng shuffle_rng(Rng::mix(cfg.seed, 0x7261696e));
    std::vector<int> order(dataset.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);
    const double eps = cfg.weights.eps;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        const StageWeights sw = stage_weights(cfg, epoch);
        EpochStats stats;
        stats.epoch = epoch + 1;
        stats.stage = sw.stage;
        double comp_sum[M_SLOTS] = {0};
        int comp_n[M_SLOTS] = {0};
        double total_sum = 0.0;
        int steps = 0, n_total = 0;

        for (size_t start = 0; start < order.size(); start += size_t(cfg.batch_size)) {
            size_t stop = std::min(order.size(), start + size_t(cfg.batch_size));
            const int bsz = int(stop - start);
            int total_pairs = 0;
            if (sw.pair > 0.0) {
                for (size_t k = start; k < stop; ++k) {
                    const SliceSample& s = dataset[size_t(order[k])];
                    total_pairs += int(s.prev_gt.has_value()) + int(s.next_gt.has_value());
                }
            }
            const double pair_scale =
                total_pairs > 0 ? cfg.weights.lambda_c * double(bsz) / double(total_pairs) : 0.0;

            std::vector<const Tensor*> ptensors;
            for (const Tensor* t : std::as_const(params).all()) ptensors.push_back(t);

            SampleBuilder build = [&](Graph& g, const std::vector<NodeId>& pid, int k,
                                      std::vector<double>& metrics) -> NodeId {
                const SliceSample& s = dataset[size_t(order[start + size_t(k)])];
                metrics.assign(M_SLOTS, 0.0);
                ForwardNodes fw = model_forward(g, pid, s.image, cfg.use_refine);
                NodeId y = g.constant(to_tensor(s.target));
                NodeId p = g.sigmoid(fw.s);

                NodeId main = l_region(g, fw.s, y, eps);
                metrics[M_MAIN] = g.val(main).item();
                NodeId total = main;
                if (cfg.use_refine && cfg.weights.gamma_aux > 0.0) {
                    NodeId aux = l_region(g, fw.a, y, eps);
                    metrics[M_AUX] = g.val(aux).item();
                    total = g.add(total, g.mul_const(aux, cfg.weights.gamma_aux));
                }
                if (sw.conf > 0.0 && fw.m_c >= 0) {
                    NodeId conf = l_conf(g, fw.m_c, p, eps);
                    metrics[M_CONF] = g.val(conf).item();
                    total = g.add(total, g.mul_const(conf, sw.conf));
                }
                if (cfg.box_weight > 0.0) {
                    bool empty = false;
                    Box gt_box = box_from_mask(s.target, &empty);
                    Tensor bt(4, 1, 1);
                    bt.v = {gt_box.x_min, gt_box.y_min, gt_box.x_max, gt_box.y_max};
                    NodeId box = l_box(g, fw.b, g.constant(std::move(bt)));
                    metrics[M_BOX] = g.val(box).item();
                    total = g.add(total, g.mul_const(box, cfg.box_weight));
                }
                if (sw.pair > 0.0 && pair_scale > 0.0) {
                    PairPenalty pp = pair_penalty_terms(
                        g, p, s.prev_gt ? &*s.prev_gt : nullptr, s.next_gt ? &*s.next_gt : nullptr,
                        *pair_classifier);
                    if (pp.pairs > 0) {
                        metrics[M_PAIR_SUM] = g.val(pp.sum).item();
                        metrics[M_PAIR_N] = double(pp.pairs);
                        total = g.add(total, g.mul_const(pp.sum, sw.pair * pair_scale));
                    }
                }
                if (sw.anat > 0.0) {
                    NodeId anat = l_anat(g, p, y, cfg.k_skel, eps);
                    metrics[M_ANAT] = g.val(anat).item();
                    total = g.add(total, g.mul_const(anat, sw.anat));
                }
                if (sw.align > 0.0) {
                    // dedicated sub-backward on the surrogate; the field enters
                    // the loss as a constant
                    NodeId sur = surrogate_scalar(g, fw.s);
                    g.backward(sur);
                    EncoderTap tap = harvest_tap(g, fw.encoder);
                    g.zero_grads();
                    XaiField xai = xai_field(tap, s.image.height, s.image.width, eps);
                    if (!xai.degenerate) {
                        NodeId phi = g.constant(to_tensor(xai.phi));
                        NodeId phin = g.constant(to_tensor(xai.phi_norm));
                        NodeId align;
                        if (cfg.late_div_only) {
                            align = l_div(g, p, phin, eps);
                            metrics[M_DIV] = g.val(align).item();
                        } else {
                            NodeId ovlp = l_ovlp(g, p, phi, eps);
                            NodeId div = l_div(g, p, phin, eps);
                            metrics[M_OVLP] = g.val(ovlp).item();
                            metrics[M_DIV] = g.val(div).item();
                            align = g.add(ovlp, g.mul_const(div, cfg.weights.lambda_div));
                        }
                        total = g.add(total, g.mul_const(align, sw.align));
                    }
                }
                return total;
            };

            BatchResult res = batch_backward(ptensors, build, bsz, cfg.threads);
            const double inv = 1.0 / double(bsz);
            for (Tensor& gt : res.grads)
                for (double& v : gt.v) v *= inv;

            static const char* kNames[M_SLOTS] = {"L_main", "L_aux",  "L_conf", "L_pair_sum",
                                                  "pairs",  "L_anat", "L_ovlp", "L_div", "L_box"};
            for (int k = 0; k < bsz; ++k) {
                double loss = res.losses[size_t(k)];
                if (!std::isfinite(loss)) {
                    for (int m = 0; m < M_SLOTS; ++m)
                        if (!std::isfinite(res.metrics[size_t(k)][size_t(m)]))
                            throw NumericError(std::string("non-finite ") + kNames[m] + " at epoch " +
                                               std::to_string(epoch + 1));
                    throw NumericError("non-finite total loss at epoch " + std::to_string(epoch + 1));
                }
                total_sum += loss;
                for (int m = 0; m < M_SLOTS; ++m) {
                    comp_sum[m] += res.metrics[size_t(k)][size_t(m)];
                    ++comp_n[m];
                }
                ++n_total;
            }

            double post = 0.0;
            double pre = adam.step(params.all(), res.grads, cfg.clip_norm, &post);
            stats.grad_pre += pre;
            stats.grad_post += post;
            ++steps;
        }

        auto mean_of = [&](int slot) { return comp_n[slot] ? comp_sum[slot] / comp_n[slot] : 0.0; };
        stats.total = n_total ? total_sum / n_total : 0.0;
        stats.main = mean_of(M_MAIN);
        stats.aux = mean_of(M_AUX);
        stats.conf = mean_of(M_CONF);
        stats.pair = comp_sum[M_PAIR_N] > 0.0 ? comp_sum[M_PAIR_SUM] / comp_sum[M_PAIR_N] : 0.0;
        stats.anat = mean_of(M_ANAT);
        stats.ovlp = mean_of(M_OVLP);
        stats.div = mean_of(M_DIV);
        stats.box = mean_of(M_BOX);
        stats.grad_pre /= std::max(1, steps);
        stats.grad_post /= std::max(1, steps);
        if (report) report->epochs.push_back(stats);
    }
    return params;
}

void write_train_report_csv(const TrainReport& report, const std::string& path,
                            const std::vector<std::string>& extra_header) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    for (const std::string& h : extra_header) out << h << "\n";
    for (const std::string& h : report.config_echo) out << h << "\n";
    out << "epoch,stage,total,main,aux,conf,pair,anat,ovlp,div,box,grad_pre,grad_post\n";
    char buf[512];
    for (const EpochStats& e : report.epochs) {
        std::snprintf(buf, sizeof(buf),
                      "%d,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", e.epoch,
                      e.stage == 0 ? "early" : "late", e.total, e.main, e.aux, e.conf, e.pair,
                      e.anat, e.ovlp, e.div, e.box, e.grad_pre, e.grad_post);
        out << buf;
    }
}

}  // namespace xseg
