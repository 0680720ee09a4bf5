// xseg: phantom generation, pair-classifier and curriculum training,
// evaluation, failure probing and self-verification in one binary.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "xseg/config.hpp"
#include "xseg/errors.hpp"
#include "xseg/model.hpp"
#include "xseg/morphology.hpp"
#include "xseg/pairnet.hpp"
#include "xseg/phantom.hpp"
#include "xseg/probe.hpp"
#include "xseg/rng.hpp"
#include "xseg/trainer.hpp"
#include "xseg/verify.hpp"
#include "xseg/version.hpp"

namespace fs = std::filesystem;
using namespace xseg;

namespace {

Target parse_target(const std::string& t) {
    if (t == "wall") return Target::wall;
    if (t == "lumen") return Target::lumen;
    throw ConfigError("target must be 'wall' or 'lumen', got '" + t + "'");
}

// ---------------------------------------------------------------------------
// phantom
// ---------------------------------------------------------------------------

RunConfig phantom_config() {
    RunConfig c;
    c.define("n_volumes", "10");
    c.define("split", "0.8");
    c.define("complex_fraction", "0.5");
    c.define("train_complex_fraction", "0");
    c.define("seed", "1");
    c.define("height", "64");
    c.define("width", "64");
    c.define("depth", "8");
    c.define("drift", "1.0");
    c.define("noise", "0.05");
    c.define("mu_b", "0.2");
    c.define("mu_l", "0.8");
    c.define("easy_r_min", "10");
    c.define("easy_r_max", "16");
    c.define("easy_w_min", "3");
    c.define("easy_w_max", "6");
    c.define("easy_mu_w", "0.45");
    c.define("easy_distractors_min", "1");
    c.define("easy_distractors_max", "3");
    c.define("complex_r_min", "10");
    c.define("complex_r_max", "16");
    c.define("complex_w_min", "1");
    c.define("complex_w_max", "2");
    c.define("complex_mu_w", "0.28");
    c.define("complex_distractors_min", "2");
    c.define("complex_distractors_max", "4");
    c.define("dr_min", "2");
    c.define("dr_max", "5");
    c.define("di_jitter", "0.05");
    c.define("annulus_only", "0");
    return c;
}

DatasetParams dataset_params_from(const RunConfig& c, const std::string& out_dir) {
    DatasetParams p;
    p.n_volumes = c.integer("n_volumes");
    p.split = c.real("split");
    p.complex_fraction = c.real("complex_fraction");
    p.train_complex_fraction = c.real("train_complex_fraction");
    p.seed = c.u64("seed");
    p.out_dir = out_dir;
    auto shared = [&](PhantomSpec& s) {
        s.height = c.integer("height");
        s.width = c.integer("width");
        s.depth = c.integer("depth");
        s.drift = c.real("drift");
        s.noise = c.real("noise");
        s.mu_b = c.real("mu_b");
        s.mu_l = c.real("mu_l");
        s.dr_min = c.real("dr_min");
        s.dr_max = c.real("dr_max");
        s.di_jitter = c.real("di_jitter");
        s.annulus_only = c.boolean("annulus_only");
    };
    shared(p.base_easy);
    p.base_easy.r_min = c.real("easy_r_min");
    p.base_easy.r_max = c.real("easy_r_max");
    p.base_easy.w_min = c.real("easy_w_min");
    p.base_easy.w_max = c.real("easy_w_max");
    p.base_easy.mu_w = c.real("easy_mu_w");
    p.base_easy.distractors_min = c.integer("easy_distractors_min");
    p.base_easy.distractors_max = c.integer("easy_distractors_max");
    shared(p.base_complex);
    p.base_complex.r_min = c.real("complex_r_min");
    p.base_complex.r_max = c.real("complex_r_max");
    p.base_complex.w_min = c.real("complex_w_min");
    p.base_complex.w_max = c.real("complex_w_max");
    p.base_complex.mu_w = c.real("complex_mu_w");
    p.base_complex.distractors_min = c.integer("complex_distractors_min");
    p.base_complex.distractors_max = c.integer("complex_distractors_max");
    return p;
}

int cmd_phantom(const std::string& spec_path, const std::string& out_dir,
                const std::string& seed_override) {
    RunConfig cfg = phantom_config();
    if (!spec_path.empty()) cfg.load_file(spec_path);
    if (!seed_override.empty()) cfg.set("seed", seed_override);
    DatasetParams params = dataset_params_from(cfg, out_dir);
    Manifest man = make_dataset(params);
    int train = 0, general = 0, complex_count = 0;
    for (const ManifestEntry& e : man.entries) {
        if (e.split == "train")
            ++train;
        else if (e.tier == "complex")
            ++complex_count;
        else
            ++general;
    }
    std::printf("wrote %d volumes to %s (train=%d test_general=%d test_complex=%d)\n",
                int(man.entries.size()), out_dir.c_str(), train, general, complex_count);
    std::printf("manifest: %s\n", (fs::path(out_dir) / "manifest.txt").string().c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// train-pairs
// ---------------------------------------------------------------------------

RunConfig pairs_config() {
    RunConfig c;
    c.define("target", "wall");
    c.define("epochs", "30");
    c.define("lr", "0.001");
    c.define("seed", "1");
    c.define("batch", "16");
    c.define("neg_ratio", "1.0");
    c.define("holdout", "0.2");
    c.define("threads", "1");
    return c;
}

struct PairData {
    std::vector<PairSample> train, holdout;
};

PairData collect_pairs(const Manifest& man, const std::string& dir, Target target,
                       double neg_ratio, double holdout_frac, uint64_t seed) {
    std::vector<const ManifestEntry*> train_vols;
    for (const ManifestEntry& e : man.entries)
        if (e.split == "train") train_vols.push_back(&e);
    if (train_vols.empty()) throw ConfigError("manifest has no train-split volumes");
    size_t n_hold = size_t(std::lround(holdout_frac * double(train_vols.size())));
    n_hold = std::min(n_hold, train_vols.size() - 1);
    PairData out;
    for (size_t v = 0; v < train_vols.size(); ++v) {
        const ManifestEntry& e = *train_vols[v];
        const std::string& rel = target == Target::wall ? e.wall_path : e.lumen_path;
        MaskStack stack = read_mask_stack((fs::path(dir) / rel).string());
        int n_pos = stack.depth() - 1;
        int n_neg = int(std::lround(neg_ratio * n_pos));
        std::vector<PairSample> pairs =
            sample_pairs(stack, n_neg, Rng::mix(seed, uint64_t(v)), int(v));
        auto& dst = v + n_hold >= train_vols.size() ? out.holdout : out.train;
        for (PairSample& p : pairs) dst.push_back(std::move(p));
    }
    return out;
}

int cmd_train_pairs(const std::string& data, const std::string& out_path,
                    const std::string& config_file,
                    const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig cfg = pairs_config();
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    Manifest man = read_manifest(data);
    const std::string dir = fs::path(data).parent_path().string();
    Target target = parse_target(cfg.str("target"));

    PairData pd = collect_pairs(man, dir, target, cfg.real("neg_ratio"), cfg.real("holdout"),
                                cfg.u64("seed"));
    PairTrainOptions opt;
    opt.epochs = cfg.integer("epochs");
    opt.lr = cfg.real("lr");
    opt.seed = cfg.u64("seed");
    opt.batch = cfg.integer("batch");
    opt.threads = cfg.integer("threads");
    PairTrainHistory hist;
    PairNetParams params = train_pairnet(pd.train, opt, &hist);
    save_pairnet(params, out_path);
    write_pair_history_csv(hist, out_path + ".history.csv", cfg.header_lines("train-pairs"));
    double acc = pd.holdout.empty() ? 0.0 : pairnet_accuracy(params, pd.holdout);
    std::printf("pairs: %zu train / %zu holdout, params=%zu\n", pd.train.size(), pd.holdout.size(),
                params.count());
    std::printf("held-out accuracy: %.4f\n", acc);
    std::printf("checkpoint: %s\n", out_path.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

RunConfig train_config() {
    RunConfig c;
    c.define("epochs", "40");
    c.define("stage_split", "0.5");
    c.define("lr", "0.001");
    c.define("clip_norm", "1.0");
    c.define("batch_size", "8");
    c.define("seed", "42");
    c.define("kappa", "1.0");
    c.define("k_skel", "10");
    c.define("lambda_div", "0.2");
    c.define("lambda_c", "1.0");
    c.define("gamma_aux", "0.5");
    c.define("alpha1", "0.1");
    c.define("alpha2", "0.5");
    c.define("beta1", "0.5");
    c.define("beta2", "0.1");
    c.define("beta3", "0.2");
    c.define("eps", "1e-06");
    c.define("box_weight", "0.1");
    c.define("late_alignment", "full");
    c.define("ramp", "0");
    c.define("ramp_epochs", "5");
    c.define("threads", "1");
    c.define("use_xai", "1");
    c.define("use_anat", "1");
    c.define("use_refine", "1");
    c.define("use_pair", "1");
    return c;
}

CurriculumConfig curriculum_from(const RunConfig& c) {
    CurriculumConfig k;
    k.epochs = c.integer("epochs");
    k.stage_split = c.real("stage_split");
    k.lr = c.real("lr");
    k.clip_norm = c.real("clip_norm");
    k.batch_size = c.integer("batch_size");
    k.seed = c.u64("seed");
    k.kappa = c.real("kappa");
    k.k_skel = c.integer("k_skel");
    k.weights.lambda_div = c.real("lambda_div");
    k.weights.lambda_c = c.real("lambda_c");
    k.weights.gamma_aux = c.real("gamma_aux");
    k.weights.alpha1 = c.real("alpha1");
    k.weights.alpha2 = c.real("alpha2");
    k.weights.beta1 = c.real("beta1");
    k.weights.beta2 = c.real("beta2");
    k.weights.beta3 = c.real("beta3");
    k.weights.eps = c.real("eps");
    k.box_weight = c.real("box_weight");
    const std::string la = c.str("late_alignment");
    if (la != "full" && la != "div_only")
        throw ConfigError("late_alignment must be 'full' or 'div_only', got '" + la + "'");
    k.late_div_only = la == "div_only";
    k.ramp = c.boolean("ramp");
    k.ramp_epochs = c.integer("ramp_epochs");
    k.threads = c.integer("threads");
    k.use_xai = c.boolean("use_xai");
    k.use_anat = c.boolean("use_anat");
    k.use_refine = c.boolean("use_refine");
    k.use_pair = c.boolean("use_pair");
    return k;
}

int cmd_train(const std::string& data, const std::string& pairnet_path, const std::string& target_s,
              const std::string& out_path, const std::string& config_file,
              const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig cfg = train_config();
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    Target target = parse_target(target_s);
    CurriculumConfig cc = curriculum_from(cfg);

    Manifest man = read_manifest(data);
    const std::string dir = fs::path(data).parent_path().string();
    std::vector<SliceSample> dataset = load_training_set(man, dir, target);

    PairNetParams pair_params;
    bool have_pairnet = false;
    if (cc.use_pair && cc.weights.alpha2 > 0.0) {
        if (pairnet_path.empty())
            throw ConfigError("--pairnet is required unless the pair term is disabled");
        pair_params = load_pairnet(pairnet_path);
        have_pairnet = true;
    }

    TrainReport report;
    ModelParams params = train(dataset, have_pairnet ? &pair_params : nullptr, cc, &report);
    save_model(params, out_path);
    write_train_report_csv(report, out_path + ".report.csv", cfg.header_lines("train"));
    double last = report.epochs.empty() ? 0.0 : report.epochs.back().total;
    std::printf("trained %d epochs on %zu slices (target=%s), final total loss %.6g\n", cc.epochs,
                dataset.size(), target_s.c_str(), last);
    std::printf("checkpoint: %s\n", out_path.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

RunConfig eval_config() {
    RunConfig c;
    c.define("kappa", "1.0");
    c.define("threshold", "0.5");
    c.define("oracle", "0");
    return c;
}

struct EvalRow {
    std::string slice_id, volume, tier;
    double iou, dice, hd95_px;
    std::string flags;
};

int cmd_eval(const std::string& model_path, const std::string& data, const std::string& target_s,
             const std::string& tier, const std::string& out_csv, const std::string& config_file,
             const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig cfg = eval_config();
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    Target target = parse_target(target_s);
    const bool oracle_mode = cfg.boolean("oracle");
    const double kappa = cfg.real("kappa");
    const float thr = float(cfg.real("threshold"));

    Manifest man = read_manifest(data);
    const std::string dir = fs::path(data).parent_path().string();
    std::vector<EvalVolume> vols = load_eval_volumes(man, dir, target, tier);
    if (vols.empty()) throw ConfigError("no test volumes match tier '" + tier + "'");

    ModelParams params;
    if (!oracle_mode) params = load_model(model_path);

    std::vector<EvalRow> rows;
    for (const EvalVolume& v : vols) {
        for (int i = 0; i < v.images.depth(); ++i) {
            Mask2D pred;
            if (oracle_mode) {
                pred = v.targets.slices[size_t(i)];
            } else {
                InferResult ir = infer(params, v.images.slices[size_t(i)], kappa);
                pred = binarize(ir.p_final, thr);
            }
            const Mask2D& gt = v.targets.slices[size_t(i)];
            IouDice id = iou_dice(pred, gt);
            Hd95Result hd = hd95(pred, gt);
            EvalRow row;
            row.slice_id = v.id + "/" + std::to_string(i);
            row.volume = v.id;
            row.tier = v.tier;
            row.iou = 100.0 * id.iou;
            row.dice = 100.0 * id.dice;
            row.hd95_px = hd.value;
            if (id.both_empty) row.flags += "both_empty;";
            if (hd.sentinel) row.flags += "hd_sentinel;";
            if (pred.empty_mask() && !gt.empty_mask()) row.flags += "empty_pred;";
            rows.push_back(std::move(row));
        }
    }

    std::ofstream out(out_csv, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + out_csv);
    for (const std::string& h : cfg.header_lines("eval")) out << h << "\n";
    out << "slice_id,volume,tier,iou_pct,dice_pct,hd95_px,flags\n";
    char buf[256];
    for (const EvalRow& r : rows) {
        std::snprintf(buf, sizeof(buf), "%s,%s,%s,%.9g,%.9g,%.9g,%s\n", r.slice_id.c_str(),
                      r.volume.c_str(), r.tier.c_str(), r.iou, r.dice, r.hd95_px, r.flags.c_str());
        out << buf;
    }
    auto summary = [&](const std::string& tag, auto pred) {
        std::vector<const EvalRow*> sel;
        for (const EvalRow& r : rows)
            if (pred(r)) sel.push_back(&r);
        if (sel.empty()) return;
        auto stats = [&](auto get) {
            double m = 0.0;
            for (const EvalRow* r : sel) m += get(*r);
            m /= double(sel.size());
            double s = 0.0;
            for (const EvalRow* r : sel) s += (get(*r) - m) * (get(*r) - m);
            s = sel.size() > 1 ? std::sqrt(s / double(sel.size() - 1)) : 0.0;
            return std::pair<double, double>{m, s};
        };
        auto [im, is] = stats([](const EvalRow& r) { return r.iou; });
        auto [dm, ds] = stats([](const EvalRow& r) { return r.dice; });
        auto [hm, hs] = stats([](const EvalRow& r) { return r.hd95_px; });
        std::snprintf(buf, sizeof(buf),
                      "summary,%s,n=%zu,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", tag.c_str(), sel.size(),
                      im, is, dm, ds, hm, hs);
        out << buf;
        std::printf("%s: n=%zu IoU %.2f±%.2f%% Dice %.2f±%.2f%% HD95 %.3f±%.3f px\n", tag.c_str(),
                    sel.size(), im, is, dm, ds, hm, hs);
    };
    out << "# summary columns: tag,n,iou_mean,iou_sd,dice_mean,dice_sd,hd95_mean,hd95_sd\n";
    summary("general", [](const EvalRow& r) { return r.tier == "easy"; });
    summary("complex", [](const EvalRow& r) { return r.tier == "complex"; });
    summary("all", [](const EvalRow&) { return true; });
    return 0;
}

// ---------------------------------------------------------------------------
// probe
// ---------------------------------------------------------------------------

RunConfig probe_config() {
    RunConfig c;
    c.define("kappa", "1.0");
    c.define("threshold", "0.5");
    c.define("r", "1");
    c.define("topk", "4");
    c.define("oracle", "0");
    c.define("tier", "all");
    return c;
}

int cmd_probe(const std::string& model_path, const std::string& data, const std::string& target_s,
              const std::string& out_csv, const std::string& overlay_dir,
              const std::string& config_file,
              const std::vector<std::pair<std::string, std::string>>& overrides) {
    RunConfig cfg = probe_config();
    if (!config_file.empty()) cfg.load_file(config_file);
    for (const auto& [k, v] : overrides) cfg.set(k, v);
    Target target = parse_target(target_s);
    const bool oracle_mode = cfg.boolean("oracle");
    const double kappa = cfg.real("kappa");
    const float thr = float(cfg.real("threshold"));
    const int band_r = cfg.integer("r");
    const int topk = cfg.integer("topk");

    Manifest man = read_manifest(data);
    const std::string dir = fs::path(data).parent_path().string();
    std::vector<EvalVolume> vols = load_eval_volumes(man, dir, target, cfg.str("tier"));
    if (vols.empty()) throw ConfigError("no test volumes match tier filter");

    ModelParams params;
    if (!oracle_mode) params = load_model(model_path);

    ProbeReport rep;
    rep.band_r = band_r;
    struct OverlayCandidate {
        double dice;
        std::string name;
        Field2D image, phi;
    };
    std::vector<OverlayCandidate> candidates;
    std::vector<double> jsds, fmis, inv_iou, inv_dice;

    for (const EvalVolume& v : vols) {
        MaskStack preds;
        for (int i = 0; i < v.images.depth(); ++i) {
            const Mask2D& gt = v.targets.slices[size_t(i)];
            Field2D p_field, phi;
            bool degenerate = false;
            if (oracle_mode) {
                p_field = Field2D(gt.height, gt.width);
                for (size_t k = 0; k < gt.data.size(); ++k) p_field.data[k] = gt.data[k] ? 1.f : 0.f;
                phi = p_field;
                degenerate = gt.empty_mask();
            } else {
                InferResult ir = infer(params, v.images.slices[size_t(i)], kappa);
                p_field = ir.p_final;
                phi = ir.xai.phi;
                degenerate = ir.xai.degenerate;
            }
            Mask2D pred = binarize(p_field, thr);
            preds.slices.push_back(pred);

            ProbeRow row;
            row.slice_id = v.id + "/" + std::to_string(i);
            row.jsd = jsd(p_field, phi);
            FoiFmi ff = foi_fmi(phi, gt);
            row.foi = ff.foi;
            row.fmi = ff.fmi;
            row.leak_phi = leak(phi, gt);
            row.leak_p = leak(p_field, gt);
            row.bcov_r = bcov(phi, gt, band_r);
            IouDice id = iou_dice(pred, gt);
            row.iou = id.iou;
            row.dice = id.dice;
            Hd95Result hd = hd95(pred, gt);
            row.hd95_px = hd.value;
            if (degenerate || ff.degenerate) row.flags += "deg_phi;";
            if (id.both_empty) row.flags += "both_empty;";
            if (hd.sentinel) row.flags += "hd_sentinel;";
            jsds.push_back(row.jsd);
            fmis.push_back(row.fmi);
            inv_iou.push_back(1.0 - row.iou);
            inv_dice.push_back(1.0 - row.dice);
            candidates.push_back(
                {row.dice, v.id + "_s" + std::to_string(i), v.images.slices[size_t(i)], phi});
            rep.rows.push_back(std::move(row));
        }
        if (preds.depth() >= 2) rep.e_cons_per_volume.push_back({v.id, e_cons(preds)});
    }
    double ec = 0.0;
    for (const auto& [id, r] : rep.e_cons_per_volume) ec += r.value;
    rep.e_cons_mean = rep.e_cons_per_volume.empty() ? 0.0 : ec / double(rep.e_cons_per_volume.size());
    if (jsds.size() >= 2) {
        try {
            rep.spearman_jsd_err = spearman(jsds, inv_iou);
            rep.spearman_fmi_err = spearman(fmis, inv_dice);
            rep.has_spearman = true;
        } catch (const std::invalid_argument&) {
            rep.has_spearman = false;  // zero variance
        }
    }
    write_probe_csv(rep, out_csv, cfg.header_lines("probe"));

    if (topk > 0) {
        std::string odir = overlay_dir.empty()
                               ? (fs::path(out_csv).parent_path() / "overlays").string()
                               : overlay_dir;
        fs::create_directories(odir);
        std::sort(candidates.begin(), candidates.end(),
                  [](const auto& a, const auto& b) { return a.dice < b.dice; });
        int n = std::min<int>(topk, int(candidates.size()));
        for (int k = 0; k < n; ++k) {
            const OverlayCandidate& c = candidates[size_t(k)];
            write_pgm(c.image, (fs::path(odir) / (c.name + "_img.pgm")).string());
            float peak = 0.f;
            for (float x : c.phi.data) peak = std::max(peak, x);
            write_pgm(c.phi, (fs::path(odir) / (c.name + "_phi.pgm")).string(), 0.f,
                      peak > 0.f ? peak : 1.f);
            write_ppm_overlay(c.image, c.phi, (fs::path(odir) / (c.name + "_overlay.ppm")).string());
        }
        std::printf("overlays for %d worst slices in %s\n", n, odir.c_str());
    }
    std::printf("probe report: %s (%zu slices, e_cons_mean=%.4f)\n", out_csv.c_str(),
                rep.rows.size(), rep.e_cons_mean);
    if (rep.has_spearman)
        std::printf("spearman: rho(JSD,1-IoU)=%.4f rho(FMI,1-Dice)=%.4f\n", rep.spearman_jsd_err,
                    rep.spearman_fmi_err);
    return 0;
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

int cmd_verify(const std::string& suite) {
    if (suite != "grad" && suite != "metrics" && suite != "all")
        throw ConfigError("unknown suite '" + suite + "' (expected grad|metrics|all)");
    bool ok = true;
    if (suite == "grad" || suite == "all") {
        VerifySummary g = verify_gradients(20, 7, true);
        std::printf("grad suite: max_rel_err=%.3g excluded=%d %s\n", g.grad_max_rel_err,
                    g.grad_excluded, g.pass ? "PASS" : "FAIL");
        ok = ok && g.pass;
    }
    if (suite == "metrics" || suite == "all") {
        VerifySummary m = verify_metrics(150, 7, true);
        std::printf("metric suite: %d cases, %d mismatches %s\n", m.metric_cases,
                    m.metric_mismatches, m.pass ? "PASS" : "FAIL");
        ok = ok && m.pass;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"XAI-guided segmentation training and failure analysis on synthetic phantoms"};
    app.set_version_flag("--version", std::string("xseg ") + kVersion);
    app.require_subcommand(1);

    std::string spec, out, data, config_file, seed_override, model_path, pairnet_path;
    std::string target = "wall", tier = "all", suite = "all", overlay_dir;
    std::vector<std::pair<std::string, std::string>> overrides;

    auto add_override_flags = [&overrides](CLI::App* cmd, const std::vector<std::string>& keys) {
        for (const std::string& key : keys) {
            cmd->add_option_function<std::string>(
                "--" + key, [&overrides, key](const std::string& v) { overrides.push_back({key, v}); },
                "override config key " + key);
        }
    };

    CLI::App* phantom = app.add_subcommand("phantom", "generate a phantom dataset");
    phantom->add_option("--spec", spec, "key=value spec file");
    phantom->add_option("--out", out, "output directory")->required();
    phantom->add_option("--seed", seed_override, "seed override");

    CLI::App* pairs = app.add_subcommand("train-pairs", "train the slice-pair classifier");
    pairs->add_option("--data", data, "manifest path")->required();
    pairs->add_option("--out", out, "checkpoint path")->required();
    pairs->add_option("--config", config_file, "key=value config file");
    add_override_flags(pairs, {"target", "epochs", "lr", "seed", "batch", "neg_ratio", "holdout",
                               "threads"});

    CLI::App* train_cmd = app.add_subcommand("train", "train the segmentation model");
    train_cmd->add_option("--data", data, "manifest path")->required();
    train_cmd->add_option("--pairnet", pairnet_path, "pair classifier checkpoint");
    train_cmd->add_option("--target", target, "wall|lumen")->required();
    train_cmd->add_option("--out", out, "checkpoint path")->required();
    train_cmd->add_option("--config", config_file, "key=value config file");
    train_cmd->add_flag_callback("--no-xai", [&]() { overrides.push_back({"use_xai", "0"}); },
                                 "drop alignment terms");
    train_cmd->add_flag_callback("--no-anat", [&]() { overrides.push_back({"use_anat", "0"}); },
                                 "drop anatomy terms");
    train_cmd->add_flag_callback(
        "--no-refine", [&]() { overrides.push_back({"use_refine", "0"}); },
        "drop auxiliary decoder, confidence head and modulation");
    train_cmd->add_flag_callback("--no-pair", [&]() { overrides.push_back({"use_pair", "0"}); },
                                 "drop the pair-consistency regularizer");
    add_override_flags(train_cmd,
                       {"epochs", "stage_split", "lr", "clip_norm", "batch_size", "seed", "kappa",
                        "k_skel", "lambda_div", "lambda_c", "gamma_aux", "alpha1", "alpha2", "beta1",
                        "beta2", "beta3", "box_weight", "late_alignment", "ramp", "threads"});

    CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
    eval_cmd->add_option("--model", model_path, "model checkpoint");
    eval_cmd->add_option("--data", data, "manifest path")->required();
    eval_cmd->add_option("--target", target, "wall|lumen")->required();
    eval_cmd->add_option("--tier", tier, "general|complex|all");
    eval_cmd->add_option("--out", out, "output CSV")->required();
    eval_cmd->add_option("--config", config_file, "key=value config file");
    add_override_flags(eval_cmd, {"kappa", "threshold", "oracle"});

    CLI::App* probe_cmd = app.add_subcommand("probe", "failure-analysis probe");
    probe_cmd->add_option("--model", model_path, "model checkpoint");
    probe_cmd->add_option("--data", data, "manifest path")->required();
    probe_cmd->add_option("--target", target, "wall|lumen")->required();
    probe_cmd->add_option("--out", out, "output CSV")->required();
    probe_cmd->add_option("--overlay-dir", overlay_dir, "overlay output directory");
    probe_cmd->add_option("--config", config_file, "key=value config file");
    add_override_flags(probe_cmd, {"kappa", "threshold", "r", "topk", "oracle", "tier"});

    CLI::App* verify_cmd = app.add_subcommand("verify", "run self-verification suites");
    verify_cmd->add_option("--suite", suite, "grad|metrics|all");

    try {
        app.parse(argc, argv);
        if (phantom->parsed()) return cmd_phantom(spec, out, seed_override);
        if (pairs->parsed()) return cmd_train_pairs(data, out, config_file, overrides);
        if (train_cmd->parsed())
            return cmd_train(data, pairnet_path, target, out, config_file, overrides);
        if (eval_cmd->parsed())
            return cmd_eval(model_path, data, target, tier, out, config_file, overrides);
        if (probe_cmd->parsed())
            return cmd_probe(model_path, data, target, out, overlay_dir, config_file, overrides);
        if (verify_cmd->parsed()) return cmd_verify(suite);
        return 2;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const FormatError& e) {
        std::fprintf(stderr, "format error: %s\n", e.what());
        return 2;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numeric failure: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
