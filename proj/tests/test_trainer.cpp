#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "xseg/errors.hpp"
#include "xseg/optimizer.hpp"
#include "xseg/phantom.hpp"
#include "xseg/rng.hpp"
#include "xseg/trainer.hpp"

using namespace xseg;

namespace {

PhantomSpec tiny_spec(uint64_t seed) {
    PhantomSpec s;
    s.height = 16;
    s.width = 16;
    s.depth = 4;
    s.r_min = 4.0;
    s.r_max = 5.0;
    s.w_min = 2.0;
    s.w_max = 3.0;
    s.drift = 0.5;
    s.distractors_min = 0;
    s.distractors_max = 1;
    s.dr_min = 1.5;
    s.dr_max = 2.0;
    s.seed = seed;
    return s;
}

std::vector<SliceSample> tiny_dataset(int volumes) {
    std::vector<SliceSample> out;
    for (int v = 0; v < volumes; ++v) {
        PhantomVolume vol = generate(tiny_spec(100 + uint64_t(v)));
        for (int i = 0; i < vol.images.depth(); ++i) {
            SliceSample s;
            s.volume = v;
            s.index = i;
            s.image = vol.images.slices[size_t(i)];
            s.target = vol.wall_masks.slices[size_t(i)];
            if (i > 0) s.prev_gt = vol.wall_masks.slices[size_t(i) - 1];
            if (i + 1 < vol.images.depth()) s.next_gt = vol.wall_masks.slices[size_t(i) + 1];
            out.push_back(std::move(s));
        }
    }
    return out;
}

PairNetParams tiny_pairnet() {
    // quick classifier over the same tiny masks
    PhantomVolume vol = generate(tiny_spec(500));
    MaskStack stack;
    for (const Mask2D& m : vol.wall_masks.slices) stack.slices.push_back(m);
    std::vector<PairSample> pairs = sample_pairs(stack, 2, 9);
    PairTrainOptions opt;
    opt.epochs = 3;
    opt.seed = 3;
    return train_pairnet(pairs, opt);
}

}  // namespace

TEST_CASE("loss_seg composes the main and auxiliary terms") {
    Rng rng(3);
    Tensor s(1, 8, 8), a(1, 8, 8), y(1, 8, 8);
    for (double& v : s.v) v = rng.uniform(-2.0, 2.0);
    for (double& v : a.v) v = rng.uniform(-2.0, 2.0);
    for (double& v : y.v) v = rng.uniform() < 0.4 ? 1.0 : 0.0;
    Graph g;
    NodeId sc = g.constant(s), ac = g.constant(a), yc = g.constant(y);
    double main = g.val(l_region(g, sc, yc)).item();
    double aux = g.val(l_region(g, ac, yc)).item();
    CHECK(g.val(loss_seg(g, sc, ac, yc, 0.5, 1e-6)).item() ==
          doctest::Approx(main + 0.5 * aux).epsilon(1e-12));
    CHECK(g.val(loss_seg(g, sc, ac, yc, 0.0, 1e-6)).item() == doctest::Approx(main).epsilon(1e-12));
    CHECK(g.val(loss_seg(g, sc, -1, yc, 0.5, 1e-6)).item() == doctest::Approx(main).epsilon(1e-12));
}

TEST_CASE("early objective arithmetic") {
    // L_seg 0.6, L_conf 0.2, L_pair 0.4 with alpha = (0.1, 0.5) -> 0.82
    CurriculumConfig cfg;
    cfg.epochs = 10;
    StageWeights sw = stage_weights(cfg, 0);
    CHECK(sw.stage == 0);
    double j = 0.6 + sw.conf * 0.2 + sw.pair * 0.4;
    CHECK(j == doctest::Approx(0.82));
}

TEST_CASE("stage boundary uses the half-open rule") {
    CurriculumConfig cfg;
    cfg.epochs = 10;
    cfg.stage_split = 0.5;
    int early = 0;
    for (int e = 0; e < cfg.epochs; ++e)
        if (stage_weights(cfg, e).stage == 0) ++early;
    CHECK(early == 5);
    CHECK(stage_weights(cfg, 4).stage == 0);
    CHECK(stage_weights(cfg, 5).stage == 1);

    CurriculumConfig odd;
    odd.epochs = 9;
    odd.stage_split = 0.5;
    int early_odd = 0;
    for (int e = 0; e < odd.epochs; ++e)
        if (stage_weights(odd, e).stage == 0) ++early_odd;
    CHECK(early_odd == 4);                               // floor(4.5)
    CHECK(stage_weights(odd, 5).stage == 1);             // ceil(4.5) is late
    CHECK(stage_weights(odd, int(std::ceil(0.5 * 10))).stage == 1);
}

TEST_CASE("late weights drop the pair term and pick up anatomy and alignment") {
    CurriculumConfig cfg;
    cfg.epochs = 10;
    StageWeights late = stage_weights(cfg, 9);
    CHECK(late.stage == 1);
    CHECK(late.pair == 0.0);
    CHECK(late.anat == doctest::Approx(0.5));
    CHECK(late.align == doctest::Approx(0.2));
    CHECK(late.conf == doctest::Approx(0.1));

    cfg.use_anat = false;
    cfg.use_xai = false;
    StageWeights stripped = stage_weights(cfg, 9);
    CHECK(stripped.anat == 0.0);
    CHECK(stripped.align == 0.0);
}

TEST_CASE("the ramp blends into the late weights") {
    CurriculumConfig cfg;
    cfg.epochs = 10;
    cfg.ramp = true;
    cfg.ramp_epochs = 5;
    StageWeights first = stage_weights(cfg, 5);
    CHECK(first.stage == 1);
    CHECK(first.pair > 0.0);  // still fading out
    CHECK(first.anat < 0.5);
    StageWeights settled = stage_weights(cfg, 9);
    CHECK(settled.anat == doctest::Approx(0.5));
    CHECK(settled.pair == doctest::Approx(0.0));
}

TEST_CASE("global norm clipping rescales gradients before the update") {
    Tensor p1(1, 1, 2, 0.0);
    std::vector<Tensor> g1;
    g1.emplace_back(1, 1, 2);
    g1[0].v = {2.0, 0.0};  // norm 2
    Adam a1(0.1);
    double post = 0.0;
    double pre = a1.step({&p1}, g1, 1.0, &post);
    CHECK(pre == doctest::Approx(2.0));
    CHECK(post == doctest::Approx(1.0));

    // equivalent to feeding the pre-scaled gradient unclipped
    Tensor p2(1, 1, 2, 0.0);
    std::vector<Tensor> g2;
    g2.emplace_back(1, 1, 2);
    g2[0].v = {1.0, 0.0};
    Adam a2(0.1);
    a2.step({&p2}, g2, 1e9, nullptr);
    CHECK(p1.v == p2.v);
}

TEST_CASE("epochs zero returns the seeded initialization") {
    std::vector<SliceSample> data = tiny_dataset(1);
    CurriculumConfig cfg;
    cfg.epochs = 0;
    cfg.seed = 321;
    cfg.use_pair = false;
    ModelParams p = train(data, nullptr, cfg);
    ModelParams init = ModelParams::init(321);
    CHECK(p.e1w.v == init.e1w.v);
    CHECK(p.d3w.v == init.d3w.v);
}

TEST_CASE("training is deterministic and the descent smoke property holds") {
    std::vector<SliceSample> data = tiny_dataset(4);
    PairNetParams C = tiny_pairnet();
    CurriculumConfig cfg;
    cfg.epochs = 20;
    cfg.seed = 7;
    cfg.batch_size = 8;
    cfg.k_skel = 4;
    cfg.lr = 2e-3;
    TrainReport r1, r2;
    ModelParams a = train(data, &C, cfg, &r1);
    ModelParams b = train(data, &C, cfg, &r2);
    std::vector<const Tensor*> pa = std::as_const(a).all(), pb = std::as_const(b).all();
    for (size_t k = 0; k < pa.size(); ++k) CHECK(pa[k]->v == pb[k]->v);
    REQUIRE(r1.epochs.size() == 20);
    for (const EpochStats& e : r1.epochs) {
        CHECK(std::isfinite(e.total));
        CHECK(e.grad_post <= cfg.clip_norm + 1e-6);
    }
    CHECK(r1.epochs.back().main < r1.epochs.front().main);

    // median of the last five below the median of the first five
    auto median5 = [&](int start) {
        std::vector<double> v;
        for (int i = start; i < start + 5; ++i) v.push_back(r1.epochs[size_t(i)].main);
        std::sort(v.begin(), v.end());
        return v[2];
    };
    CHECK(median5(15) < median5(0));
}

TEST_CASE("training aborts on a non-finite loss naming a component") {
    std::vector<SliceSample> data = tiny_dataset(1);
    CurriculumConfig cfg;
    cfg.epochs = 4;
    cfg.use_pair = false;
    cfg.lr = 1e150;  // guarantees overflow to NaN within a few steps
    cfg.clip_norm = 1e300;
    CHECK_THROWS_AS(train(data, nullptr, cfg), NumericError);
}

TEST_CASE("the config echo pins the divergence coefficient") {
    CurriculumConfig cfg;
    bool found = false;
    for (const std::string& line : cfg.echo())
        if (line.find("lambda_div=0.2") != std::string::npos) found = true;
    CHECK(found);
}
