#include "xseg/pairnet.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <utility>
#include <stdexcept>

#include "xseg/optimizer.hpp"
#include "xseg/rng.hpp"
#include "xseg/serialize.hpp"

namespace xseg {

namespace {

Tensor kaiming(Rng& rng, int c, int h, int w, int fan_in) {
    Tensor t(c, h, w);
    double limit = std::sqrt(6.0 / double(fan_in));
    for (double& v : t.v) v = rng.uniform(-limit, limit);
    return t;
}

constexpr double kEps = 1e-6;

const std::vector<std::vector<uint32_t>>& pairnet_dims() {
    static const std::vector<std::vector<uint32_t>> dims = {
        {8, 2, 3, 3}, {8}, {16, 8, 3, 3}, {16}, {1, 16}, {1},
    };
    return dims;
}

}  // namespace

PairNetParams PairNetParams::init(uint64_t seed) {
    PairNetParams p;
    Rng r1(Rng::mix(seed, 0)), r2(Rng::mix(seed, 1)), r3(Rng::mix(seed, 2));
    p.c1w = kaiming(r1, 8 * 2, 3, 3, 2 * 9);
    p.c1b = Tensor(8, 1, 1);
    p.c2w = kaiming(r2, 16 * 8, 3, 3, 8 * 9);
    p.c2b = Tensor(16, 1, 1);
    p.fw = kaiming(r3, 1 * 16, 1, 1, 16);
    p.fb = Tensor(1, 1, 1);
    return p;
}

std::vector<Tensor*> PairNetParams::all() { return {&c1w, &c1b, &c2w, &c2b, &fw, &fb}; }

std::vector<const Tensor*> PairNetParams::all() const {
    return {&c1w, &c1b, &c2w, &c2b, &fw, &fb};
}

size_t PairNetParams::count() const {
    size_t n = 0;
    for (const Tensor* t : all()) n += t->size();
    return n;
}

std::vector<PairSample> sample_pairs(const MaskStack& volume, int n_neg, uint64_t seed,
                                     int volume_id, bool* clamped) {
    const int d = volume.depth();
    if (d < 2) throw std::invalid_argument("sample_pairs: stack depth must be >= 2");
    if (n_neg > 0 && d < 3)
        throw std::invalid_argument("sample_pairs: negatives need stack depth >= 3");
    std::vector<PairSample> out;
    for (int i = 0; i + 1 < d; ++i) {
        PairSample s;
        s.first = volume.slices[size_t(i)];
        s.second = volume.slices[size_t(i) + 1];
        s.label = 1;
        s.volume = volume_id;
        s.i = i;
        s.j = i + 1;
        out.push_back(std::move(s));
    }
    std::vector<std::pair<int, int>> candidates;
    for (int i = 0; i < d; ++i)
        for (int j = i + 2; j < d; ++j) candidates.push_back({i, j});
    bool clamp = n_neg > int(candidates.size());
    if (clamped) *clamped = clamp;
    int take = clamp ? int(candidates.size()) : n_neg;
    Rng rng(seed);
    rng.shuffle(candidates);
    for (int k = 0; k < take; ++k) {
        auto [i, j] = candidates[size_t(k)];
        PairSample s;
        s.first = volume.slices[size_t(i)];
        s.second = volume.slices[size_t(j)];
        s.label = 0;
        s.volume = volume_id;
        s.i = i;
        s.j = j;
        out.push_back(std::move(s));
    }
    return out;
}

NodeId pairnet_forward(Graph& g, const std::vector<NodeId>& pid, NodeId z) {
    if (pid.size() != 6) throw std::invalid_argument("pairnet_forward: expected 6 parameter nodes");
    NodeId h1 = g.relu(g.conv2d(z, pid[0], pid[1], 8, 2, 3, 2));
    NodeId h2 = g.relu(g.conv2d(h1, pid[2], pid[3], 16, 8, 3, 2));
    NodeId pooled = g.global_avg_pool(h2);
    return g.sigmoid(g.dense(pooled, pid[4], pid[5], 1, 16));
}

NodeId pairnet_score(Graph& g, const PairNetParams& params, NodeId z) {
    std::vector<NodeId> pid;
    for (const Tensor* t : params.all()) pid.push_back(g.stop_gradient(g.input(*t)));
    return pairnet_forward(g, pid, z);
}

namespace {

Tensor pair_tensor(const Mask2D& a, const Mask2D& b) {
    if (a.height != b.height || a.width != b.width)
        throw std::invalid_argument("pair channels must share shape");
    Tensor z(2, a.height, a.width);
    for (size_t i = 0; i < a.data.size(); ++i) {
        z.v[i] = a.data[i] ? 1.0 : 0.0;
        z.v[a.data.size() + i] = b.data[i] ? 1.0 : 0.0;
    }
    return z;
}

}  // namespace

PairNetParams train_pairnet(const std::vector<PairSample>& samples, const PairTrainOptions& opt,
                            PairTrainHistory* history) {
    int pos = 0, neg = 0;
    for (const PairSample& s : samples) (s.label ? pos : neg)++;
    if (pos == 0 || neg == 0)
        throw std::invalid_argument("train_pairnet: need both classes, have " + std::to_string(pos) +
                                    " positive / " + std::to_string(neg) + " negative");
    PairNetParams params = PairNetParams::init(opt.seed);
    if (opt.epochs == 0) return params;

    Adam adam(opt.lr);
    Rng shuffle_rng(Rng::mix(opt.seed, 0x5151));
    std::vector<int> order(samples.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = int(i);

    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        int correct = 0;
        for (size_t start = 0; start < order.size(); start += size_t(opt.batch)) {
            size_t stop = std::min(order.size(), start + size_t(opt.batch));
            int bsz = int(stop - start);
            std::vector<const Tensor*> ptensors = std::as_const(params).all();
            SampleBuilder build = [&](Graph& g, const std::vector<NodeId>& pid, int k,
                                      std::vector<double>& metrics) {
                const PairSample& s = samples[size_t(order[start + size_t(k)])];
                NodeId z = g.constant(pair_tensor(s.first, s.second));
                NodeId score = pairnet_forward(g, pid, z);
                metrics.resize(1);
                metrics[0] = g.val(score).item();
                NodeId loss;
                if (s.label)
                    loss = g.mul_const(g.log_eps(score, kEps), -1.0);
                else
                    loss = g.mul_const(g.log_eps(g.sub(g.scalar(1.0), score), kEps), -1.0);
                return loss;
            };
            BatchResult res = batch_backward(ptensors, build, bsz, opt.threads);
            const double inv = 1.0 / double(bsz);
            for (Tensor& gt : res.grads)
                for (double& v : gt.v) v *= inv;
            std::vector<Tensor*> mut = params.all();
            adam.step(mut, res.grads, opt.clip_norm);
            for (int k = 0; k < bsz; ++k) {
                epoch_loss += res.losses[size_t(k)];
                const PairSample& s = samples[size_t(order[start + size_t(k)])];
                int predicted = res.metrics[size_t(k)][0] > 0.5 ? 1 : 0;
                if (predicted == s.label) ++correct;
            }
        }
        if (history) {
            history->loss.push_back(epoch_loss / double(samples.size()));
            history->accuracy.push_back(double(correct) / double(samples.size()));
        }
    }
    return params;
}

double pairnet_accuracy(const PairNetParams& params, const std::vector<PairSample>& samples) {
    if (samples.empty()) throw std::invalid_argument("pairnet_accuracy: empty sample list");
    int correct = 0;
    for (const PairSample& s : samples) {
        Graph g;
        NodeId z = g.constant(pair_tensor(s.first, s.second));
        double score = g.val(pairnet_score(g, params, z)).item();
        if ((score > 0.5 ? 1 : 0) == s.label) ++correct;
    }
    return double(correct) / double(samples.size());
}

PairPenalty pair_penalty_terms(Graph& g, NodeId p, const Mask2D* prev_gt, const Mask2D* next_gt,
                               const PairNetParams& params) {
    PairPenalty out;
    auto penalty = [&](NodeId z) { return g.sub(g.scalar(1.0), pairnet_score(g, params, z)); };
    if (next_gt) {
        NodeId z = g.channel_concat(p, g.constant(to_tensor(*next_gt)));
        NodeId term = penalty(z);
        out.sum = out.pairs == 0 ? term : g.add(out.sum, term);
        ++out.pairs;
    }
    if (prev_gt) {
        NodeId z = g.channel_concat(g.constant(to_tensor(*prev_gt)), p);
        NodeId term = penalty(z);
        out.sum = out.pairs == 0 ? term : g.add(out.sum, term);
        ++out.pairs;
    }
    return out;
}

LPairResult l_pair(Graph& g, const std::vector<PairSpecEntry>& preds, const PairNetParams& params,
                   double lambda_c) {
    LPairResult out;
    NodeId total = -1;
    for (const PairSpecEntry& e : preds) {
        PairPenalty pp = pair_penalty_terms(g, e.pred, e.prev_gt, e.next_gt, params);
        if (pp.pairs == 0) continue;
        total = total < 0 ? pp.sum : g.add(total, pp.sum);
        out.pairs += pp.pairs;
    }
    if (out.pairs == 0) return out;
    out.node = g.mul_const(total, lambda_c / double(out.pairs));
    return out;
}

void save_pairnet(const PairNetParams& params, const std::string& path) {
    write_blob(path, "P4RN", params.all(), pairnet_dims());
}

PairNetParams load_pairnet(const std::string& path) {
    PairNetParams p = PairNetParams::init(0);
    read_blob(path, "P4RN", p.all(), pairnet_dims());
    return p;
}

void write_pair_history_csv(const PairTrainHistory& hist, const std::string& path,
                            const std::vector<std::string>& header_lines) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    for (const std::string& h : header_lines) out << h << "\n";
    out << "epoch,loss,accuracy\n";
    char buf[128];
    for (size_t e = 0; e < hist.loss.size(); ++e) {
        std::snprintf(buf, sizeof(buf), "%zu,%.9g,%.9g\n", e + 1, hist.loss[e], hist.accuracy[e]);
        out << buf;
    }
}

}  // namespace xseg
