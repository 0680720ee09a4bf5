#include "xseg/optimizer.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace xseg {

double Adam::step(const std::vector<Tensor*>& params, std::vector<Tensor>& grads, double clip_norm,
                  double* post_norm) {
    if (params.size() != grads.size()) throw std::invalid_argument("Adam: param/grad count mismatch");
    if (m_.empty()) {
        for (const Tensor* p : params) {
            m_.emplace_back(p->ch, p->h, p->w);
            v_.emplace_back(p->ch, p->h, p->w);
        }
    }
    double sq = 0.0;
    for (const Tensor& g : grads)
        for (double v : g.v) sq += v * v;
    double norm = std::sqrt(sq);
    double scale = (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
    if (post_norm) *post_norm = norm * scale;

    ++t_;
    const double c1 = 1.0 - std::pow(b1_, t_);
    const double c2 = 1.0 - std::pow(b2_, t_);
    for (size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        Tensor& g = grads[k];
        Tensor& m = m_[k];
        Tensor& v = v_[k];
        for (size_t i = 0; i < p.size(); ++i) {
            double gi = g.v[i] * scale;
            m.v[i] = b1_ * m.v[i] + (1.0 - b1_) * gi;
            v.v[i] = b2_ * v.v[i] + (1.0 - b2_) * gi * gi;
            double mhat = m.v[i] / c1;
            double vhat = v.v[i] / c2;
            p.v[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
    return norm;
}

BatchResult batch_backward(const std::vector<const Tensor*>& params, const SampleBuilder& build,
                           int n_samples, int threads) {
    BatchResult out;
    out.losses.resize(size_t(n_samples));
    out.metrics.resize(size_t(n_samples));
    std::vector<std::vector<Tensor>> per_sample(static_cast<size_t>(n_samples));

    auto run_sample = [&](int s) {
        Graph g;
        std::vector<NodeId> pids;
        pids.reserve(params.size());
        for (const Tensor* p : params) pids.push_back(g.input(*p));
        NodeId root = build(g, pids, s, out.metrics[size_t(s)]);
        g.backward(root);
        out.losses[size_t(s)] = g.val(root).item();
        std::vector<Tensor>& gs = per_sample[size_t(s)];
        gs.reserve(params.size());
        for (NodeId id : pids) {
            const Tensor& gr = g.grad(id);
            if (gr.size() == g.val(id).size())
                gs.push_back(gr);
            else
                gs.emplace_back(g.val(id).ch, g.val(id).h, g.val(id).w);  // unreachable leaf
        }
    };

    if (threads <= 1 || n_samples <= 1) {
        for (int s = 0; s < n_samples; ++s) run_sample(s);
    } else {
        std::vector<std::thread> pool;
        std::atomic<int> next{0};
        int n_workers = std::min(threads, n_samples);
        for (int t = 0; t < n_workers; ++t)
            pool.emplace_back([&]() {
                for (int s = next.fetch_add(1); s < n_samples; s = next.fetch_add(1)) run_sample(s);
            });
        for (std::thread& t : pool) t.join();
    }

    // deterministic reduction in sample-index order
    for (const Tensor* p : params) out.grads.emplace_back(p->ch, p->h, p->w);
    for (int s = 0; s < n_samples; ++s)
        for (size_t k = 0; k < params.size(); ++k)
            for (size_t i = 0; i < out.grads[k].size(); ++i)
                out.grads[k].v[i] += per_sample[size_t(s)][k].v[i];
    return out;
}

}  // namespace xseg
