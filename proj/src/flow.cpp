#include "illumflow/flow.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <thread>

#include "illumflow/convert.hpp"
#include "illumflow/metrics.hpp"

namespace illumflow {

using ad::Tensor;
using ad::Var;

ad::Tensor interpolate(const Tensor& x, const Tensor& y, double t) {
    if (!x.same_shape(y)) throw std::invalid_argument("interpolate: shape mismatch");
    Tensor out = x;
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = (1.0 - t) * x.data[i] + t * y.data[i];
    return out;
}

Image interpolate(const Image& x, const Image& y, double t) {
    if (!x.same_size(y) || x.channels != y.channels)
        throw std::invalid_argument("interpolate: size mismatch");
    Image out = x;
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = (1.0 - t) * x.data[i] + t * y.data[i];
    return out;
}

ad::Tensor target_velocity(const Tensor& x, const Tensor& y) {
    if (!x.same_shape(y)) throw std::invalid_argument("target_velocity: shape mismatch");
    Tensor out = y;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] -= x.data[i];
    return out;
}

Image target_velocity(const Image& x, const Image& y) {
    if (!x.same_size(y) || x.channels != y.channels)
        throw std::invalid_argument("target_velocity: size mismatch");
    Image out = y;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] -= x.data[i];
    return out;
}

ad::Tensor shortcut_target(const ConditionedField& v, const Tensor& phi_t, double t, double d) {
    if (d <= 0.0) throw std::invalid_argument("shortcut_target: d must be positive");
    if (t + 2.0 * d > 1.0 + 1e-12)
        throw std::invalid_argument("shortcut_target: t + 2d must stay within [0,1]");
    Tensor v1 = v(phi_t, t, d);
    Tensor phi_next = phi_t;
    for (size_t i = 0; i < phi_next.size(); ++i) phi_next.data[i] += d * v1.data[i];
    Tensor v2 = v(phi_next, t + d, d);
    Tensor out = v1;
    for (size_t i = 0; i < out.size(); ++i) out.data[i] = 0.5 * (v1.data[i] + v2.data[i]);
    return out;
}

ad::Tensor shortcut_target(const Network& net, const Tensor& phi_t, double t, double d) {
    return shortcut_target(
        [&net](const Tensor& z, double tt, double dd) { return forward_item(net, z, tt, dd); },
        phi_t, t, d);
}

namespace {

// One item's contribution: weighted loss node built on the given binding.
// CFM items (d==0) regress the pair velocity; consistency items regress the
// detached shortcut target with doubled step conditioning.
Var item_loss(const Network& raw, const BoundNetwork& bound, const FlowSample& s, double weight,
              double* part_value, Var* out_v = nullptr) {
    Var phi = Var::constant(s.phi_t);
    Var v = bound(phi, s.t, 2.0 * s.d);  // d=0 items: plain (t, 0) conditioning
    Var loss;
    if (s.d == 0.0) {
        loss = ad::mse(v, Var::constant(target_velocity(s.x, s.y)));
    } else {
        Tensor starget = shortcut_target(raw, s.phi_t, s.t, s.d);
        loss = ad::mse(v, Var::constant(starget));
    }
    if (part_value) *part_value = loss.item() * weight;
    if (out_v) *out_v = v;
    return ad::scale(loss, weight);
}

// 1 - SSIM(clamp01(phi + (1-t) v), y), the reflectance content term.
Var content_loss(const Var& v, const FlowSample& s, double weight, double* part_value) {
    Var rhat = ad::clamp01(ad::add(Var::constant(s.phi_t), ad::scale(v, 1.0 - s.t)));
    Var term = ad::add_scalar(ad::scale(ssim_differentiable(rhat, Var::constant(s.y)), -1.0), 1.0);
    if (part_value) *part_value = term.item() * weight;
    return ad::scale(term, weight);
}

void validate_config(const CrfiTrainConfig& cfg) {
    if (cfg.batch_size < 2 || cfg.batch_size % 2 != 0)
        throw std::invalid_argument("batch_size must be even and >= 2");
    if (cfg.iterations < 1 || cfg.d_levels < 1 || cfg.lr <= 0 || cfg.patch_size < 1 ||
        cfg.workers < 1)
        throw std::invalid_argument("invalid training config");
}

}  // namespace

ad::Var flow_loss(const Network& net, const std::vector<FlowSample>& batch, bool content_ssim,
                  double* out_cfm, double* out_consistency, double* out_content,
                  BoundNetwork* binding) {
    if (batch.empty() || batch.size() % 2 != 0)
        throw std::invalid_argument("flow_loss: batch must be non-empty and even");
    size_t half = batch.size() / 2;
    BoundNetwork bound = bind(net, true);
    double cfm = 0.0, cons = 0.0, content = 0.0;
    Var total;
    for (size_t i = 0; i < batch.size(); ++i) {
        bool consistency = batch[i].d != 0.0;
        double part = 0.0;
        Var v;
        Var li = item_loss(net, bound, batch[i], 1.0 / static_cast<double>(half), &part, &v);
        (consistency ? cons : cfm) += part;
        if (content_ssim) {
            double cpart = 0.0;
            li = ad::add(li, content_loss(v, batch[i], 1.0 / static_cast<double>(batch.size()),
                                          &cpart));
            content += cpart;
        }
        total = total.valid() ? ad::add(total, li) : li;
    }
    if (out_cfm) *out_cfm = cfm;
    if (out_consistency) *out_consistency = cons;
    if (out_content) *out_content = content;
    if (binding) *binding = bound;
    return total;
}

ad::Var crfi_loss(const Network& net, const std::vector<FlowSample>& batch, double* out_cfm,
                  double* out_consistency, BoundNetwork* binding) {
    return flow_loss(net, batch, false, out_cfm, out_consistency, nullptr, binding);
}

TrainOutput train_flow(const FlowDataset& dataset, const CrfiTrainConfig& cfg,
                       const NetworkSpec& spec, bool content_ssim) {
    validate_config(cfg);
    if (dataset.pairs.empty()) throw std::invalid_argument("train_flow: empty dataset");

    std::vector<std::pair<Tensor, Tensor>> data;
    data.reserve(dataset.pairs.size());
    for (const auto& [x, y] : dataset.pairs) {
        if (!x.same_size(y) || x.channels != y.channels || x.channels != spec.in_channels)
            throw std::invalid_argument("train_flow: dataset pair shape mismatch");
        if (x.height < cfg.patch_size || x.width < cfg.patch_size)
            throw std::invalid_argument("train_flow: pair smaller than patch size");
        data.emplace_back(to_tensor(x), to_tensor(y));
    }
    SsimParams ssim_params;
    if (content_ssim && cfg.patch_size < ssim_params.window)
        throw std::invalid_argument("train_flow: patch smaller than SSIM window");

    std::mt19937_64 rng(cfg.seed ^ 0x2545f4914f6cdd1dULL);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    TrainOutput out;
    out.net = Network::create(spec, cfg.seed);
    AdamState adam = AdamState::init(out.net, cfg.lr);

    int B = cfg.batch_size, half = B / 2, P = cfg.patch_size;
    for (int iter = 0; iter < cfg.iterations; ++iter) {
        // all randomness drawn up front in a fixed order
        std::vector<FlowSample> batch(B);
        for (int i = 0; i < B; ++i) {
            const auto& [xt, yt] = data[rng() % data.size()];
            int ch = xt.shape[0], hh = xt.shape[1], ww = xt.shape[2];
            int oy = hh > P ? static_cast<int>(rng() % static_cast<uint64_t>(hh - P + 1)) : 0;
            int ox = ww > P ? static_cast<int>(rng() % static_cast<uint64_t>(ww - P + 1)) : 0;
            FlowSample& s = batch[i];
            s.x = Tensor({ch, P, P});
            s.y = Tensor({ch, P, P});
            for (int c = 0; c < ch; ++c)
                for (int y = 0; y < P; ++y)
                    for (int x = 0; x < P; ++x) {
                        size_t src = (static_cast<size_t>(c) * hh + oy + y) * ww + ox + x;
                        size_t dst = (static_cast<size_t>(c) * P + y) * P + x;
                        s.x.data[dst] = xt.data[src];
                        s.y.data[dst] = yt.data[src];
                    }
            if (i < half) {
                s.d = 0.0;
                s.t = uni(rng);
            } else {
                s.d = std::pow(2.0, -(1.0 + static_cast<double>(rng() % cfg.d_levels)));
                s.t = uni(rng) * (1.0 - 2.0 * s.d);
            }
            s.phi_t = interpolate(s.x, s.y, s.t);
        }

        struct ItemResult {
            std::vector<Tensor> grads;
            double flow_part = 0.0;
            double content_part = 0.0;
        };
        std::vector<ItemResult> results(B);
        auto run_item = [&](int i) {
            const FlowSample& s = batch[i];
            BoundNetwork bound = bind(out.net, true);
            double part = 0.0;
            Var v;
            Var loss = item_loss(out.net, bound, s, 1.0 / half, &part, &v);
            results[i].flow_part = part;
            if (content_ssim) {
                double cpart = 0.0;
                loss = ad::add(loss, content_loss(v, s, 1.0 / B, &cpart));
                results[i].content_part = cpart;
            }
            ad::backward(loss);
            results[i].grads = collect_grads(out.net, bound);
        };
        if (cfg.workers <= 1) {
            for (int i = 0; i < B; ++i) run_item(i);
        } else {
            std::atomic<int> next{0};
            std::vector<std::thread> pool;
            int nw = std::min(cfg.workers, B);
            for (int w = 0; w < nw; ++w)
                pool.emplace_back([&] {
                    for (int i = next.fetch_add(1); i < B; i = next.fetch_add(1)) run_item(i);
                });
            for (auto& th : pool) th.join();
        }

        // fixed-order reduction keeps results identical for any worker count
        std::vector<Tensor> grads = std::move(results[0].grads);
        double cfm = 0.0, cons = 0.0, content = 0.0;
        for (int i = 0; i < B; ++i) {
            if (i > 0)
                for (size_t p = 0; p < grads.size(); ++p)
                    for (size_t k = 0; k < grads[p].size(); ++k)
                        grads[p].data[k] += results[i].grads[p].data[k];
            (i < half ? cfm : cons) += results[i].flow_part;
            content += results[i].content_part;
        }
        double total = cfm + cons + content;
        if (!std::isfinite(total)) throw std::runtime_error("train_flow: non-finite loss");
        adam_step(out.net, grads, adam);
        out.trace.cfm.push_back(cfm);
        out.trace.consistency.push_back(cons);
        if (content_ssim) out.trace.content.push_back(content);
    }
    return out;
}

TrainOutput train_crfi(const FlowDataset& dataset, const CrfiTrainConfig& cfg,
                       const NetworkSpec& spec) {
    return train_flow(dataset, cfg, spec, false);
}

void write_loss_trace(const TrainTrace& trace, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    bool content = !trace.content.empty();
    out << (content ? "iter,cfm_loss,consistency_loss,content_loss\n"
                    : "iter,cfm_loss,consistency_loss\n");
    for (size_t i = 0; i < trace.cfm.size(); ++i) {
        out << i << ',' << trace.cfm[i] << ',' << trace.consistency[i];
        if (content) out << ',' << trace.content[i];
        out << '\n';
    }
}

}  // namespace illumflow
