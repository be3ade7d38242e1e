#include "illumflow/denoise.hpp"

#include "illumflow/convert.hpp"

namespace illumflow {

AugmentedSample augment(const ReflectancePair& pair, double t) {
    if (t < 0.0 || t > 1.0) throw std::invalid_argument("augment: t must be in [0,1]");
    AugmentedSample s;
    s.pair = pair;
    s.t = t;
    s.r_t = interpolate(pair.noisy, pair.clean, t);
    return s;
}

ReflectanceMap reconstruct(const ReflectanceMap& r_t, double t, const Image& v) {
    if (!r_t.same_size(v) || r_t.channels != v.channels)
        throw std::invalid_argument("reconstruct: size mismatch");
    ReflectanceMap out = r_t;
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = clamp01(r_t.data[i] + (1.0 - t) * v.data[i]);
    return out;
}

FlowSample to_flow_sample(const AugmentedSample& s, double d) {
    FlowSample f;
    f.x = to_tensor(s.pair.noisy);
    f.y = to_tensor(s.pair.clean);
    f.phi_t = to_tensor(s.r_t);
    f.t = s.t;
    f.d = d;
    return f;
}

ad::Var crfr_loss(const Network& net, const std::vector<FlowSample>& batch, double* out_cfm,
                  double* out_consistency, double* out_content, BoundNetwork* binding) {
    return flow_loss(net, batch, true, out_cfm, out_consistency, out_content, binding);
}

TrainOutput train_crfr(const std::vector<ReflectancePair>& pairs, const CrfiTrainConfig& cfg,
                       const NetworkSpec& spec) {
    if (spec.in_channels != 3)
        throw std::invalid_argument("train_crfr: reflectance network needs 3 input channels");
    FlowDataset ds;
    for (const ReflectancePair& p : pairs) ds.pairs.emplace_back(p.noisy, p.clean);
    return train_flow(ds, cfg, spec, true);
}

ReflectanceMap denoise(const Network& net, const ReflectanceMap& r_l) {
    if (net.spec.in_channels != r_l.channels)
        throw std::invalid_argument("denoise: checkpoint/input channel mismatch");
    ad::Tensor z = to_tensor(r_l);
    ad::Tensor v = forward_item(net, z, 0.0, 0.0);
    for (size_t i = 0; i < v.size(); ++i) z.data[i] += v.data[i];
    return to_image(z, true);
}

}  // namespace illumflow
