#include "illumflow/integrate.hpp"

#include <cmath>

#include "illumflow/convert.hpp"
#include "illumflow/denoise.hpp"

namespace illumflow {

using ad::Tensor;

VelocityField network_field(const Network& net) {
    return [&net](const Tensor& state, double t) { return forward_item(net, state, t, 0.0); };
}

IlluminationMap enhance_onestep(const Network& net, const IlluminationMap& low) {
    if (net.spec.in_channels != low.channels)
        throw std::invalid_argument("enhance_onestep: checkpoint/input channel mismatch");
    Tensor z = to_tensor(low);
    Tensor v = forward_item(net, z, 0.0, 0.0);
    for (size_t i = 0; i < z.size(); ++i) z.data[i] += v.data[i];
    return to_image(z, true);
}

IlluminationSequence integrate(const VelocityField& field, const IlluminationMap& start,
                               const TrajectoryConfig& cfg) {
    if (cfg.steps < 1) throw std::invalid_argument("integrate: steps must be >= 1");
    double h = (cfg.t_end - cfg.t_start) / cfg.steps;
    IlluminationSequence seq;
    Tensor state = to_tensor(start);
    seq.levels.push_back(to_image(state, true));
    seq.times.push_back(cfg.t_start);
    for (int n = 0; n < cfg.steps; ++n) {
        double t = cfg.t_start + n * h;
        Tensor v = field(state, t);
        if (!v.same_shape(state)) throw std::runtime_error("integrate: field shape mismatch");
        for (size_t i = 0; i < state.size(); ++i) {
            state.data[i] += h * v.data[i];
            if (!std::isfinite(state.data[i]))
                throw std::runtime_error("integrate: non-finite state (field blow-up)");
        }
        seq.levels.push_back(to_image(state, true));
        seq.times.push_back(cfg.t_start + (n + 1) * h);
    }
    return seq;
}

std::vector<Image> enhance_image(const Network& crfi, const Network& crfr, const Image& low,
                                 const EnhanceOptions& opts) {
    DecompResult dec;
    try {
        dec = decompose(low, opts.decomp);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("enhance: decomposition failed: ") + e.what());
    }
    ReflectanceMap r_hat;
    try {
        r_hat = denoise(crfr, dec.R);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("enhance: reflectance denoising failed: ") + e.what());
    }
    try {
        std::vector<Image> out;
        IlluminationSequence seq = integrate(network_field(crfi), dec.L, opts.trajectory);
        if (opts.emit_all) {
            for (const IlluminationMap& L : seq.levels) out.push_back(recompose(L, r_hat));
        } else {
            out.push_back(recompose(seq.levels.back(), r_hat));
        }
        return out;
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("enhance: illumination flow failed: ") + e.what());
    }
}

}  // namespace illumflow
