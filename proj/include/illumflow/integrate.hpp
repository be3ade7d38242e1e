#pragma once

#include <functional>

#include "illumflow/network.hpp"
#include "illumflow/retinex.hpp"

namespace illumflow {

struct TrajectoryConfig {
    double t_start = 0.0;
    double t_end = 1.0;  // may be below t_start (suppression) or above 1
    int steps = 1;
};

struct IlluminationSequence {
    std::vector<IlluminationMap> levels;  // clamped on emission
    std::vector<double> times;
};

// State/time velocity field; injectable so tests can supply oracles.
using VelocityField = std::function<ad::Tensor(const ad::Tensor& state, double t)>;

// Adapts a trained network, evaluated with d = 0.
VelocityField network_field(const Network& net);

// clamp01(L + v(L, 0, 0)); exactly one field evaluation.
IlluminationMap enhance_onestep(const Network& net, const IlluminationMap& low);

// Explicit Euler with uniform step (t_end - t_start)/steps. Internal states
// stay unclamped; emitted maps are clamped. Returns all steps+1 states.
IlluminationSequence integrate(const VelocityField& field, const IlluminationMap& start,
                               const TrajectoryConfig& cfg);

struct EnhanceOptions {
    TrajectoryConfig trajectory;
    DecompParams decomp;
    bool emit_all = false;  // return every intermediate recomposition
};

// Full pipeline: decompose, denoise reflectance, move illumination along the
// learned flow, recompose. Returns one image, or the whole sequence.
std::vector<Image> enhance_image(const Network& crfi, const Network& crfr, const Image& low,
                                 const EnhanceOptions& opts);

}  // namespace illumflow
