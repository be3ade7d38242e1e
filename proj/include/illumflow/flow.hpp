#pragma once

#include <cstdint>
#include <functional>

#include "illumflow/image.hpp"
#include "illumflow/network.hpp"

namespace illumflow {

// One realization of the straight-line path between a source/target pair.
struct FlowSample {
    ad::Tensor x;      // source (e.g. low-light illumination)
    ad::Tensor y;      // target (normal-light counterpart)
    ad::Tensor phi_t;  // (1-t)x + ty
    double t = 0.0;
    double d = 0.0;  // step-size conditioning; 0 for plain flow-matching items
};

struct CrfiTrainConfig {
    int batch_size = 16;  // must be even: half flow-matching, half consistency
    int iterations = 2000;
    double lr = 1e-4;
    int d_levels = 6;  // dyadic ladder d in {2^-1 .. 2^-K}
    uint64_t seed = 0;
    int patch_size = 64;
    int workers = 1;
};

// Source/target pairs sampled uniformly with replacement.
struct FlowDataset {
    std::vector<std::pair<Image, Image>> pairs;  // (x, y), spatially congruent
};

struct TrainTrace {
    std::vector<double> cfm;
    std::vector<double> consistency;
    std::vector<double> content;  // 1-SSIM term; empty unless enabled
};

struct TrainOutput {
    Network net;
    TrainTrace trace;
};

ad::Tensor interpolate(const ad::Tensor& x, const ad::Tensor& y, double t);
Image interpolate(const Image& x, const Image& y, double t);

// Constant per-pair velocity y - x.
ad::Tensor target_velocity(const ad::Tensor& x, const ad::Tensor& y);
Image target_velocity(const Image& x, const Image& y);

// Mean of two chained half-step velocities; an Euler half step bridges them.
// Evaluated without gradient tracking (a detached consistency target).
ad::Tensor shortcut_target(const Network& net, const ad::Tensor& phi_t, double t, double d);

// Same construction over an arbitrary velocity evaluator v(z, t, d).
using ConditionedField = std::function<ad::Tensor(const ad::Tensor&, double, double)>;
ad::Tensor shortcut_target(const ConditionedField& v, const ad::Tensor& phi_t, double t, double d);

// Per-pixel-mean squared CFM residual plus consistency residual on a batch
// whose first half has d=0 and second half carries dyadic d.
// Returns the scalar loss node; out_cfm/out_consistency get the two parts and
// binding (when given) receives the trainable parameter binding.
ad::Var crfi_loss(const Network& net, const std::vector<FlowSample>& batch, double* out_cfm,
                  double* out_consistency, BoundNetwork* binding = nullptr);

// Generalization shared with the reflectance loss: optionally adds the
// 1-SSIM content term on clamp01(phi + (1-t) v).
ad::Var flow_loss(const Network& net, const std::vector<FlowSample>& batch, bool content_ssim,
                  double* out_cfm, double* out_consistency, double* out_content,
                  BoundNetwork* binding = nullptr);

// Shared trainer for the illumination and reflectance flows; when
// content_ssim is set, adds the 1-SSIM reconstruction term of the
// reflectance loss. Deterministic in (seed, config), for any worker count.
TrainOutput train_flow(const FlowDataset& dataset, const CrfiTrainConfig& cfg,
                       const NetworkSpec& spec, bool content_ssim);

TrainOutput train_crfi(const FlowDataset& dataset, const CrfiTrainConfig& cfg,
                       const NetworkSpec& spec);

void write_loss_trace(const TrainTrace& trace, const std::string& path);

}  // namespace illumflow
