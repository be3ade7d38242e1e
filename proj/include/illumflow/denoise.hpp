#pragma once

#include "illumflow/flow.hpp"

namespace illumflow {

struct ReflectancePair {
    ReflectanceMap noisy;  // R_l
    ReflectanceMap clean;  // R_n
};

struct AugmentedSample {
    ReflectanceMap r_t;
    double t = 0.0;
    ReflectancePair pair;
};

// R_t = R_l + t (R_n - R_l).
AugmentedSample augment(const ReflectancePair& pair, double t);

// R_hat = clamp01(r_t + (1-t) v); reduces to R_l + v at t = 0.
ReflectanceMap reconstruct(const ReflectanceMap& r_t, double t, const Image& v);

// View of an augmented sample as a flow sample (x = noisy, y = clean).
FlowSample to_flow_sample(const AugmentedSample& s, double d = 0.0);

// Reflectance objective: CFM/consistency terms plus the 1-SSIM content term.
ad::Var crfr_loss(const Network& net, const std::vector<FlowSample>& batch, double* out_cfm,
                  double* out_consistency, double* out_content,
                  BoundNetwork* binding = nullptr);

// Same loop as train_crfi plus the 1-SSIM content term; pairs are
// (noisy, clean) reflectance maps.
TrainOutput train_crfr(const std::vector<ReflectancePair>& pairs, const CrfiTrainConfig& cfg,
                       const NetworkSpec& spec);

// One-step residual correction clamp01(R_l + v(R_l, 0, 0)).
ReflectanceMap denoise(const Network& net, const ReflectanceMap& r_l);

}  // namespace illumflow
