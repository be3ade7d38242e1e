#pragma once

#include <cstdint>
#include <random>

#include "illumflow/image.hpp"

namespace illumflow {

// Camera response f applied to scaled irradiance.
struct ResponseCurve {
    enum class Kind { Identity, Gamma };
    Kind kind = Kind::Identity;
    double gamma = 2.2;

    double operator()(double v) const;
};

struct ExposureSpec {
    double delta = 1.0;  // exposure factor, multiple of reference exposure
    ResponseCurve response;
};

struct NoiseSpec {
    double gaussian_sigma = 0.0;  // additive, per sample
    double speckle_sigma = 0.0;   // multiplicative, per pixel
    double chroma_shift = 0.0;    // one uniform bias per channel
};

// Scene with known decomposition: irradiance = illumination * reflectance.
struct GroundTruthScene {
    Image irradiance;  // HxWx3, non-negative
    ReflectanceMap true_reflectance;
    IlluminationMap true_illumination;
    uint64_t seed = 0;
};

struct TrainingPair {
    Image low;
    Image normal;
    IlluminationMap low_illum;
    IlluminationMap normal_illum;
    ReflectanceMap low_refl;
    ReflectanceMap normal_refl;
};

// Smooth Gaussian-bump illumination in [0.1,1] over piecewise-constant color
// patches in [0.05,1]; deterministic in the seed.
GroundTruthScene render_scene(uint64_t seed, int height, int width);

// I = clamp01(f(E * delta)).
Image expose(const GroundTruthScene& scene, const ExposureSpec& spec);

// clamp01(R*(1+speckle) + gaussian + chroma_bias), deterministic in the seed.
ReflectanceMap inject_noise(const ReflectanceMap& R, const NoiseSpec& spec, uint64_t seed);

// Low/normal pair with ground-truth factors; low illumination is a uniform
// low_delta scaling, low reflectance carries the injected noise.
TrainingPair make_pair(const GroundTruthScene& scene, double low_delta, const NoiseSpec& noise,
                       uint64_t seed);

}  // namespace illumflow
