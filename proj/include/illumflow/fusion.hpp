#pragma once

#include <vector>

#include "illumflow/image.hpp"

namespace illumflow {

struct FusionParams {
    double sigma_e = 0.2;  // well-exposedness Gaussian width
    int pyramid_levels = 4;
    double weight_floor = 1e-6;
};

// Per-pixel product over channels of exp(-(v-0.5)^2 / (2 sigma_e^2)).
Image well_exposedness(const Image& img, double sigma_e = 0.2);

// Mertens-style fusion: normalized well-exposedness weights, Laplacian
// pyramids of the inputs blended with Gaussian pyramids of the weights.
Image fuse(const std::vector<Image>& seq, const FusionParams& p = {});

}  // namespace illumflow
