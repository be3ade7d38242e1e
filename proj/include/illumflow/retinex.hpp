#pragma once

#include <vector>

#include "illumflow/image.hpp"

namespace illumflow {

struct DecompParams {
    double lambda1 = 0.1;   // illumination smoothness weight
    double lambda2 = 0.01;  // reflectance regularity weight
    int max_iters = 200;
    double tol = 1e-6;      // relative objective-change stop
    double epsilon = 1e-4;  // division guard and projection floor
};

struct DecompResult {
    IlluminationMap L;
    ReflectanceMap R;
    std::vector<double> objective_trace;  // post-step energies, non-increasing
    int iters_used = 0;
};

// Energy  ||I - L*R||^2 + lambda1*||grad L||^2 + lambda2*||grad R||^2
// with forward differences.
double decomposition_objective(const Image& I, const IlluminationMap& L, const ReflectanceMap& R,
                               const DecompParams& p);

// Alternating projected gradient descent with backtracking line search.
// L starts from the per-pixel channel max; both factors stay in [epsilon, 1].
DecompResult decompose(const Image& I, const DecompParams& p = {});

}  // namespace illumflow
