#include "illumflow/retinex.hpp"

#include <cmath>

namespace illumflow {

namespace {

// Sum of squared forward differences over any channel count.
double grad_energy(const Image& u) {
    double e = 0.0;
    for (int y = 0; y < u.height; ++y)
        for (int x = 0; x < u.width; ++x)
            for (int c = 0; c < u.channels; ++c) {
                double v = u.at(y, x, c);
                if (y + 1 < u.height) {
                    double d = u.at(y + 1, x, c) - v;
                    e += d * d;
                }
                if (x + 1 < u.width) {
                    double d = u.at(y, x + 1, c) - v;
                    e += d * d;
                }
            }
    return e;
}

// d/du of grad_energy, accumulated into g with weight w.
void add_grad_energy_grad(const Image& u, double w, Image& g) {
    for (int y = 0; y < u.height; ++y)
        for (int x = 0; x < u.width; ++x)
            for (int c = 0; c < u.channels; ++c) {
                double v = u.at(y, x, c);
                if (y + 1 < u.height) {
                    double d = u.at(y + 1, x, c) - v;
                    g.at(y + 1, x, c) += 2.0 * w * d;
                    g.at(y, x, c) -= 2.0 * w * d;
                }
                if (x + 1 < u.width) {
                    double d = u.at(y, x + 1, c) - v;
                    g.at(y, x + 1, c) += 2.0 * w * d;
                    g.at(y, x, c) -= 2.0 * w * d;
                }
            }
}

void project(Image& u, double floor) {
    for (double& v : u.data) v = v < floor ? floor : (v > 1.0 ? 1.0 : v);
}

}  // namespace

double decomposition_objective(const Image& I, const IlluminationMap& L, const ReflectanceMap& R,
                               const DecompParams& p) {
    if (!I.same_size(L) || !I.same_size(R) || I.channels != R.channels)
        throw std::invalid_argument("objective: size mismatch");
    double fid = 0.0;
    for (int y = 0; y < I.height; ++y)
        for (int x = 0; x < I.width; ++x)
            for (int c = 0; c < I.channels; ++c) {
                double d = I.at(y, x, c) - L.at(y, x, 0) * R.at(y, x, c);
                fid += d * d;
            }
    return fid + p.lambda1 * grad_energy(L) + p.lambda2 * grad_energy(R);
}

DecompResult decompose(const Image& I, const DecompParams& p) {
    if (I.channels != 3) throw std::invalid_argument("decompose: expects a 3-channel image");

    DecompResult res;
    res.L = IlluminationMap(I.height, I.width, 1);
    for (int y = 0; y < I.height; ++y)
        for (int x = 0; x < I.width; ++x) {
            double m = 0.0;
            for (int c = 0; c < 3; ++c) m = std::max(m, I.at(y, x, c));
            res.L.at(y, x, 0) = std::max(m, p.epsilon);
        }
    res.R = ReflectanceMap(I.height, I.width, 3);
    for (int y = 0; y < I.height; ++y)
        for (int x = 0; x < I.width; ++x)
            for (int c = 0; c < 3; ++c)
                res.R.at(y, x, c) = I.at(y, x, c) / (res.L.at(y, x, 0) + p.epsilon);
    project(res.R, p.epsilon);

    double energy = decomposition_objective(I, res.L, res.R, p);
    double step_l = 0.5, step_r = 0.5;

    // One projected backtracking descent step on `target`; false if stalled.
    auto descend = [&](Image& target, const Image& grad, double& step) {
        for (int k = 0; k < 20; ++k) {
            Image cand = target;
            for (size_t i = 0; i < cand.size(); ++i) cand.data[i] -= step * grad.data[i];
            project(cand, p.epsilon);
            double e = decomposition_objective(I, &target == &res.L ? cand : res.L,
                                               &target == &res.R ? cand : res.R, p);
            if (e < energy) {
                target = std::move(cand);
                energy = e;
                step *= 1.2;
                return true;
            }
            step *= 0.5;
        }
        return false;
    };

    for (int it = 0; it < p.max_iters; ++it) {
        double prev = energy;

        Image gL(I.height, I.width, 1);
        for (int y = 0; y < I.height; ++y)
            for (int x = 0; x < I.width; ++x) {
                double g = 0.0;
                for (int c = 0; c < 3; ++c) {
                    double d = I.at(y, x, c) - res.L.at(y, x, 0) * res.R.at(y, x, c);
                    g += -2.0 * d * res.R.at(y, x, c);
                }
                gL.at(y, x, 0) = g;
            }
        add_grad_energy_grad(res.L, p.lambda1, gL);
        bool moved = descend(res.L, gL, step_l);

        Image gR(I.height, I.width, 3);
        for (int y = 0; y < I.height; ++y)
            for (int x = 0; x < I.width; ++x)
                for (int c = 0; c < 3; ++c) {
                    double d = I.at(y, x, c) - res.L.at(y, x, 0) * res.R.at(y, x, c);
                    gR.at(y, x, c) = -2.0 * d * res.L.at(y, x, 0);
                }
        add_grad_energy_grad(res.R, p.lambda2, gR);
        moved = descend(res.R, gR, step_r) || moved;

        if (!std::isfinite(energy)) throw std::runtime_error("decompose: non-finite objective");
        res.objective_trace.push_back(energy);
        res.iters_used = it + 1;
        if (!moved) break;
        if (prev > 0 && (prev - energy) / prev < p.tol) break;
    }
    return res;
}

}  // namespace illumflow
