#include "illumflow/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace illumflow {

double ResponseCurve::operator()(double v) const {
    if (v <= 0.0) return 0.0;
    switch (kind) {
        case Kind::Identity:
            return v;
        case Kind::Gamma:
            return std::pow(v, 1.0 / gamma);
    }
    return v;
}

GroundTruthScene render_scene(uint64_t seed, int height, int width) {
    if (height < 8 || width < 8) throw std::invalid_argument("render_scene: size must be >= 8x8");
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    // Illumination: 2-4 Gaussian bumps, rescaled to [0.1, 1].
    IlluminationMap L(height, width, 1);
    int nbumps = 2 + static_cast<int>(rng() % 3);
    struct Bump {
        double cy, cx, sy, sx, amp;
    };
    std::vector<Bump> bumps;
    for (int i = 0; i < nbumps; ++i) {
        Bump b;
        b.cy = uni(rng) * height;
        b.cx = uni(rng) * width;
        b.sy = (0.15 + 0.35 * uni(rng)) * height;
        b.sx = (0.15 + 0.35 * uni(rng)) * width;
        b.amp = 0.3 + 0.7 * uni(rng);
        bumps.push_back(b);
    }
    double lo = 1e300, hi = -1e300;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double v = 0.0;
            for (const Bump& b : bumps) {
                double dy = (y - b.cy) / b.sy, dx = (x - b.cx) / b.sx;
                v += b.amp * std::exp(-0.5 * (dy * dy + dx * dx));
            }
            L.at(y, x, 0) = v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    double span = hi > lo ? hi - lo : 1.0;
    for (double& v : L.data) v = 0.1 + 0.9 * (v - lo) / span;

    // Reflectance: random axis-aligned constant-color patches over a base color.
    ReflectanceMap R(height, width, 3);
    auto rand_color = [&] {
        return std::array<double, 3>{0.05 + 0.95 * uni(rng), 0.05 + 0.95 * uni(rng),
                                     0.05 + 0.95 * uni(rng)};
    };
    auto base = rand_color();
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c) R.at(y, x, c) = base[c];
    int npatch = 4 + static_cast<int>(rng() % 5);
    for (int i = 0; i < npatch; ++i) {
        int ph = 2 + static_cast<int>(rng() % static_cast<uint64_t>(height / 2));
        int pw = 2 + static_cast<int>(rng() % static_cast<uint64_t>(width / 2));
        int y0 = static_cast<int>(rng() % static_cast<uint64_t>(height - ph + 1));
        int x0 = static_cast<int>(rng() % static_cast<uint64_t>(width - pw + 1));
        auto col = rand_color();
        for (int y = y0; y < y0 + ph; ++y)
            for (int x = x0; x < x0 + pw; ++x)
                for (int c = 0; c < 3; ++c) R.at(y, x, c) = col[c];
    }

    GroundTruthScene scene;
    scene.seed = seed;
    scene.true_illumination = L;
    scene.true_reflectance = R;
    scene.irradiance = Image(height, width, 3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c)
                scene.irradiance.at(y, x, c) = L.at(y, x, 0) * R.at(y, x, c);
    return scene;
}

Image expose(const GroundTruthScene& scene, const ExposureSpec& spec) {
    if (spec.delta <= 0.0) throw std::invalid_argument("expose: delta must be positive");
    Image out(scene.irradiance.height, scene.irradiance.width, 3);
    for (size_t i = 0; i < out.size(); ++i)
        out.data[i] = clamp01(spec.response(scene.irradiance.data[i] * spec.delta));
    return out;
}

ReflectanceMap inject_noise(const ReflectanceMap& R, const NoiseSpec& spec, uint64_t seed) {
    if (spec.gaussian_sigma < 0 || spec.speckle_sigma < 0 || spec.chroma_shift < 0)
        throw std::invalid_argument("inject_noise: negative noise parameter");
    std::mt19937_64 rng(seed ^ 0xc2b2ae3d27d4eb4fULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    double bias[3] = {0, 0, 0};
    for (int c = 0; c < R.channels; ++c) bias[c] = spec.chroma_shift * uni(rng);

    ReflectanceMap out(R.height, R.width, R.channels);
    for (int y = 0; y < R.height; ++y)
        for (int x = 0; x < R.width; ++x) {
            double speckle = spec.speckle_sigma > 0 ? spec.speckle_sigma * gauss(rng) : 0.0;
            for (int c = 0; c < R.channels; ++c) {
                double v = R.at(y, x, c) * (1.0 + speckle);
                if (spec.gaussian_sigma > 0) v += spec.gaussian_sigma * gauss(rng);
                out.at(y, x, c) = clamp01(v + bias[c]);
            }
        }
    return out;
}

TrainingPair make_pair(const GroundTruthScene& scene, double low_delta, const NoiseSpec& noise,
                       uint64_t seed) {
    if (!(low_delta > 0.0 && low_delta <= 1.0))
        throw std::invalid_argument("make_pair: low_delta must be in (0,1]");
    TrainingPair pair;
    pair.normal_illum = scene.true_illumination;
    pair.normal_refl = scene.true_reflectance;
    pair.normal = expose(scene, ExposureSpec{1.0, {}});

    pair.low_illum = scene.true_illumination;
    for (double& v : pair.low_illum.data) v *= low_delta;
    pair.low_refl = inject_noise(scene.true_reflectance, noise, seed);
    pair.low = recompose(pair.low_illum, pair.low_refl);
    return pair;
}

}  // namespace illumflow
