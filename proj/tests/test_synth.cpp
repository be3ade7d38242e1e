#include <cmath>
#include <numeric>

#include "doctest.h"
#include "illumflow/synth.hpp"

using namespace illumflow;

TEST_CASE("render_scene is deterministic in the seed") {
    GroundTruthScene a = render_scene(42, 32, 32);
    GroundTruthScene b = render_scene(42, 32, 32);
    CHECK(a.true_illumination.data == b.true_illumination.data);
    CHECK(a.true_reflectance.data == b.true_reflectance.data);
    CHECK(a.irradiance.data == b.irradiance.data);
    GroundTruthScene c = render_scene(43, 32, 32);
    CHECK(a.true_illumination.data != c.true_illumination.data);
}

TEST_CASE("render_scene respects value ranges") {
    for (uint64_t seed : {1ull, 9ull, 77ull}) {
        GroundTruthScene s = render_scene(seed, 24, 40);
        double lmin = 2.0, lmax = -1.0;
        for (double v : s.true_illumination.data) {
            lmin = std::min(lmin, v);
            lmax = std::max(lmax, v);
        }
        CHECK(lmin >= 0.1 - 1e-12);
        CHECK(lmax <= 1.0 + 1e-12);
        // normalization touches both ends
        CHECK(lmin == doctest::Approx(0.1).epsilon(1e-9));
        CHECK(lmax == doctest::Approx(1.0).epsilon(1e-9));
        for (double v : s.true_reflectance.data) {
            CHECK(v >= 0.05 - 1e-12);
            CHECK(v <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("irradiance equals illumination times reflectance") {
    GroundTruthScene s = render_scene(5, 16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            for (int c = 0; c < 3; ++c)
                CHECK(s.irradiance.at(y, x, c) ==
                      doctest::Approx(s.true_illumination.at(y, x, 0) *
                                      s.true_reflectance.at(y, x, c))
                          .epsilon(1e-9));
}

TEST_CASE("render_scene rejects tiny sizes") {
    CHECK_THROWS_AS(render_scene(0, 4, 16), std::invalid_argument);
}

TEST_CASE("expose with identity response reproduces irradiance at delta 1") {
    GroundTruthScene s = render_scene(8, 16, 16);
    Image img = expose(s, {1.0, {ResponseCurve::Kind::Identity}});
    for (size_t i = 0; i < img.size(); ++i)
        CHECK(img.data[i] == doctest::Approx(clamp01(s.irradiance.data[i])).epsilon(1e-12));
}

TEST_CASE("identity response halves every unclipped pixel at delta 0.5") {
    GroundTruthScene s = render_scene(8, 16, 16);
    Image full = expose(s, {1.0, {}});
    Image half = expose(s, {0.5, {}});
    for (size_t i = 0; i < full.size(); ++i)
        if (s.irradiance.data[i] < 1.0)
            CHECK(half.data[i] == doctest::Approx(0.5 * s.irradiance.data[i]).epsilon(1e-12));
}

TEST_CASE("gamma response matches the closed form") {
    GroundTruthScene s = render_scene(1, 8, 8);
    // force a known irradiance value
    for (auto& v : s.irradiance.data) v = 0.5;
    ResponseCurve gamma{ResponseCurve::Kind::Gamma, 2.2};
    Image img = expose(s, {1.0, gamma});
    double expect = std::pow(0.5, 1.0 / 2.2);
    CHECK(expect == doctest::Approx(0.7297).epsilon(2e-4));
    for (double v : img.data) CHECK(v == doctest::Approx(expect).epsilon(1e-12));
    CHECK(gamma(0.0) == 0.0);
}

TEST_CASE("value vs delta is linear below clipping") {
    GroundTruthScene s = render_scene(21, 16, 16);
    std::vector<double> deltas, values;
    int y = 7, x = 3, c = 1;
    for (int k = 1; k <= 10; ++k) {
        double d = 0.1 * k;
        Image img = expose(s, {d, {}});
        if (s.irradiance.at(y, x, c) * d < 1.0) {
            deltas.push_back(d);
            values.push_back(img.at(y, x, c));
        }
    }
    REQUIRE(deltas.size() >= 3);
    // Pearson correlation of an exactly linear relation
    double n = static_cast<double>(deltas.size());
    double md = std::accumulate(deltas.begin(), deltas.end(), 0.0) / n;
    double mv = std::accumulate(values.begin(), values.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (size_t i = 0; i < deltas.size(); ++i) {
        sxy += (deltas[i] - md) * (values[i] - mv);
        sxx += (deltas[i] - md) * (deltas[i] - md);
        syy += (values[i] - mv) * (values[i] - mv);
    }
    double r = sxy / std::sqrt(sxx * syy);
    CHECK(r > 0.999999);
}

TEST_CASE("inject_noise with an all-zero spec is the identity") {
    GroundTruthScene s = render_scene(2, 16, 16);
    ReflectanceMap out = inject_noise(s.true_reflectance, {}, 9);
    CHECK(out.data == s.true_reflectance.data);
}

TEST_CASE("inject_noise is deterministic in the seed") {
    GroundTruthScene s = render_scene(2, 16, 16);
    NoiseSpec spec{0.1, 0.05, 0.02};
    ReflectanceMap a = inject_noise(s.true_reflectance, spec, 9);
    ReflectanceMap b = inject_noise(s.true_reflectance, spec, 9);
    CHECK(a.data == b.data);
    ReflectanceMap c = inject_noise(s.true_reflectance, spec, 10);
    CHECK(a.data != c.data);
}

TEST_CASE("gaussian noise std matches the spec on a constant image") {
    ReflectanceMap flat(64, 64, 3, 0.5);
    ReflectanceMap noisy = inject_noise(flat, {0.1, 0.0, 0.0}, 4);
    double mean = std::accumulate(noisy.data.begin(), noisy.data.end(), 0.0) / noisy.size();
    double var = 0.0;
    for (double v : noisy.data) var += (v - mean) * (v - mean);
    double std = std::sqrt(var / noisy.size());
    CHECK(std > 0.1 * 0.85);
    CHECK(std < 0.1 * 1.15);
}

TEST_CASE("make_pair degenerates to the normal image without attenuation or noise") {
    GroundTruthScene s = render_scene(13, 16, 16);
    TrainingPair p = make_pair(s, 1.0, {}, 3);
    for (size_t i = 0; i < p.low.size(); ++i)
        CHECK(std::abs(p.low.data[i] - p.normal.data[i]) < 1e-6);
}

TEST_CASE("make_pair scales illumination by low_delta exactly") {
    GroundTruthScene s = render_scene(13, 16, 16);
    TrainingPair p = make_pair(s, 0.25, {0.05, 0.0, 0.0}, 3);
    for (size_t i = 0; i < p.low_illum.size(); ++i) {
        CHECK(p.low_illum.data[i] == doctest::Approx(0.25 * p.normal_illum.data[i]).epsilon(1e-12));
        // velocity algebra of the linear exposure model
        CHECK(p.normal_illum.data[i] - p.low_illum.data[i] ==
              doctest::Approx(0.75 * p.normal_illum.data[i]).epsilon(1e-12));
    }
    CHECK(p.normal_refl.data == s.true_reflectance.data);
}

TEST_CASE("make_pair normal members recompose") {
    GroundTruthScene s = render_scene(17, 16, 16);
    TrainingPair p = make_pair(s, 0.5, {}, 1);
    Image rec = recompose(p.normal_illum, p.normal_refl);
    for (size_t i = 0; i < rec.size(); ++i)
        CHECK(std::abs(rec.data[i] - p.normal.data[i]) < 1e-6);
}

TEST_CASE("make_pair rejects out-of-range low_delta") {
    GroundTruthScene s = render_scene(1, 8, 8);
    CHECK_THROWS_AS(make_pair(s, 0.0, {}, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_pair(s, 1.5, {}, 1), std::invalid_argument);
}
