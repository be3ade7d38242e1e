#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"
#include "illumflow/convert.hpp"
#include "illumflow/integrate.hpp"
#include "illumflow/synth.hpp"

using namespace illumflow;
using ad::Tensor;

namespace {

IlluminationMap random_map(uint64_t seed, int h, int w) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.1, 0.9);
    IlluminationMap m(h, w, 1);
    for (auto& v : m.data) v = uni(rng);
    return m;
}

VelocityField constant_field(double c) {
    return [c](const Tensor& state, double) { return Tensor(state.shape, c); };
}

}  // namespace

TEST_CASE("one-step enhancement equals a single Euler step") {
    Network net = Network::create({1, 6, 2, 4}, 3);
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> uni(-0.3, 0.3);
    for (auto& v : net.param("out.w").data) v = uni(rng);
    for (auto& v : net.param("out.b").data) v = uni(rng);

    IlluminationMap low = random_map(2, 10, 10);
    IlluminationMap one = enhance_onestep(net, low);
    IlluminationSequence seq = integrate(network_field(net), low, {0.0, 1.0, 1});
    REQUIRE(seq.levels.size() == 2);
    CHECK(one.data == seq.levels.back().data);
}

TEST_CASE("zero network one-step enhancement is the identity") {
    Network net = Network::create({1, 6, 2, 4}, 3);
    IlluminationMap low = random_map(3, 8, 8);
    CHECK(enhance_onestep(net, low).data == low.data);
}

TEST_CASE("constant fields integrate exactly for any step count") {
    IlluminationMap start = random_map(4, 8, 8);
    for (int steps : {1, 7, 50}) {
        IlluminationSequence seq = integrate(constant_field(0.07), start, {0.0, 1.0, steps});
        REQUIRE(static_cast<int>(seq.levels.size()) == steps + 1);
        for (size_t i = 0; i < start.size(); ++i)
            CHECK(seq.levels.back().data[i] ==
                  doctest::Approx(clamp01(start.data[i] + 0.07)).epsilon(1e-12));
    }
}

TEST_CASE("suppression runs the signed step in reverse") {
    IlluminationMap start = random_map(5, 8, 8);
    IlluminationSequence seq = integrate(constant_field(0.3), start, {1.0, 0.0, 4});
    for (size_t i = 0; i < start.size(); ++i)
        CHECK(seq.levels.back().data[i] ==
              doctest::Approx(clamp01(start.data[i] - 0.3)).epsilon(1e-12));
}

TEST_CASE("forward then backward transport round trips") {
    // keep values interior so clamping never engages
    IlluminationMap start(8, 8, 1);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> uni(0.3, 0.6);
    for (auto& v : start.data) v = uni(rng);

    IlluminationSequence fwd = integrate(constant_field(0.2), start, {0.0, 1.0, 5});
    IlluminationSequence back = integrate(constant_field(0.2), fwd.levels.back(), {1.0, 0.0, 5});
    for (size_t i = 0; i < start.size(); ++i)
        CHECK(back.levels.back().data[i] == doctest::Approx(start.data[i]).epsilon(1e-9));
}

TEST_CASE("time grid is uniform and inclusive") {
    IlluminationMap start = random_map(7, 8, 8);
    IlluminationSequence seq = integrate(constant_field(0.0), start, {0.0, 1.2, 6});
    REQUIRE(seq.times.size() == 7);
    for (int i = 0; i <= 6; ++i)
        CHECK(seq.times[i] == doctest::Approx(i * 0.2).epsilon(1e-12));
}

TEST_CASE("integrate performs exactly one field evaluation per step") {
    IlluminationMap start = random_map(8, 6, 6);
    int calls = 0;
    VelocityField counting = [&calls](const Tensor& state, double) {
        ++calls;
        return Tensor(state.shape, 0.01);
    };
    integrate(counting, start, {0.0, 1.0, 9});
    CHECK(calls == 9);
}

TEST_CASE("internal states stay unclamped between steps") {
    // field pushes above 1 then back down; clamping inside the recursion
    // would lose the overshoot and break the round trip
    IlluminationMap start(4, 4, 1, 0.9);
    VelocityField updown = [](const Tensor& state, double t) {
        return Tensor(state.shape, t < 0.5 ? 0.4 : -0.4);
    };
    IlluminationSequence seq = integrate(updown, start, {0.0, 1.0, 2});
    // 0.9 -> 1.1 (emitted clamped) -> 0.9
    CHECK(seq.levels[1].data[0] == 1.0);
    CHECK(seq.levels[2].data[0] == doctest::Approx(0.9).epsilon(1e-12));
}

TEST_CASE("non-finite fields are reported") {
    IlluminationMap start = random_map(9, 4, 4);
    VelocityField bad = [](const Tensor& state, double) {
        return Tensor(state.shape, std::numeric_limits<double>::infinity());
    };
    CHECK_THROWS_AS(integrate(bad, start, {0.0, 1.0, 2}), std::runtime_error);
}

TEST_CASE("enhance_image with zero checkpoints approximates the identity") {
    GroundTruthScene scene = render_scene(10, 24, 24);
    Image I = expose(scene, {0.6, {}});
    Network crfi = Network::create({1, 6, 2, 4}, 1);
    Network crfr = Network::create({3, 6, 2, 4}, 2);

    EnhanceOptions opts;
    std::vector<Image> out = enhance_image(crfi, crfr, I, opts);
    REQUIRE(out.size() == 1);
    double rmse = 0.0;
    for (size_t i = 0; i < I.size(); ++i) {
        double d = out[0].data[i] - I.data[i];
        rmse += d * d;
    }
    rmse = std::sqrt(rmse / I.size());
    CHECK(rmse < 2e-2);  // bounded by the decomposition residual
}

TEST_CASE("enhance_image emit_all returns the whole trajectory") {
    GroundTruthScene scene = render_scene(11, 16, 16);
    Image I = expose(scene, {0.5, {}});
    Network crfi = Network::create({1, 4, 1, 4}, 1);
    Network crfr = Network::create({3, 4, 1, 4}, 2);

    EnhanceOptions opts;
    opts.trajectory = {0.0, 1.0, 4};
    opts.emit_all = true;
    std::vector<Image> out = enhance_image(crfi, crfr, I, opts);
    CHECK(out.size() == 5);
}
