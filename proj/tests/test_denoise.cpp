#include <cmath>
#include <random>

#include "doctest.h"
#include "illumflow/convert.hpp"
#include "illumflow/denoise.hpp"
#include "illumflow/metrics.hpp"
#include "illumflow/synth.hpp"

using namespace illumflow;
using ad::Tensor;

namespace {

ReflectanceMap random_map(uint64_t seed, int h, int w) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    ReflectanceMap m(h, w, 3);
    for (auto& v : m.data) v = uni(rng);
    return m;
}

}  // namespace

TEST_CASE("augment endpoints and blends") {
    ReflectancePair pair{random_map(1, 8, 8), random_map(2, 8, 8)};
    CHECK(augment(pair, 0.0).r_t.data == pair.noisy.data);
    CHECK(augment(pair, 1.0).r_t.data == pair.clean.data);

    ReflectancePair flat{ReflectanceMap(4, 4, 3, 0.3), ReflectanceMap(4, 4, 3, 0.7)};
    AugmentedSample s = augment(flat, 0.25);
    for (double v : s.r_t.data) CHECK(v == doctest::Approx(0.4).epsilon(1e-15));

    CHECK_THROWS_AS(augment(pair, -0.1), std::invalid_argument);
    CHECK_THROWS_AS(augment(pair, 1.1), std::invalid_argument);
}

TEST_CASE("augmented samples satisfy the residual identity") {
    ReflectancePair pair{random_map(3, 6, 6), random_map(4, 6, 6)};
    for (double t : {0.0, 0.3, 0.8}) {
        AugmentedSample s = augment(pair, t);
        for (size_t i = 0; i < s.r_t.size(); ++i) {
            double lhs = pair.clean.data[i] - s.r_t.data[i];
            double rhs = (1.0 - t) * (pair.clean.data[i] - pair.noisy.data[i]);
            CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
        }
    }
}

TEST_CASE("reconstruct recovers the clean map under the oracle residual") {
    ReflectancePair pair{random_map(5, 6, 6), random_map(6, 6, 6)};
    Image v = target_velocity(pair.noisy, pair.clean);
    for (double t : {0.0, 0.4, 1.0}) {
        AugmentedSample s = augment(pair, t);
        ReflectanceMap rhat = reconstruct(s.r_t, t, v);
        for (size_t i = 0; i < rhat.size(); ++i)
            CHECK(rhat.data[i] == doctest::Approx(pair.clean.data[i]).epsilon(1e-9));
    }
}

TEST_CASE("reconstruct degenerates at the path ends") {
    ReflectancePair pair{random_map(7, 6, 6), random_map(8, 6, 6)};
    Image junk = random_map(9, 6, 6);
    // t=1: the correction vanishes regardless of v
    ReflectanceMap end = reconstruct(pair.clean, 1.0, junk);
    CHECK(end.data == pair.clean.data);
    // t=0, v=0: identity
    ReflectanceMap zero_v(6, 6, 3, 0.0);
    ReflectanceMap start = reconstruct(pair.noisy, 0.0, zero_v);
    CHECK(start.data == pair.noisy.data);
}

TEST_CASE("crfr loss closed forms on constant pairs") {
    Network net = Network::create({3, 8, 2, 8}, 1);  // zero output head

    auto build_batch = [](double noisy, double clean, int n) {
        std::vector<FlowSample> batch;
        for (int i = 0; i < n; ++i) {
            ReflectancePair pair{ReflectanceMap(12, 12, 3, noisy), ReflectanceMap(12, 12, 3, clean)};
            AugmentedSample s = augment(pair, 0.0);  // t=0 keeps the closed forms exact
            batch.push_back(to_flow_sample(s, i < n / 2 ? 0.0 : 0.25));
        }
        return batch;
    };

    // identical pairs: every term vanishes (SSIM of equal maps is 1)
    double cfm = -1, cons = -1, content = -1;
    ad::Var l0 = crfr_loss(net, build_batch(0.5, 0.5, 4), &cfm, &cons, &content);
    CHECK(l0.item() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(content == doctest::Approx(0.0).epsilon(1e-12));

    // difference 0.6 against the zero field at t=0
    ad::Var l1 = crfr_loss(net, build_batch(0.2, 0.8, 4), &cfm, &cons, &content);
    CHECK(cfm == doctest::Approx(0.36).epsilon(1e-12));
    CHECK(cons == doctest::Approx(0.0).epsilon(1e-15));
    // content term averages 1 - SSIM(R_l, R_n) over the batch
    double expect = 1.0 - ssim(ReflectanceMap(12, 12, 3, 0.2), ReflectanceMap(12, 12, 3, 0.8));
    CHECK(content == doctest::Approx(expect).epsilon(1e-9));
    CHECK(l1.item() == doctest::Approx(0.36 + expect).epsilon(1e-9));
}

TEST_CASE("denoise with a zero network is the identity") {
    Network net = Network::create({3, 8, 2, 8}, 1);
    ReflectanceMap r = random_map(10, 10, 10);
    ReflectanceMap out = denoise(net, r);
    CHECK(out.data == r.data);
}

TEST_CASE("denoise rejects channel mismatches") {
    Network net = Network::create({1, 4, 1, 4}, 1);
    CHECK_THROWS_AS(denoise(net, random_map(1, 8, 8)), std::invalid_argument);
}

TEST_CASE("train_crfr requires a 3-channel network and is deterministic") {
    GroundTruthScene scene = render_scene(11, 16, 16);
    ReflectanceMap clean = scene.true_reflectance;
    ReflectanceMap noisy = inject_noise(clean, {0.1, 0.0, 0.0}, 5);
    std::vector<ReflectancePair> pairs = {{noisy, clean}};

    CrfiTrainConfig cfg;
    cfg.batch_size = 2;
    cfg.iterations = 2;
    cfg.lr = 1e-3;
    cfg.patch_size = 12;
    cfg.seed = 9;

    CHECK_THROWS_AS(train_crfr(pairs, cfg, {1, 4, 1, 4}), std::invalid_argument);

    TrainOutput a = train_crfr(pairs, cfg, {3, 4, 1, 4});
    TrainOutput b = train_crfr(pairs, cfg, {3, 4, 1, 4});
    for (size_t i = 0; i < a.net.params.size(); ++i)
        CHECK(a.net.params[i].second.data == b.net.params[i].second.data);
    CHECK(a.trace.content.size() == 2);
}

TEST_CASE("noiseless pairs train toward a silent residual") {
    GroundTruthScene scene = render_scene(12, 16, 16);
    std::vector<ReflectancePair> pairs = {{scene.true_reflectance, scene.true_reflectance}};

    CrfiTrainConfig cfg;
    cfg.batch_size = 2;
    cfg.iterations = 25;
    cfg.lr = 1e-3;
    cfg.patch_size = 12;

    TrainOutput out = train_crfr(pairs, cfg, {3, 4, 1, 4});
    Tensor probe = to_tensor(random_map(13, 12, 12));
    Tensor v = forward_item(out.net, probe, 0.0, 0.0);
    double mag = 0.0;
    for (double e : v.data) mag += std::abs(e);
    CHECK(mag / v.size() < 0.01);
}
