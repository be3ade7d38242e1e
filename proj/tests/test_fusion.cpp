#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "illumflow/fusion.hpp"

using namespace illumflow;

namespace {

Image random_image(uint64_t seed, int h, int w, int c) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Image img(h, w, c);
    for (auto& v : img.data) v = uni(rng);
    return img;
}

double mean_of(const Image& img) {
    double s = 0.0;
    for (double v : img.data) s += v;
    return s / img.size();
}

}  // namespace

TEST_CASE("well-exposedness closed forms") {
    Image mid(2, 2, 3, 0.5);
    Image w = well_exposedness(mid, 0.2);
    REQUIRE(w.channels == 1);
    for (double v : w.data) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

    Image black(2, 2, 3, 0.0);
    Image wb = well_exposedness(black, 0.2);
    // per channel exp(-0.25 / 0.08) = exp(-3.125); three channels multiply
    double expect = std::exp(-3.0 * 3.125);
    for (double v : wb.data) {
        CHECK(v == doctest::Approx(expect).epsilon(1e-9));
        CHECK(v > 0.0);
    }
}

TEST_CASE("well-exposedness of grayscale uses a single factor") {
    Image gray(2, 2, 1, 0.3);
    Image w = well_exposedness(gray, 0.2);
    double expect = std::exp(-(0.3 - 0.5) * (0.3 - 0.5) / (2 * 0.04));
    for (double v : w.data) CHECK(v == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("a single image passes through fuse unchanged") {
    Image img = random_image(1, 16, 16, 3);
    Image out = fuse({img});
    CHECK(out.data == img.data);
}

TEST_CASE("fusing identical inputs is idempotent") {
    Image img = random_image(2, 32, 32, 3);
    Image out = fuse({img, img, img});
    for (size_t i = 0; i < img.size(); ++i) CHECK(std::abs(out.data[i] - img.data[i]) < 1e-6);
}

TEST_CASE("equal weights reduce fusion to the pixel mean") {
    Image a = random_image(3, 32, 32, 3);
    Image b = random_image(4, 32, 32, 3);
    FusionParams p;
    p.sigma_e = 1e6;  // flattens the weight Gaussian
    Image out = fuse({a, b}, p);
    for (size_t i = 0; i < a.size(); ++i)
        CHECK(out.data[i] == doctest::Approx(clamp01(0.5 * (a.data[i] + b.data[i]))).epsilon(1e-6));
}

TEST_CASE("mid-tones dominate a dark and bright constant pair") {
    Image dark(32, 32, 3, 0.1), bright(32, 32, 3, 0.9);
    Image out = fuse({dark, bright});
    double m = mean_of(out);
    CHECK(std::abs(m - 0.5) < std::abs(0.1 - 0.5));
    CHECK(std::abs(m - 0.5) < std::abs(0.9 - 0.5));
}

TEST_CASE("fusion is permutation invariant") {
    Image a = random_image(5, 32, 32, 3);
    Image b = random_image(6, 32, 32, 3);
    Image c = random_image(7, 32, 32, 3);
    Image abc = fuse({a, b, c});
    Image cab = fuse({c, a, b});
    for (size_t i = 0; i < abc.size(); ++i) CHECK(std::abs(abc.data[i] - cab.data[i]) < 1e-9);
}

TEST_CASE("fusion output stays in range") {
    Image dark(32, 32, 3, 0.02);
    Image bright(32, 32, 3, 0.98);
    Image mid = random_image(8, 32, 32, 3);
    Image out = fuse({dark, mid, bright});
    for (double v : out.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("fuse validates congruence") {
    CHECK_THROWS_AS(fuse({Image(8, 8, 3), Image(8, 9, 3)}), std::invalid_argument);
    CHECK_THROWS_AS(fuse({}), std::invalid_argument);
}
