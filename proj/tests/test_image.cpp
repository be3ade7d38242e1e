#include <png.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "illumflow/image.hpp"

using namespace illumflow;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const std::string& name) {
    return fs::temp_directory_path() / ("iflw_test_" + name);
}

Image random_quantized(uint64_t seed, int h, int w, int c) {
    std::mt19937_64 rng(seed);
    Image img(h, w, c);
    for (auto& v : img.data) v = static_cast<double>(rng() % 256) / 255.0;
    return img;
}

}  // namespace

TEST_CASE("image constructor validates dimensions") {
    CHECK_THROWS_AS(Image(0, 4, 1), std::invalid_argument);
    CHECK_THROWS_AS(Image(4, 4, 2), std::invalid_argument);
    Image img(3, 5, 3);
    CHECK(img.size() == 45);
}

TEST_CASE("png round trip is bit exact for quantized samples") {
    Image img = random_quantized(11, 13, 17, 3);
    auto path = temp_file("roundtrip.png");
    save_image(img, path.string());
    Image back = load_image(path.string());
    REQUIRE(back.height == img.height);
    REQUIRE(back.width == img.width);
    REQUIRE(back.channels == img.channels);
    for (size_t i = 0; i < img.size(); ++i) CHECK(back.data[i] == img.data[i]);
    fs::remove(path);
}

TEST_CASE("png round trip is bit exact for grayscale") {
    Image img = random_quantized(7, 9, 6, 1);
    auto path = temp_file("roundtrip_gray.png");
    save_image(img, path.string());
    Image back = load_image(path.string());
    REQUIRE(back.channels == 1);
    for (size_t i = 0; i < img.size(); ++i) CHECK(back.data[i] == img.data[i]);
    fs::remove(path);
}

TEST_CASE("quantization error stays within half a step") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Image img(8, 8, 3);
    for (auto& v : img.data) v = uni(rng);
    auto path = temp_file("quant.png");
    save_image(img, path.string());
    Image back = load_image(path.string());
    for (size_t i = 0; i < img.size(); ++i)
        CHECK(std::abs(back.data[i] - img.data[i]) <= 1.0 / 510.0 + 1e-12);
    fs::remove(path);
}

TEST_CASE("stored bytes follow round(v*255)") {
    Image img(1, 2, 1);
    img.data = {0.5, 1.0};
    auto path = temp_file("bytes.png");
    save_image(img, path.string());
    Image back = load_image(path.string());
    CHECK(back.data[0] == doctest::Approx(128.0 / 255.0).epsilon(1e-12));
    CHECK(back.data[1] == 1.0);
    fs::remove(path);
}

TEST_CASE("binary ppm reader maps samples by 255") {
    auto path = temp_file("probe.ppm");
    {
        std::ofstream out(path, std::ios::binary);
        out << "P6\n2 1\n255\n";
        unsigned char px[6] = {0, 128, 255, 10, 20, 30};
        out.write(reinterpret_cast<char*>(px), 6);
    }
    Image img = load_image(path.string());
    REQUIRE(img.width == 2);
    REQUIRE(img.height == 1);
    REQUIRE(img.channels == 3);
    CHECK(img.at(0, 0, 0) == 0.0);
    CHECK(img.at(0, 0, 1) == doctest::Approx(128.0 / 255.0).epsilon(1e-12));
    CHECK(img.at(0, 0, 2) == 1.0);
    CHECK(img.at(0, 1, 0) == doctest::Approx(10.0 / 255.0).epsilon(1e-12));
    fs::remove(path);
}

TEST_CASE("16-bit png samples are mapped by 65535") {
    auto path = temp_file("deep.png");
    {
        FILE* fp = std::fopen(path.string().c_str(), "wb");
        REQUIRE(fp != nullptr);
        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        png_infop info = png_create_info_struct(png);
        REQUIRE(setjmp(png_jmpbuf(png)) == 0);
        png_init_io(png, fp);
        png_set_IHDR(png, info, 2, 1, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                     PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        // big-endian on disk
        unsigned char row[4] = {0xFF, 0xFF, 0x40, 0x00};
        png_bytep rows[1] = {row};
        png_write_image(png, rows);
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
    }
    Image img = load_image(path.string());
    REQUIRE(img.channels == 1);
    CHECK(img.at(0, 0, 0) == 1.0);
    CHECK(img.at(0, 1, 0) == doctest::Approx(0x4000 / 65535.0).epsilon(1e-12));
    fs::remove(path);
}

TEST_CASE("loading a missing file throws") {
    CHECK_THROWS(load_image("/nonexistent/iflw.png"));
}

TEST_CASE("recompose absorbing and identity elements") {
    Image R(4, 4, 3, 0.0);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 4; ++x) {
            R.at(y, x, 0) = 0.2;
            R.at(y, x, 1) = 0.4;
            R.at(y, x, 2) = 0.8;
        }
    IlluminationMap zero(4, 4, 1, 0.0), one(4, 4, 1, 1.0), half(4, 4, 1, 0.5);

    Image a = recompose(zero, R);
    for (double v : a.data) CHECK(v == 0.0);

    Image b = recompose(one, R);
    for (size_t i = 0; i < R.size(); ++i) CHECK(b.data[i] == R.data[i]);

    Image c = recompose(half, R);
    CHECK(c.at(0, 0, 0) == doctest::Approx(0.1));
    CHECK(c.at(0, 0, 1) == doctest::Approx(0.2));
    CHECK(c.at(0, 0, 2) == doctest::Approx(0.4));
}

TEST_CASE("recompose is monotone in L and scales linearly before clamping") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Image R(6, 6, 3);
    for (auto& v : R.data) v = uni(rng);
    IlluminationMap L(6, 6, 1);
    for (auto& v : L.data) v = uni(rng);

    IlluminationMap L2 = L;
    L2.at(2, 3, 0) = std::min(1.0, L.at(2, 3, 0) + 0.1);
    Image base = recompose(L, R), bumped = recompose(L2, R);
    for (size_t i = 0; i < base.size(); ++i) CHECK(bumped.data[i] >= base.data[i] - 1e-15);

    double a = 0.37;
    IlluminationMap La = L;
    for (auto& v : La.data) v *= a;
    Image scaled = recompose(La, R);
    Image expect = recompose(L, R);
    for (size_t i = 0; i < expect.size(); ++i)
        CHECK(scaled.data[i] == doctest::Approx(a * expect.data[i]).epsilon(1e-12));
}

TEST_CASE("recompose rejects size mismatch") {
    CHECK_THROWS_AS(recompose(IlluminationMap(4, 4, 1), ReflectanceMap(4, 5, 3)),
                    std::invalid_argument);
}
