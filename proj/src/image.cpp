#include "illumflow/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

namespace illumflow {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

Image load_ppm(std::ifstream& in, const std::string& path) {
    std::string magic;
    in >> magic;
    if (magic != "P6") throw std::runtime_error("unsupported PPM variant in " + path);
    auto next_token = [&in, &path]() {
        // PPM headers allow '#' comments between tokens.
        std::string tok;
        while (in >> tok) {
            if (tok[0] == '#') {
                std::string rest;
                std::getline(in, rest);
                continue;
            }
            return tok;
        }
        throw std::runtime_error("truncated PPM header in " + path);
    };
    int w = std::stoi(next_token());
    int h = std::stoi(next_token());
    int maxval = std::stoi(next_token());
    if (maxval != 255) throw std::runtime_error("PPM maxval must be 255 in " + path);
    in.get();  // single whitespace after maxval
    Image img(h, w, 3);
    std::vector<unsigned char> row(static_cast<size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), row.size());
        if (!in) throw std::runtime_error("truncated PPM data in " + path);
        for (size_t i = 0; i < row.size(); ++i)
            img.data[static_cast<size_t>(y) * w * 3 + i] = row[i] / 255.0;
    }
    return img;
}

}  // namespace

Image load_image(const std::string& path) {
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("cannot open " + path);
        char head[2] = {0, 0};
        in.read(head, 2);
        if (head[0] == 'P' && head[1] == '6') {
            in.seekg(0);
            return load_ppm(in, path);
        }
    }

    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw std::runtime_error("cannot open " + path);
    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
        throw std::runtime_error("not a PNG or PPM file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("libpng init failed");
    }
    std::vector<png_bytep> rows;
    std::vector<unsigned char> buf;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("PNG decode error in " + path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int depth = png_get_bit_depth(png, info);
    int color = png_get_color_type(png, info);
    if (png_get_interlace_type(png, info) != PNG_INTERLACE_NONE) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("interlaced PNG unsupported: " + path);
    }
    if (depth != 8 && depth != 16) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unsupported PNG bit depth in " + path);
    }
    if (color != PNG_COLOR_TYPE_GRAY && color != PNG_COLOR_TYPE_RGB) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("unsupported PNG color model in " + path);
    }
    int channels = (color == PNG_COLOR_TYPE_GRAY) ? 1 : 3;
    if (depth == 16) png_set_swap(png);  // PNG is big-endian on disk
    png_read_update_info(png, info);

    size_t rowbytes = png_get_rowbytes(png, info);
    buf.resize(rowbytes * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Image img(static_cast<int>(h), static_cast<int>(w), channels);
    const double maxv = depth == 8 ? 255.0 : 65535.0;
    size_t n = static_cast<size_t>(w) * h * channels;
    if (depth == 8) {
        for (size_t i = 0; i < n; ++i) img.data[i] = buf[i] / maxv;
    } else {
        // png_set_swap gave host little-endian 16-bit samples
        for (size_t i = 0; i < n; ++i) {
            uint16_t v;
            std::memcpy(&v, buf.data() + 2 * i, 2);
            img.data[i] = v / maxv;
        }
    }
    return img;
}

void save_image(const Image& img, const std::string& path) {
    if (img.size() == 0) throw std::invalid_argument("save_image: empty image");
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw std::runtime_error("cannot write " + path);

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("PNG encode error for " + path);
    }
    png_init_io(png, fp.get());
    int color = img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
    png_set_IHDR(png, info, img.width, img.height, 8, color, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    std::vector<unsigned char> row(static_cast<size_t>(img.width) * img.channels);
    for (int y = 0; y < img.height; ++y) {
        for (size_t i = 0; i < row.size(); ++i) {
            double v = img.data[static_cast<size_t>(y) * row.size() + i];
            double q = std::round(v * 255.0);
            row[i] = static_cast<unsigned char>(q < 0.0 ? 0.0 : (q > 255.0 ? 255.0 : q));
        }
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image recompose(const IlluminationMap& L, const ReflectanceMap& R) {
    if (L.channels != 1) throw std::invalid_argument("recompose: L must be single-channel");
    if (!L.same_size(R)) throw std::invalid_argument("recompose: size mismatch");
    Image out(R.height, R.width, R.channels);
    for (int y = 0; y < R.height; ++y)
        for (int x = 0; x < R.width; ++x)
            for (int c = 0; c < R.channels; ++c)
                out.at(y, x, c) = clamp01(L.at(y, x, 0) * R.at(y, x, c));
    return out;
}

}  // namespace illumflow
