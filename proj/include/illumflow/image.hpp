#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace illumflow {

// Planar-free row-major image: data[(y*width + x)*channels + c], values in [0,1].
struct Image {
    int height = 0;
    int width = 0;
    int channels = 0;  // 1 or 3
    std::vector<double> data;

    Image() = default;
    Image(int h, int w, int c, double fill = 0.0)
        : height(h), width(w), channels(c),
          data(static_cast<size_t>(h) * w * c, fill) {
        if (h <= 0 || w <= 0 || (c != 1 && c != 3))
            throw std::invalid_argument("Image: bad dimensions");
    }

    double& at(int y, int x, int c) { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
    double at(int y, int x, int c) const { return data[(static_cast<size_t>(y) * width + x) * channels + c]; }
    size_t size() const { return data.size(); }

    bool same_size(const Image& o) const { return height == o.height && width == o.width; }
};

// Single-channel illumination factor L of I = L*R.
using IlluminationMap = Image;
// Three-channel reflectance factor R.
using ReflectanceMap = Image;

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Reads an 8- or 16-bit PNG (grayscale or RGB, non-interlaced) or a binary
// PPM (P6, maxval 255). Integer samples are divided by the type maximum.
Image load_image(const std::string& path);

// Writes an 8-bit PNG; samples quantized by round(v*255), clamped.
void save_image(const Image& img, const std::string& path);

// Element-wise Retinex recomposition I = L*R, clamped to [0,1].
Image recompose(const IlluminationMap& L, const ReflectanceMap& R);

}  // namespace illumflow
