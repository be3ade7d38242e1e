#pragma once

#include "illumflow/image.hpp"
#include "illumflow/tensor.hpp"

namespace illumflow {

// Interleaved HxWxC image -> planar [C,H,W] tensor.
inline ad::Tensor to_tensor(const Image& img) {
    ad::Tensor t({img.channels, img.height, img.width});
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                t.data[(static_cast<size_t>(c) * img.height + y) * img.width + x] = img.at(y, x, c);
    return t;
}

// Planar [C,H,W] tensor -> image; clamps to [0,1] when requested.
inline Image to_image(const ad::Tensor& t, bool clamp = true) {
    if (t.shape.size() != 3) throw std::invalid_argument("to_image: expects [C,H,W]");
    Image img(t.shape[1], t.shape[2], t.shape[0]);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) {
                double v = t.data[(static_cast<size_t>(c) * img.height + y) * img.width + x];
                img.at(y, x, c) = clamp ? clamp01(v) : v;
            }
    return img;
}

}  // namespace illumflow
