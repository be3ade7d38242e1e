#include "illumflow/fusion.hpp"

#include <algorithm>
#include <cmath>

namespace illumflow {

namespace {

constexpr double kTaps[5] = {1.0 / 16, 4.0 / 16, 6.0 / 16, 4.0 / 16, 1.0 / 16};

int reflect(int i, int n) {
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
}

Image blur5(const Image& src, double gain = 1.0) {
    Image mid(src.height, src.width, src.channels);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c) {
                double acc = 0.0;
                for (int k = -2; k <= 2; ++k)
                    acc += kTaps[k + 2] * src.at(y, reflect(x + k, src.width), c);
                mid.at(y, x, c) = acc;
            }
    Image out(src.height, src.width, src.channels);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            for (int c = 0; c < src.channels; ++c) {
                double acc = 0.0;
                for (int k = -2; k <= 2; ++k)
                    acc += kTaps[k + 2] * mid.at(reflect(y + k, src.height), x, c);
                out.at(y, x, c) = acc * gain;
            }
    return out;
}

Image downsample(const Image& src) {
    Image blurred = blur5(src);
    int h = (src.height + 1) / 2, w = (src.width + 1) / 2;
    Image out(h, w, src.channels);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < src.channels; ++c) out.at(y, x, c) = blurred.at(2 * y, 2 * x, c);
    return out;
}

Image upsample(const Image& src, int th, int tw) {
    Image sparse(th, tw, src.channels);
    for (int y = 0; y < src.height; ++y)
        for (int x = 0; x < src.width; ++x)
            if (2 * y < th && 2 * x < tw)
                for (int c = 0; c < src.channels; ++c) sparse.at(2 * y, 2 * x, c) = src.at(y, x, c);
    return blur5(sparse, 4.0);  // 4x gain restores energy of zero insertion
}

std::vector<Image> gaussian_pyramid(const Image& img, int levels) {
    std::vector<Image> pyr{img};
    while (static_cast<int>(pyr.size()) < levels && std::min(pyr.back().height, pyr.back().width) >= 4)
        pyr.push_back(downsample(pyr.back()));
    return pyr;
}

std::vector<Image> laplacian_pyramid(const Image& img, int levels) {
    std::vector<Image> gp = gaussian_pyramid(img, levels);
    std::vector<Image> lp;
    for (size_t i = 0; i + 1 < gp.size(); ++i) {
        Image up = upsample(gp[i + 1], gp[i].height, gp[i].width);
        Image diff = gp[i];
        for (size_t k = 0; k < diff.size(); ++k) diff.data[k] -= up.data[k];
        lp.push_back(std::move(diff));
    }
    lp.push_back(gp.back());
    return lp;
}

}  // namespace

Image well_exposedness(const Image& img, double sigma_e) {
    if (sigma_e <= 0) throw std::invalid_argument("well_exposedness: sigma_e must be positive");
    Image w(img.height, img.width, 1);
    double denom = 2.0 * sigma_e * sigma_e;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            double prod = 1.0;
            for (int c = 0; c < img.channels; ++c) {
                double d = img.at(y, x, c) - 0.5;
                prod *= std::exp(-d * d / denom);
            }
            w.at(y, x, 0) = prod;
        }
    return w;
}

Image fuse(const std::vector<Image>& seq, const FusionParams& p) {
    if (seq.empty()) throw std::invalid_argument("fuse: empty sequence");
    if (seq.size() == 1) return seq.front();
    for (const Image& img : seq)
        if (!img.same_size(seq.front()) || img.channels != seq.front().channels)
            throw std::invalid_argument("fuse: size mismatch within sequence");

    // normalized per-pixel weights
    std::vector<Image> weights;
    for (const Image& img : seq) {
        Image w = well_exposedness(img, p.sigma_e);
        for (double& v : w.data) v += p.weight_floor;
        weights.push_back(std::move(w));
    }
    for (size_t i = 0; i < weights.front().size(); ++i) {
        double sum = 0.0;
        for (const Image& w : weights) sum += w.data[i];
        for (Image& w : weights) w.data[i] /= sum;
    }

    // blend Laplacian pyramids of inputs with Gaussian pyramids of weights
    std::vector<Image> blended;
    for (size_t k = 0; k < seq.size(); ++k) {
        std::vector<Image> lp = laplacian_pyramid(seq[k], p.pyramid_levels);
        std::vector<Image> wp = gaussian_pyramid(weights[k], p.pyramid_levels);
        if (blended.empty())
            for (const Image& l : lp) blended.emplace_back(l.height, l.width, l.channels);
        for (size_t lvl = 0; lvl < lp.size(); ++lvl)
            for (int y = 0; y < lp[lvl].height; ++y)
                for (int x = 0; x < lp[lvl].width; ++x)
                    for (int c = 0; c < lp[lvl].channels; ++c)
                        blended[lvl].at(y, x, c) += wp[lvl].at(y, x, 0) * lp[lvl].at(y, x, c);
    }

    // collapse
    Image out = blended.back();
    for (size_t lvl = blended.size() - 1; lvl-- > 0;) {
        Image up = upsample(out, blended[lvl].height, blended[lvl].width);
        out = blended[lvl];
        for (size_t i = 0; i < out.size(); ++i) out.data[i] += up.data[i];
    }
    for (double& v : out.data) v = clamp01(v);
    return out;
}

}  // namespace illumflow
