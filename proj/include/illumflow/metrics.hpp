#pragma once

#include <string>
#include <vector>

#include "illumflow/graph.hpp"
#include "illumflow/image.hpp"

namespace illumflow {

struct SsimParams {
    int window = 11;
    double sigma = 1.5;
    double c1 = 0.01 * 0.01;  // (K1 * dynamic_range)^2
    double c2 = 0.03 * 0.03;
    double dynamic_range = 1.0;
};

struct SequenceRow {
    int step;
    double t;
    double psnr_db;
    double ssim;
};

struct SequenceReport {
    std::vector<SequenceRow> rows;
    int psnr_argmax = 0;
};

// 10*log10(range^2 / MSE), capped at 99 dB for near-identical inputs.
double psnr(const Image& a, const Image& b);

// Gaussian-windowed structural similarity over valid window positions,
// averaged across channels.
double ssim(const Image& a, const Image& b, const SsimParams& p = {});

// Same computation as a tape node, so 1-SSIM can serve as a training loss.
ad::Var ssim_differentiable(const ad::Var& a, const ad::Var& b, const SsimParams& p = {});

SequenceReport sequence_metrics(const std::vector<Image>& seq, const std::vector<double>& times,
                                const Image& reference, const SsimParams& p = {});

void write_sequence_report(const SequenceReport& report, const std::string& path);

// Normalized 1-D Gaussian taps used by the SSIM window.
std::vector<double> gaussian_kernel(int window, double sigma);

}  // namespace illumflow
