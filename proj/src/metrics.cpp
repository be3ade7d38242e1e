#include "illumflow/metrics.hpp"

#include <cmath>
#include <fstream>

#include "illumflow/convert.hpp"

namespace illumflow {

using ad::Var;

std::vector<double> gaussian_kernel(int window, double sigma) {
    if (window % 2 == 0 || window < 1) throw std::invalid_argument("SSIM window must be odd");
    if (sigma <= 0) throw std::invalid_argument("SSIM sigma must be positive");
    std::vector<double> k(window);
    int half = window / 2;
    double sum = 0.0;
    for (int i = 0; i < window; ++i) {
        double d = i - half;
        k[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

double psnr(const Image& a, const Image& b) {
    if (!a.same_size(b) || a.channels != b.channels)
        throw std::invalid_argument("psnr: size mismatch");
    double mse = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.size());
    if (mse < 1e-12) return 99.0;
    return 10.0 * std::log10(1.0 / mse);
}

ad::Var ssim_differentiable(const Var& a, const Var& b, const SsimParams& p) {
    if (!a.value().same_shape(b.value())) throw std::invalid_argument("ssim: shape mismatch");
    if (a.value().shape.size() != 3) throw std::invalid_argument("ssim: expects [C,H,W]");
    if (a.value().shape[1] < p.window || a.value().shape[2] < p.window)
        throw std::invalid_argument("ssim: image smaller than window");
    std::vector<double> k = gaussian_kernel(p.window, p.sigma);
    double c1 = p.c1 * p.dynamic_range * p.dynamic_range;
    double c2 = p.c2 * p.dynamic_range * p.dynamic_range;

    Var mu_a = ad::blur_separable_valid(a, k);
    Var mu_b = ad::blur_separable_valid(b, k);
    Var e_aa = ad::blur_separable_valid(ad::mul(a, a), k);
    Var e_bb = ad::blur_separable_valid(ad::mul(b, b), k);
    Var e_ab = ad::blur_separable_valid(ad::mul(a, b), k);

    Var mu_ab = ad::mul(mu_a, mu_b);
    Var var_a = ad::sub(e_aa, ad::mul(mu_a, mu_a));
    Var var_b = ad::sub(e_bb, ad::mul(mu_b, mu_b));
    Var cov = ad::sub(e_ab, mu_ab);

    Var num = ad::mul(ad::add_scalar(ad::scale(mu_ab, 2.0), c1),
                      ad::add_scalar(ad::scale(cov, 2.0), c2));
    Var den = ad::mul(ad::add_scalar(ad::add(ad::mul(mu_a, mu_a), ad::mul(mu_b, mu_b)), c1),
                      ad::add_scalar(ad::add(var_a, var_b), c2));
    return ad::mean(ad::divide(num, den));
}

double ssim(const Image& a, const Image& b, const SsimParams& p) {
    if (!a.same_size(b) || a.channels != b.channels)
        throw std::invalid_argument("ssim: size mismatch");
    return ssim_differentiable(Var::constant(to_tensor(a)), Var::constant(to_tensor(b)), p).item();
}

SequenceReport sequence_metrics(const std::vector<Image>& seq, const std::vector<double>& times,
                                const Image& reference, const SsimParams& p) {
    if (seq.empty() || seq.size() != times.size())
        throw std::invalid_argument("sequence_metrics: empty or mismatched sequence");
    SequenceReport report;
    double best = -1e300;
    for (size_t i = 0; i < seq.size(); ++i) {
        SequenceRow row;
        row.step = static_cast<int>(i);
        row.t = times[i];
        row.psnr_db = psnr(seq[i], reference);
        row.ssim = ssim(seq[i], reference, p);
        if (row.psnr_db > best) {
            best = row.psnr_db;
            report.psnr_argmax = row.step;
        }
        report.rows.push_back(row);
    }
    return report;
}

void write_sequence_report(const SequenceReport& report, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "step,t,psnr_db,ssim\n";
    for (const SequenceRow& r : report.rows)
        out << r.step << ',' << r.t << ',' << r.psnr_db << ',' << r.ssim << '\n';
}

}  // namespace illumflow
