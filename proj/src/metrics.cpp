#include "nlvc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nlvc/common.hpp"

namespace nlvc {

double mse(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "mse: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        acc += d * d;
    }
    return acc / static_cast<double>(a.data.size());
}

double psnr_from_mse(double mse_value, double peak) {
    check(peak > 0.0, "psnr: peak must be positive");
    check(mse_value >= 0.0, "psnr: negative MSE");
    if (mse_value == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return 10.0 * std::log10(peak * peak / mse_value);
}

double psnr(const Tensor& a, const Tensor& b, double peak) {
    return psnr_from_mse(mse(a, b), peak);
}

namespace {

constexpr int kSsimWindow = 11;
constexpr double kSsimSigma = 1.5;
constexpr double kSsimK1 = 0.01;
constexpr double kSsimK2 = 0.03;

std::vector<double> gaussian_kernel_1d() {
    std::vector<double> k(kSsimWindow);
    const int half = kSsimWindow / 2;
    double sum = 0.0;
    for (int i = 0; i < kSsimWindow; ++i) {
        const double d = i - half;
        k[i] = std::exp(-(d * d) / (2.0 * kSsimSigma * kSsimSigma));
        sum += k[i];
    }
    for (double& v : k) v /= sum;
    return k;
}

// Gaussian-weighted window sums over all fully interior windows: a horizontal
// pass producing H x (W-10) values, then a vertical pass shrinking to
// (H-10) x (W-10). Separability keeps this linear in the pixel count.
std::vector<double> filter_valid(const double* src, int h, int w,
                                 const std::vector<double>& kernel) {
    const int out_w = w - kSsimWindow + 1;
    const int out_h = h - kSsimWindow + 1;
    std::vector<double> rows(static_cast<std::size_t>(h) * out_w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            double acc = 0.0;
            for (int t = 0; t < kSsimWindow; ++t) {
                acc += kernel[t] * src[y * w + x + t];
            }
            rows[static_cast<std::size_t>(y) * out_w + x] = acc;
        }
    }
    std::vector<double> out(static_cast<std::size_t>(out_h) * out_w);
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            double acc = 0.0;
            for (int t = 0; t < kSsimWindow; ++t) {
                acc += kernel[t] * rows[static_cast<std::size_t>(y + t) * out_w + x];
            }
            out[static_cast<std::size_t>(y) * out_w + x] = acc;
        }
    }
    return out;
}

double ssim_plane(const double* a, const double* b, int h, int w,
                  const std::vector<double>& kernel) {
    const std::size_t n = static_cast<std::size_t>(h) * w;
    std::vector<double> aa(n), bb(n), ab(n);
    for (std::size_t i = 0; i < n; ++i) {
        aa[i] = a[i] * a[i];
        bb[i] = b[i] * b[i];
        ab[i] = a[i] * b[i];
    }
    const std::vector<double> mu_a = filter_valid(a, h, w, kernel);
    const std::vector<double> mu_b = filter_valid(b, h, w, kernel);
    const std::vector<double> e_aa = filter_valid(aa.data(), h, w, kernel);
    const std::vector<double> e_bb = filter_valid(bb.data(), h, w, kernel);
    const std::vector<double> e_ab = filter_valid(ab.data(), h, w, kernel);

    const double c1 = kSsimK1 * kSsimK1;
    const double c2 = kSsimK2 * kSsimK2;
    double acc = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
        const double var_a = e_aa[i] - mu_a[i] * mu_a[i];
        const double var_b = e_bb[i] - mu_b[i] * mu_b[i];
        const double cov = e_ab[i] - mu_a[i] * mu_b[i];
        const double num = (2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2);
        const double den = (mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (var_a + var_b + c2);
        acc += num / den;
    }
    return acc / static_cast<double>(mu_a.size());
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b) {
    check(a.same_shape(b), "ssim: shape mismatch");
    check(a.height >= kSsimWindow && a.width >= kSsimWindow,
          "ssim: image smaller than the 11x11 window");
    static const std::vector<double> kernel = gaussian_kernel_1d();
    double acc = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        acc += ssim_plane(a.plane(c), b.plane(c), a.height, a.width, kernel);
    }
    return acc / a.channels;
}

double curve_stddev(const QualityCurve& curve) {
    check(!curve.empty(), "curve_stddev: empty curve");
    const double n = static_cast<double>(curve.size());
    double mean = 0.0;
    for (double v : curve) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : curve) {
        const double d = v - mean;
        var += d * d;
    }
    return std::sqrt(var / n);
}

std::optional<double> peak_valley_diff(const QualityCurve& curve) {
    const int n = static_cast<int>(curve.size());
    if (n < 3) {
        return std::nullopt;
    }
    std::vector<int> peaks;
    std::vector<int> valleys;
    if (curve[0] < curve[1]) valleys.push_back(0);
    for (int i = 1; i + 1 < n; ++i) {
        if (curve[i] > curve[i - 1] && curve[i] > curve[i + 1]) peaks.push_back(i);
        if (curve[i] < curve[i - 1] && curve[i] < curve[i + 1]) valleys.push_back(i);
    }
    if (curve[n - 1] < curve[n - 2]) valleys.push_back(n - 1);

    double acc = 0.0;
    int pairs = 0;
    for (int p : peaks) {
        // Nearest valley on each side; a side without one contributes nothing.
        const auto after = std::upper_bound(valleys.begin(), valleys.end(), p);
        if (after != valleys.begin()) {
            acc += curve[p] - curve[*std::prev(after)];
            ++pairs;
        }
        if (after != valleys.end()) {
            acc += curve[p] - curve[*after];
            ++pairs;
        }
    }
    if (pairs == 0) {
        const auto [lo, hi] = std::minmax_element(curve.begin(), curve.end());
        if (*lo == *hi) {
            return 0.0;  // flat curve: nothing fluctuates
        }
        return std::nullopt;  // e.g. monotone: no peak/valley pair to measure
    }
    return acc / pairs;
}

FluctuationStats fluctuation(const QualityCurve& curve) {
    FluctuationStats stats;
    stats.stddev = curve_stddev(curve);
    stats.pvd = peak_valley_diff(curve);
    return stats;
}

}  // namespace nlvc
