#pragma once

#include <optional>
#include <vector>

#include "nlvc/tensor.hpp"

namespace nlvc {

// Per-frame metric values (PSNR in dB or SSIM), ordered by frame index.
using QualityCurve = std::vector<double>;

double mse(const Tensor& a, const Tensor& b);

// 10·log10(peak² / mse). A zero MSE (identical inputs) yields +infinity.
double psnr_from_mse(double mse_value, double peak);
double psnr(const Tensor& a, const Tensor& b, double peak = 1.0);

// Mean local SSIM over all fully interior 11x11 windows (no padding), using a
// Gaussian window with sigma = 1.5 and stabilizers K1 = 0.01, K2 = 0.03 at
// dynamic range 1.0. Multi-channel tensors average the per-channel scores.
// Result lies in [-1, 1]; identical inputs score exactly 1.
double ssim(const Tensor& a, const Tensor& b);

// Population standard deviation of a quality curve.
double curve_stddev(const QualityCurve& curve);

// Peak-valley difference: mean of peak - valley over all (peak, nearest
// preceding valley) and (peak, nearest following valley) pairs. Peaks and
// valleys are strict local extrema; an endpoint counts as a valley when it
// lies below its single neighbor. Curves shorter than 3 entries have no
// defined value, as do curves with no measurable pairs (e.g. monotone runs);
// a constant curve reports 0 since there is nothing to fluctuate.
std::optional<double> peak_valley_diff(const QualityCurve& curve);

struct FluctuationStats {
    double stddev = 0.0;
    std::optional<double> pvd;
};

FluctuationStats fluctuation(const QualityCurve& curve);

}  // namespace nlvc
