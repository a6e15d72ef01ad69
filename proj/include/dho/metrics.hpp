#pragma once

#include <span>

#include "dho/image.hpp"

namespace dho {

// PSNR in dB over all pixels and channels, capped at 100 dB for near-zero MSE.
double psnr(const ImageD& a, const ImageD& b);

// Mean SSIM with the standard 11x11 Gaussian window (sigma 1.5, K1=0.01,
// K2=0.03, dynamic range 1), averaged over channels and valid window centers.
double ssim(const ImageD& a, const ImageD& b);

inline double d_ssim(double ssim_value) { return (1.0 - ssim_value) * 0.5; }

// Mean intersection-over-union across aligned mask lists. A frame where both
// masks are empty counts as IoU 1.
double miou(std::span<const MaskImage> pred, std::span<const MaskImage> gt);

double iou(const MaskImage& pred, const MaskImage& gt);

struct MaskedMetrics {
    double psnr = 0.0;
    double ssim = 0.0;
};

// Metrics restricted to the mask: PSNR over masked MSE, SSIM over windows
// whose centers lie in the mask.
MaskedMetrics masked_metrics(const ImageD& rendered, const ImageD& target, const MaskImage& mask);

}  // namespace dho
