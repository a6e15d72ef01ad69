#include <array>
#include <cmath>

#include "dho/metrics.hpp"

namespace dho {

namespace {

constexpr int kWin = 11;
constexpr int kHalf = kWin / 2;
constexpr double kK1 = 0.01, kK2 = 0.03;

std::array<double, kWin> gaussian_window() {
    std::array<double, kWin> w{};
    const double sigma = 1.5;
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        const double d = i - kHalf;
        w[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        sum += w[i];
    }
    for (auto& v : w) v /= sum;
    return w;
}

// Separable Gaussian blur of one channel; only values with a full window
// margin are meaningful.
ImageD blur_channel(const ImageD& src, int channel) {
    static const std::array<double, kWin> w = gaussian_window();
    const int H = src.height, W = src.width;
    ImageD tmp(H, W, 1), out(H, W, 1);
    for (int y = 0; y < H; ++y)
        for (int x = kHalf; x < W - kHalf; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += w[k] * src.at(y, x - kHalf + k, channel);
            tmp.at(y, x) = acc;
        }
    for (int y = kHalf; y < H - kHalf; ++y)
        for (int x = kHalf; x < W - kHalf; ++x) {
            double acc = 0.0;
            for (int k = 0; k < kWin; ++k) acc += w[k] * tmp.at(y - kHalf + k, x);
            out.at(y, x) = acc;
        }
    return out;
}

double ssim_impl(const ImageD& a, const ImageD& b, const MaskImage* mask) {
    require_same_shape(a, b, "ssim");
    const int H = a.height, W = a.width, C = a.channels;
    if (H < kWin || W < kWin) throw ShapeMismatch("ssim: image smaller than the 11x11 window");

    const double c1 = kK1 * kK1, c2 = kK2 * kK2;
    double total = 0.0;
    size_t count = 0;
    for (int ch = 0; ch < C; ++ch) {
        ImageD a2(H, W, 1), b2(H, W, 1), ab(H, W, 1);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const double av = a.at(y, x, ch), bv = b.at(y, x, ch);
                a2.at(y, x) = av * av;
                b2.at(y, x) = bv * bv;
                ab.at(y, x) = av * bv;
            }
        ImageD a1(H, W, 1), b1(H, W, 1);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                a1.at(y, x) = a.at(y, x, ch);
                b1.at(y, x) = b.at(y, x, ch);
            }
        const ImageD mu_a = blur_channel(a1, 0), mu_b = blur_channel(b1, 0);
        const ImageD m_a2 = blur_channel(a2, 0), m_b2 = blur_channel(b2, 0);
        const ImageD m_ab = blur_channel(ab, 0);
        for (int y = kHalf; y < H - kHalf; ++y)
            for (int x = kHalf; x < W - kHalf; ++x) {
                if (mask && !mask->at(y, x)) continue;
                const double ma = mu_a.at(y, x), mb = mu_b.at(y, x);
                const double va = m_a2.at(y, x) - ma * ma;
                const double vb = m_b2.at(y, x) - mb * mb;
                const double cov = m_ab.at(y, x) - ma * mb;
                const double v = ((2 * ma * mb + c1) * (2 * cov + c2)) /
                                 ((ma * ma + mb * mb + c1) * (va + vb + c2));
                total += v;
                ++count;
            }
    }
    if (count == 0) throw MetricUndefined("ssim: no valid window centers");
    return total / double(count);
}

}  // namespace

double psnr(const ImageD& a, const ImageD& b) {
    require_same_shape(a, b, "psnr");
    double mse = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= double(a.data.size());
    if (mse < 1e-10) return 100.0;
    return 10.0 * std::log10(1.0 / mse);
}

double ssim(const ImageD& a, const ImageD& b) { return ssim_impl(a, b, nullptr); }

double iou(const MaskImage& pred, const MaskImage& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw ShapeMismatch("iou: mask shapes differ");
    size_t inter = 0, uni = 0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const bool p = pred.data[i] != 0, g = gt.data[i] != 0;
        inter += (p && g) ? 1 : 0;
        uni += (p || g) ? 1 : 0;
    }
    if (uni == 0) return 1.0;  // both empty: correctly predicted absence
    return double(inter) / double(uni);
}

double miou(std::span<const MaskImage> pred, std::span<const MaskImage> gt) {
    if (pred.empty() || gt.empty()) throw EmptyList("miou: empty mask list");
    if (pred.size() != gt.size()) throw ShapeMismatch("miou: list lengths differ");
    double sum = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) sum += iou(pred[i], gt[i]);
    return sum / double(pred.size());
}

MaskedMetrics masked_metrics(const ImageD& rendered, const ImageD& target, const MaskImage& mask) {
    require_same_shape(rendered, target, "masked_metrics");
    if (mask.height != rendered.height || mask.width != rendered.width)
        throw ShapeMismatch("masked_metrics: mask shape mismatch");
    size_t inside = 0;
    for (uint8_t m : mask.data) inside += m ? 1 : 0;
    if (inside == 0) throw MetricUndefined("masked_metrics: empty mask");

    double mse = 0.0;
    for (int y = 0; y < rendered.height; ++y)
        for (int x = 0; x < rendered.width; ++x) {
            if (!mask.at(y, x)) continue;
            for (int c = 0; c < rendered.channels; ++c) {
                const double d = rendered.at(y, x, c) - target.at(y, x, c);
                mse += d * d;
            }
        }
    mse /= double(inside * size_t(rendered.channels));

    MaskedMetrics out;
    out.psnr = mse < 1e-10 ? 100.0 : 10.0 * std::log10(1.0 / mse);
    out.ssim = ssim_impl(rendered, target, &mask);
    return out;
}

}  // namespace dho
