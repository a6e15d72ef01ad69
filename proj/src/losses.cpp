#include <algorithm>
#include <cmath>

#include "dho/losses.hpp"

namespace dho {

void CloudGrads::resize(size_t n, int feature_dim) {
    position.assign(3 * n, 0.0);
    log_scale.assign(3 * n, 0.0);
    rotation.assign(4 * n, 0.0);
    opacity_logit.assign(n, 0.0);
    color.assign(3 * n, 0.0);
    feature.assign(size_t(feature_dim) * n, 0.0);
}

void CloudGrads::clear() {
    std::fill(position.begin(), position.end(), 0.0);
    std::fill(log_scale.begin(), log_scale.end(), 0.0);
    std::fill(rotation.begin(), rotation.end(), 0.0);
    std::fill(opacity_logit.begin(), opacity_logit.end(), 0.0);
    std::fill(color.begin(), color.end(), 0.0);
    std::fill(feature.begin(), feature.end(), 0.0);
}

void anchor_record(GaussianCloud& cloud) {
    cloud.record_anchors();
}

double anchor_loss(const GaussianCloud& cloud, const StageGate& gate, const AnchorConfig& cfg,
                   CloudGrads* grads, double weight) {
    if (!cloud.has_anchors()) throw MissingAnchor("anchor_loss: cloud has no anchors recorded");
    const size_t n = cloud.size();
    const int fd = cloud.feature_dim();
    const bool coarse = gate.stage() == StageGate::Stage::Coarse;

    double loss = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const uint32_t age = cloud.round() - cloud.generation[i];
        const double lam = weight * anchor_strength(cfg, age);
        if (coarse) {
            for (int k = 0; k < 3; ++k) {
                const double d = cloud.position[3 * i + k] - cloud.anchor_position[3 * i + k];
                loss += lam * d * d / 3.0;
                if (grads) grads->position[3 * i + k] += lam * 2.0 * d / 3.0;
            }
            for (int k = 0; k < 3; ++k) {
                const double d = cloud.log_scale[3 * i + k] - cloud.anchor_log_scale[3 * i + k];
                loss += lam * d * d / 3.0;
                if (grads) grads->log_scale[3 * i + k] += lam * 2.0 * d / 3.0;
            }
            for (int k = 0; k < 4; ++k) {
                const double d = cloud.rotation[4 * i + k] - cloud.anchor_rotation[4 * i + k];
                loss += lam * d * d / 4.0;
                if (grads) grads->rotation[4 * i + k] += lam * 2.0 * d / 4.0;
            }
            {
                const double d = cloud.opacity_logit[i] - cloud.anchor_opacity_logit[i];
                loss += lam * d * d;
                if (grads) grads->opacity_logit[i] += lam * 2.0 * d;
            }
            for (int k = 0; k < 3; ++k) {
                const double d = cloud.color[3 * i + k] - cloud.anchor_color[3 * i + k];
                loss += lam * d * d / 3.0;
                if (grads) grads->color[3 * i + k] += lam * 2.0 * d / 3.0;
            }
        } else {
            for (int k = 0; k < fd; ++k) {
                const double d = cloud.feature[i * fd + k] - cloud.anchor_feature[i * fd + k];
                loss += lam * d * d / double(fd);
                if (grads) grads->feature[i * fd + k] += lam * 2.0 * d / double(fd);
            }
        }
    }
    return loss;
}

namespace {

double gray_at(const ImageD& img, int y, int x) {
    if (img.channels == 1) return img.at(y, x);
    return 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) + 0.114 * img.at(y, x, 2);
}

}  // namespace

MaskImage edge_map(const ImageD& image, const GuidanceConfig& cfg) {
    if (image.empty()) throw EmptyImage("edge_map: empty image");
    (void)cfg.edge_op;  // Sobel is the only built-in operator
    const int H = image.height, W = image.width;
    ImageD mag(H, W, 1);
    double max_mag = 0.0;
#pragma omp parallel for schedule(static) reduction(max : max_mag)
    for (int y = 1; y < H - 1; ++y) {
        for (int x = 1; x < W - 1; ++x) {
            const double g00 = gray_at(image, y - 1, x - 1), g01 = gray_at(image, y - 1, x),
                         g02 = gray_at(image, y - 1, x + 1);
            const double g10 = gray_at(image, y, x - 1), g12 = gray_at(image, y, x + 1);
            const double g20 = gray_at(image, y + 1, x - 1), g21 = gray_at(image, y + 1, x),
                         g22 = gray_at(image, y + 1, x + 1);
            const double gx = (g02 + 2 * g12 + g22) - (g00 + 2 * g10 + g20);
            const double gy = (g20 + 2 * g21 + g22) - (g00 + 2 * g01 + g02);
            const double m = std::sqrt(gx * gx + gy * gy);
            mag.at(y, x) = m;
            if (m > max_mag) max_mag = m;
        }
    }
    MaskImage edges(H, W, 1, 0);
    if (max_mag <= 0.0) return edges;
    const double threshold = cfg.edge_threshold_frac * max_mag;
    for (int y = 1; y < H - 1; ++y)
        for (int x = 1; x < W - 1; ++x)
            edges.at(y, x) = mag.at(y, x) > threshold ? 1 : 0;
    return edges;
}

double texture_density(std::span<const ImageD> images,
                       const std::function<MaskImage(const ImageD&)>& edge_operator) {
    if (images.empty()) throw EmptyImage("texture_density: no images");
    double sum = 0.0;
    for (const auto& img : images) {
        if (img.empty()) throw EmptyImage("texture_density: empty image");
        const MaskImage edges = edge_operator(img);
        size_t count = 0;
        for (uint8_t e : edges.data) count += e ? 1 : 0;
        sum += double(count) / double(edges.pixel_count());
    }
    return sum / double(images.size());
}

double texture_density(std::span<const ImageD> images, const GuidanceConfig& cfg) {
    return texture_density(images, [&cfg](const ImageD& img) { return edge_map(img, cfg); });
}

double adaptive_mask_weight(double density, const GuidanceConfig& cfg) {
    return sigmoid(cfg.alpha * (density - cfg.beta));
}

double l1_image_loss(const ImageD& rendered, const ImageD& target, double weight,
                     ImageD* grad_accum) {
    require_same_shape(rendered, target, "l1_image_loss");
    const double inv = weight / double(rendered.pixel_count());
    double loss = 0.0;
    for (size_t i = 0; i < rendered.data.size(); ++i) {
        const double d = rendered.data[i] - target.data[i];
        loss += std::abs(d) * inv;
        if (grad_accum) grad_accum->data[i] += (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) * inv;
    }
    return loss;
}

double masked_image_loss(const ImageD& rendered, const ImageD& target, const MaskImage& mask,
                         double lambda_m, ImageD* grad_accum, double weight) {
    require_same_shape(rendered, target, "masked_image_loss");
    if (mask.height != rendered.height || mask.width != rendered.width)
        throw ShapeMismatch("masked_image_loss: mask shape mismatch");

    size_t inside = 0;
    for (uint8_t m : mask.data) inside += m ? 1 : 0;
    const size_t outside = mask.pixel_count() - inside;

    const double w_in = inside ? weight * lambda_m / double(inside) : 0.0;
    const double w_out = outside ? weight * (1.0 - lambda_m) / double(outside) : 0.0;

    const int C = rendered.channels;
    double loss = 0.0;
    for (int y = 0; y < rendered.height; ++y)
        for (int x = 0; x < rendered.width; ++x) {
            const double w = mask.at(y, x) ? w_in : w_out;
            if (w == 0.0) continue;
            for (int c = 0; c < C; ++c) {
                const double d = rendered.at(y, x, c) - target.at(y, x, c);
                loss += std::abs(d) * w;
                if (grad_accum)
                    grad_accum->at(y, x, c) += (d > 0 ? 1.0 : (d < 0 ? -1.0 : 0.0)) * w;
            }
        }
    return loss;
}

}  // namespace dho
