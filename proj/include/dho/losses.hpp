#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dho/gaussian.hpp"
#include "dho/image.hpp"

namespace dho {

// Two-phase training gate. Coarse constrains geometry, Fine constrains
// semantic features; the transition happens once.
class StageGate {
public:
    enum class Stage { Coarse, Fine };

    Stage stage() const { return stage_; }
    double theta_coarse() const { return stage_ == Stage::Coarse ? 1.0 : 0.0; }
    double theta_fine() const { return stage_ == Stage::Fine ? 1.0 : 0.0; }

    void advance_to_fine() {
        if (stage_ == Stage::Fine) throw DataError("stage gate already advanced");
        stage_ = Stage::Fine;
    }

private:
    Stage stage_ = Stage::Coarse;
};

struct AnchorConfig {
    // Scaled so the anchor pull stays below the per-Gaussian photometric
    // gradient until a parameter has drifted O(1) from its anchor: the anchor
    // damps unsupervised drift instead of freezing optimization.
    double base = 1e-4;  // strength at age 0
    double growth = 1.5; // per-age multiplier, > 1
    double cap = 1e-3;   // maximum per-Gaussian strength
};

// Per-Gaussian anchor strength; older generations are constrained harder.
inline double anchor_strength(const AnchorConfig& cfg, uint32_t age) {
    double s = cfg.base;
    for (uint32_t i = 0; i < age && s < cfg.cap; ++i) s *= cfg.growth;
    return s < cfg.cap ? s : cfg.cap;
}

struct CloudGrads {
    std::vector<double> position, log_scale, rotation, opacity_logit, color, feature;

    void resize(size_t n, int feature_dim);
    void clear();
};

// Snapshots every Gaussian's live attributes as its anchor. Idempotent.
void anchor_record(GaussianCloud& cloud);

// Stage-gated anchor penalty: per-property mean squared deviation from the
// anchor, scaled by the generation-dependent strength and summed over the
// cloud. Coarse covers the geometric properties, Fine covers the feature
// vector. Gradients flow to live attributes only.
double anchor_loss(const GaussianCloud& cloud, const StageGate& gate, const AnchorConfig& cfg,
                   CloudGrads* grads = nullptr, double weight = 1.0);

enum class EdgeOperator { Sobel };

struct GuidanceConfig {
    double alpha = 10.0;  // sigmoid sharpness
    double beta = 0.01;   // density offset
    EdgeOperator edge_op = EdgeOperator::Sobel;
    double edge_threshold_frac = 0.25;  // fraction of the max gradient magnitude
};

// Binary edge map of one image under the configured operator. Border pixels
// are never edges.
MaskImage edge_map(const ImageD& image, const GuidanceConfig& cfg);

// Mean fraction of edge pixels across the images.
double texture_density(std::span<const ImageD> images, const GuidanceConfig& cfg);
double texture_density(std::span<const ImageD> images,
                       const std::function<MaskImage(const ImageD&)>& edge_operator);

// Adaptive mask weight: sigmoid(alpha * (density - beta)).
double adaptive_mask_weight(double density, const GuidanceConfig& cfg);

// Mean-per-pixel L1 (channels summed), scaled by `weight`. Accumulates
// gradients into `grad_accum` when given.
double l1_image_loss(const ImageD& rendered, const ImageD& target, double weight,
                     ImageD* grad_accum = nullptr);

// Region-weighted photometric loss: L1 mean over mask pixels weighted by
// lambda_m plus L1 mean over the complement weighted by (1 - lambda_m). An
// empty region contributes zero.
double masked_image_loss(const ImageD& rendered, const ImageD& target, const MaskImage& mask,
                         double lambda_m, ImageD* grad_accum = nullptr, double weight = 1.0);

}  // namespace dho
