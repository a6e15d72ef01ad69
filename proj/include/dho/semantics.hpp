#pragma once

#include <span>
#include <string>
#include <vector>

#include "dho/checkpoint.hpp"
#include "dho/image.hpp"
#include "dho/scene.hpp"

namespace dho {

// Query-side embeddings: one query vector per scale level (empty when the
// prompt does not exist at that scale) plus the canonical reference set. All
// embeddings are L2-normalized at construction.
struct QueryContext {
    std::vector<std::vector<double>> query_per_scale;  // indexed by Scale
    std::vector<std::vector<double>> canonicals;
    double threshold = 0.6;
};

QueryContext make_query_context(const Codebook& book, const std::string& prompt,
                                double threshold = 0.6);

// Min-over-canonicals two-way softmax between an embedding and the query.
double relevance(std::span<const double> embedding, std::span<const double> query,
                 const std::vector<std::vector<double>>& canonicals);

struct RelevanceMap {
    ImageD map;             // HxW in (0,1)
    Img<uint8_t> scale;     // chosen scale level per pixel
};

// Renders the feature image at (cam, t), decodes each pixel back to the
// embedding space, scores it per scale and keeps the best scale.
RelevanceMap relevance_map(const Checkpoint& ckpt, const Camera& cam, double t,
                           const QueryContext& ctx);

MaskImage segment(const ImageD& relevance_image, double threshold);

// Gaussians whose feature cosine similarity against the prompt latent reaches
// the threshold. Zero-norm features score 0.
std::vector<uint32_t> select_gaussians(const GaussianCloud& cloud,
                                       std::span<const double> prompt_latent, double threshold);

// Deletes the selected Gaussians.
Checkpoint edit_remove(const Checkpoint& ckpt, const std::vector<uint32_t>& selection);

struct RecolorObjective {
    ImageD target;
    Camera camera;
    double timestamp = 0.0;
    int iters = 200;
    double lr = 0.01;
};

// Optimizes only the selected Gaussians' colors against the photometric
// objective; geometry and every unselected Gaussian stay bit-identical.
Checkpoint edit_recolor(const Checkpoint& ckpt, const std::vector<uint32_t>& selection,
                        const RecolorObjective& objective);

struct TopkDeformation {
    std::vector<uint32_t> indices;  // k Gaussians with the largest offsets
    std::vector<double> norms;
    RenderOutput rendered;          // the selected sub-cloud at time t
};

TopkDeformation topk_deformation(const Checkpoint& ckpt, const Camera& cam, double t, size_t k,
                                 bool position_only = false);

// Ground-truth mask for a prompt, from the class map at the prompt's coarsest
// available scale.
MaskImage prompt_gt_mask(const Frame& frame, const Codebook& book, const std::string& prompt);

// Mean IoU of relevance-query segmentation against the prompt's ground truth
// over the given frames.
double segmentation_miou(const Checkpoint& ckpt, const SceneDataset& ds, const std::string& prompt,
                         double threshold, std::span<const uint32_t> frames);

enum class MaskSourceKind { GroundTruth, RelevanceQuery };

// Dynamic-foreground mask, either straight from the dataset frame or by
// thresholding the relevance map of a trained checkpoint.
MaskImage foreground_mask(const Frame& frame, MaskSourceKind kind,
                          const Checkpoint* ckpt = nullptr, const QueryContext* ctx = nullptr);

}  // namespace dho
