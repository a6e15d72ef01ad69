#pragma once

#include <string>
#include <vector>

#include "dho/adam.hpp"
#include "dho/checkpoint.hpp"
#include "dho/losses.hpp"
#include "dho/rasterize.hpp"
#include "dho/scene.hpp"

namespace dho {

enum class InitMode { Auto, RandomBox, ScenePoints };

struct TrainConfig {
    int coarse_iters = 5000;
    int fine_iters = 15000;

    // Total-loss weights: masked photometric, anchor, semantic, grid TV.
    double lambda_mask = 1.0;
    double lambda_anchor = 1.0;
    double lambda_semantic = 0.1;
    double lambda_tv = 1.0;

    double lr_cloud = 1.6e-3;
    double lr_cloud_final = 1.6e-4;  // exponential decay across the fine stage
    double lr_deform_mlp = 1.6e-3;
    double lr_deform_grid = 1.6e-2;

    int batch_size = 2;

    int densify_start = 500;
    int densify_interval = 500;
    int densify_until = -1;  // default: coarse_iters + fine_iters / 2
    double densify_grad_threshold = 4e-3;  // normalized pixel units, ~p95 at 64x64
    double prune_opacity = 0.005;
    double percent_dense = 0.01;
    double split_scale_factor = 1.6;

    int init_count = 2000;
    InitMode init_mode = InitMode::Auto;
    double init_opacity = 0.1;
    int feature_dim = 8;

    uint64_t seed = 0;
    bool use_f64 = false;
    bool enable_hgf = true;  // anchor constraints + generation tagging
    bool enable_hgg = true;  // adaptive masked guidance in the fine stage

    AnchorConfig anchor;
    GuidanceConfig guidance;
    DeformConfig deform;
    CodecConfig codec;

    int eval_interval = 1000;
    int log_interval = 25;
};

// Flat key=value config file mirroring the TrainConfig field names. Flags win
// over file values; unknown keys are rejected.
TrainConfig load_train_config(const std::string& path, TrainConfig base = {});
void set_train_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value);
std::string train_config_to_string(const TrainConfig& cfg);

struct CloudMoments {
    AdamMoments position, log_scale, rotation, opacity_logit, color, feature;
    void init(size_t n, int feature_dim);
};

struct DensifyConfig {
    double grad_threshold = 2e-4;
    double prune_opacity = 0.005;
    double percent_dense = 0.01;
    double split_scale_factor = 1.6;
    double scene_extent = 4.0;
};

struct DensifyStats {
    size_t cloned = 0, split = 0, pruned = 0;
};

// Clone/split Gaussians whose mean positional gradient exceeds the threshold,
// prune near-transparent ones, advance the densification round, tag newcomers
// with it, refresh every anchor, and keep the optimizer moments index-aligned
// (newcomers start with zero moments).
DensifyStats densify_and_prune(GaussianCloud& cloud, const std::vector<double>& mean_signal,
                               CloudMoments& moments, const DensifyConfig& cfg, Rng& rng);

struct LossBreakdown {
    double total = 0, photometric = 0, anchor = 0, semantic = 0, tv = 0;
};

struct MetricsRecord {
    int iteration = 0;
    int stage = 0;  // 0 coarse, 1 fine
    LossBreakdown loss;
    double lr = 0;
    size_t gaussians = 0;
    double heldout_psnr = -1;  // only on eval iterations
};

struct EvalReport {
    double mean_psnr = 0;
    double min_psnr = 0;
    std::vector<double> per_frame_psnr;
};

struct TrainResult {
    Checkpoint checkpoint;
    EvalReport final_eval;
    std::vector<MetricsRecord> metrics;
    double texture_density = 0;
    double lambda_m = 0;
    std::string checkpoint_path;
};

class Trainer {
public:
    Trainer(const SceneDataset& dataset, const TrainConfig& cfg,
            const FeatureCodec* pretrained_codec = nullptr);

    // One optimization step (stage switches and densification included).
    MetricsRecord step();

    int iteration() const { return iteration_; }
    const StageGate& gate() const { return gate_; }
    const GaussianCloud& cloud() const { return cloud_; }
    const DeformationField& field() const { return field_; }
    const FeatureCodec& codec() const { return codec_; }
    double lambda_m() const { return lambda_m_; }
    double scene_density() const { return density_; }
    uint64_t anchor_refreshes() const { return anchor_refreshes_; }

    LossBreakdown compute_loss(const std::vector<uint32_t>& batch, CloudGrads* cloud_grads,
                               FieldGrads* field_grads);

    EvalReport evaluate_heldout(bool full) const;
    ImageD render_frame(const Frame& frame) const;

    Checkpoint make_checkpoint() const;
    double current_lr() const;

private:
    void init_cloud();
    void maybe_switch_stage();
    void maybe_densify();
    std::vector<uint32_t> sample_batch();
    void apply_gradients(const CloudGrads& cg, const FieldGrads& fg);

    const SceneDataset& ds_;
    TrainConfig cfg_;
    GaussianCloud cloud_;
    DeformationField field_;
    FeatureCodec codec_;
    bool has_codec_ = false;
    std::vector<std::vector<double>> latent_table_;  // codebook row -> latent

    CloudMoments moments_;
    AdamMoments grid_moments_;
    std::vector<AdamMoments> mlp_moments_;

    Rng rng_;
    StageGate gate_;
    int iteration_ = 0;
    double density_ = 0;
    double lambda_m_ = 0.5;

    std::vector<double> signal_accum_;
    std::vector<uint32_t> visible_count_;
    uint64_t anchor_refreshes_ = 0;
};

// Full run: trains the codec (unless provided), runs both stages, writes
// checkpoint.bin, metrics.jsonl and final_eval.json under out_dir.
TrainResult train(const SceneDataset& dataset, const TrainConfig& cfg,
                  const std::string& out_dir, const FeatureCodec* pretrained_codec = nullptr);

}  // namespace dho
