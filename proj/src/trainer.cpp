#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dho/metrics.hpp"
#include "dho/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dho {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

bool parse_bool(const std::string& v) {
    if (v == "true" || v == "1" || v == "on") return true;
    if (v == "false" || v == "0" || v == "off") return false;
    throw DataError("bad boolean config value: " + v);
}

}  // namespace

void set_train_config_kv(TrainConfig& cfg, const std::string& key, const std::string& value) {
    const auto as_int = [&] { return std::stoi(value); };
    const auto as_double = [&] { return std::stod(value); };

    if (key == "coarse_iters") cfg.coarse_iters = as_int();
    else if (key == "fine_iters") cfg.fine_iters = as_int();
    else if (key == "lambda_mask") cfg.lambda_mask = as_double();
    else if (key == "lambda_anchor") cfg.lambda_anchor = as_double();
    else if (key == "lambda_semantic") cfg.lambda_semantic = as_double();
    else if (key == "lambda_tv") cfg.lambda_tv = as_double();
    else if (key == "lr_cloud") cfg.lr_cloud = as_double();
    else if (key == "lr_cloud_final") cfg.lr_cloud_final = as_double();
    else if (key == "lr_deform_mlp") cfg.lr_deform_mlp = as_double();
    else if (key == "lr_deform_grid") cfg.lr_deform_grid = as_double();
    else if (key == "batch_size") cfg.batch_size = as_int();
    else if (key == "densify_start") cfg.densify_start = as_int();
    else if (key == "densify_interval") cfg.densify_interval = as_int();
    else if (key == "densify_until") cfg.densify_until = as_int();
    else if (key == "densify_grad_threshold") cfg.densify_grad_threshold = as_double();
    else if (key == "prune_opacity") cfg.prune_opacity = as_double();
    else if (key == "percent_dense") cfg.percent_dense = as_double();
    else if (key == "split_scale_factor") cfg.split_scale_factor = as_double();
    else if (key == "init_count") cfg.init_count = as_int();
    else if (key == "init_opacity") cfg.init_opacity = as_double();
    else if (key == "feature_dim") cfg.feature_dim = as_int();
    else if (key == "seed") cfg.seed = uint64_t(std::stoull(value));
    else if (key == "use_f64") cfg.use_f64 = parse_bool(value);
    else if (key == "enable_hgf") cfg.enable_hgf = parse_bool(value);
    else if (key == "enable_hgg") cfg.enable_hgg = parse_bool(value);
    else if (key == "anchor_base") cfg.anchor.base = as_double();
    else if (key == "anchor_growth") cfg.anchor.growth = as_double();
    else if (key == "anchor_cap") cfg.anchor.cap = as_double();
    else if (key == "guidance_alpha") cfg.guidance.alpha = as_double();
    else if (key == "guidance_beta") cfg.guidance.beta = as_double();
    else if (key == "edge_threshold_frac") cfg.guidance.edge_threshold_frac = as_double();
    else if (key == "grid_nx") cfg.deform.nx = as_int();
    else if (key == "grid_ny") cfg.deform.ny = as_int();
    else if (key == "grid_nz") cfg.deform.nz = as_int();
    else if (key == "grid_nt") cfg.deform.nt = as_int();
    else if (key == "grid_channels") cfg.deform.channels = as_int();
    else if (key == "mlp_hidden") cfg.deform.hidden = as_int();
    else if (key == "codec_hidden") cfg.codec.hidden = as_int();
    else if (key == "codec_iters") cfg.codec.iters = as_int();
    else if (key == "codec_lr") cfg.codec.lr = as_double();
    else if (key == "codec_metric") cfg.codec.metric = value == "l2" ? ReconMetric::L2 : ReconMetric::L1;
    else if (key == "eval_interval") cfg.eval_interval = as_int();
    else if (key == "log_interval") cfg.log_interval = as_int();
    else if (key == "init_mode") {
        if (value == "auto") cfg.init_mode = InitMode::Auto;
        else if (value == "random-box") cfg.init_mode = InitMode::RandomBox;
        else if (value == "scene-points") cfg.init_mode = InitMode::ScenePoints;
        else throw DataError("bad init_mode: " + value);
    } else {
        throw DataError("unknown config key: " + key);
    }
}

TrainConfig load_train_config(const std::string& path, TrainConfig base) {
    std::ifstream f(path);
    if (!f) throw DataError("cannot open config file: " + path);
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataError(path + ":" + std::to_string(lineno) + ": expected key = value");
        set_train_config_kv(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return base;
}

std::string train_config_to_string(const TrainConfig& c) {
    std::ostringstream o;
    o << "coarse_iters = " << c.coarse_iters << "\nfine_iters = " << c.fine_iters
      << "\nlambda_mask = " << c.lambda_mask << "\nlambda_anchor = " << c.lambda_anchor
      << "\nlambda_semantic = " << c.lambda_semantic << "\nlambda_tv = " << c.lambda_tv
      << "\nlr_cloud = " << c.lr_cloud << "\nlr_cloud_final = " << c.lr_cloud_final
      << "\nlr_deform_mlp = " << c.lr_deform_mlp << "\nlr_deform_grid = " << c.lr_deform_grid
      << "\nbatch_size = " << c.batch_size << "\ndensify_start = " << c.densify_start
      << "\ndensify_interval = " << c.densify_interval << "\ndensify_until = " << c.densify_until
      << "\ndensify_grad_threshold = " << c.densify_grad_threshold
      << "\nprune_opacity = " << c.prune_opacity << "\npercent_dense = " << c.percent_dense
      << "\ninit_count = " << c.init_count << "\nfeature_dim = " << c.feature_dim
      << "\nseed = " << c.seed << "\nuse_f64 = " << (c.use_f64 ? "true" : "false")
      << "\nenable_hgf = " << (c.enable_hgf ? "true" : "false")
      << "\nenable_hgg = " << (c.enable_hgg ? "true" : "false")
      << "\nanchor_base = " << c.anchor.base << "\nanchor_growth = " << c.anchor.growth
      << "\nanchor_cap = " << c.anchor.cap << "\nguidance_alpha = " << c.guidance.alpha
      << "\nguidance_beta = " << c.guidance.beta << "\n";
    return o.str();
}

void CloudMoments::init(size_t n, int fd) {
    position.resize(3 * n);
    log_scale.resize(3 * n);
    rotation.resize(4 * n);
    opacity_logit.resize(n);
    color.resize(3 * n);
    feature.resize(size_t(fd) * n);
}

namespace {

// Moment remap: out[i] keeps the moments of source[i] (or zeros for -1).
void remap(AdamMoments& m, const std::vector<int64_t>& src, int stride) {
    std::vector<double> nm(src.size() * stride, 0.0), nv(src.size() * stride, 0.0);
    for (size_t i = 0; i < src.size(); ++i) {
        if (src[i] < 0) continue;
        for (int k = 0; k < stride; ++k) {
            nm[i * stride + k] = m.m[size_t(src[i]) * stride + k];
            nv[i * stride + k] = m.v[size_t(src[i]) * stride + k];
        }
    }
    m.m.swap(nm);
    m.v.swap(nv);
}

}  // namespace

DensifyStats densify_and_prune(GaussianCloud& cloud, const std::vector<double>& mean_signal,
                               CloudMoments& moments, const DensifyConfig& cfg, Rng& rng) {
    DensifyStats stats;
    const size_t n = cloud.size();
    if (n == 0) return stats;
    if (mean_signal.size() != n) throw ShapeMismatch("densify signal size mismatch");

    const uint32_t new_round = cloud.round() + 1;
    const double size_limit = cfg.percent_dense * cfg.scene_extent;

    GaussianCloud next(cloud.feature_dim());
    std::vector<int64_t> src;  // moment source per output Gaussian, -1 = fresh

    for (size_t i = 0; i < n; ++i) {
        const Gaussian g = cloud.get(i);
        const double opacity = sigmoid(g.opacity_logit);
        if (opacity < cfg.prune_opacity) {
            ++stats.pruned;
            continue;
        }
        const Vec3d s{std::exp(g.log_scale.x), std::exp(g.log_scale.y), std::exp(g.log_scale.z)};
        const double max_scale = std::max({s.x, s.y, s.z});
        const bool hot = mean_signal[i] > cfg.grad_threshold;

        if (hot && max_scale > size_limit) {
            // Split: two children sampled from the Gaussian, scaled down.
            ++stats.split;
            const Mat3d rot = quat_to_matrix(g.rotation.normalized());
            for (int child = 0; child < 2; ++child) {
                Gaussian cg = g;
                const Vec3d local{s.x * rng.normal(), s.y * rng.normal(), s.z * rng.normal()};
                cg.position = g.position + rot * local;
                const double shrink = std::log(cfg.split_scale_factor);
                cg.log_scale = {g.log_scale.x - shrink, g.log_scale.y - shrink,
                                g.log_scale.z - shrink};
                cg.generation = new_round;
                cg.anchor.reset();
                next.push(cg);
                src.push_back(-1);
            }
        } else if (hot) {
            // Clone: keep the original, add a fresh copy.
            ++stats.cloned;
            Gaussian keep = g;
            keep.anchor.reset();
            next.push(keep);
            src.push_back(int64_t(i));
            Gaussian copy = g;
            copy.generation = new_round;
            copy.anchor.reset();
            next.push(copy);
            src.push_back(-1);
        } else {
            Gaussian keep = g;
            keep.anchor.reset();
            next.push(keep);
            src.push_back(int64_t(i));
        }
    }

    next.set_round(new_round);
    next.record_anchors();
    cloud = std::move(next);

    remap(moments.position, src, 3);
    remap(moments.log_scale, src, 3);
    remap(moments.rotation, src, 4);
    remap(moments.opacity_logit, src, 1);
    remap(moments.color, src, 3);
    remap(moments.feature, src, cloud.feature_dim());
    return stats;
}

Trainer::Trainer(const SceneDataset& dataset, const TrainConfig& cfg,
                 const FeatureCodec* pretrained_codec)
    : ds_(dataset), cfg_(cfg), cloud_(cfg.feature_dim), rng_(cfg.seed) {
    if (ds_.frames.empty()) throw DataError("dataset has no frames");
    if (ds_.train_split.empty()) throw DataError("dataset has no training frames");
    if (cfg_.densify_until < 0) cfg_.densify_until = cfg_.coarse_iters + cfg_.fine_iters / 2;

    cfg_.deform.bbox_lo = ds_.bbox_lo;
    cfg_.deform.bbox_hi = ds_.bbox_hi;
    field_ = DeformationField(cfg_.deform);
    Rng field_rng(cfg_.seed ^ 0xf1e1dull);
    field_.init_random(field_rng);  // heads stay zero: identity deformation

    // The codec is trained up front on the scene codebook, then frozen.
    if (pretrained_codec) {
        codec_ = *pretrained_codec;
        has_codec_ = true;
    } else if (!ds_.codebook.rows.empty()) {
        CodecConfig cc = cfg_.codec;
        cc.input_dim = ds_.codebook.dim;
        cc.latent_dim = cfg_.feature_dim;
        cc.seed = cfg_.seed ^ 0xc0dec0deull;
        codec_ = train_codec(ds_.codebook.rows, cc).codec;
        has_codec_ = true;
    }
    if (has_codec_) {
        if (codec_.config().latent_dim != cfg_.feature_dim)
            throw DimensionMismatch("codec latent dim does not match feature_dim");
        latent_table_.reserve(ds_.codebook.rows.size());
        for (const auto& row : ds_.codebook.rows) latent_table_.push_back(codec_.encode(row));
    }

    // Scene texture density drives the adaptive mask weight.
    {
        std::vector<ImageD> imgs;
        imgs.reserve(ds_.train_split.size());
        for (uint32_t fi : ds_.train_split) imgs.push_back(ds_.frames[fi].image);
        density_ = texture_density(imgs, cfg_.guidance);
        lambda_m_ = adaptive_mask_weight(density_, cfg_.guidance);
    }

    init_cloud();
    moments_.init(cloud_.size(), cfg_.feature_dim);
    grid_moments_.resize(field_.grid_size());
    mlp_moments_.assign(2 * size_t(field_.mlp().layer_count()), {});
    for (int l = 0; l < field_.mlp().layer_count(); ++l) {
        mlp_moments_[2 * l].resize(field_.mlp().weights(l).size());
        mlp_moments_[2 * l + 1].resize(field_.mlp().biases(l).size());
    }
    signal_accum_.assign(cloud_.size(), 0.0);
    visible_count_.assign(cloud_.size(), 0);

    anchor_record(cloud_);
    ++anchor_refreshes_;
}

void Trainer::init_cloud() {
    const bool have_points = !ds_.init_positions.empty();
    const bool use_points = cfg_.init_mode == InitMode::ScenePoints ||
                            (cfg_.init_mode == InitMode::Auto && have_points);
    if (cfg_.init_mode == InitMode::ScenePoints && !have_points)
        throw DataError("scene has no init points");

    std::vector<double> pos, col;
    if (use_points) {
        const size_t k = ds_.init_positions.size() / 3;
        const size_t take = std::min<size_t>(k, size_t(cfg_.init_count));
        for (size_t i = 0; i < take; ++i) {
            const size_t j = (i * k) / take;  // even subsample
            pos.insert(pos.end(), ds_.init_positions.begin() + 3 * j,
                       ds_.init_positions.begin() + 3 * j + 3);
            col.insert(col.end(), ds_.init_colors.begin() + 3 * j,
                       ds_.init_colors.begin() + 3 * j + 3);
        }
    } else {
        Rng init_rng(cfg_.seed ^ 0x1a17ull);
        for (int i = 0; i < cfg_.init_count; ++i) {
            pos.push_back(init_rng.uniform(ds_.bbox_lo.x, ds_.bbox_hi.x));
            pos.push_back(init_rng.uniform(ds_.bbox_lo.y, ds_.bbox_hi.y));
            pos.push_back(init_rng.uniform(ds_.bbox_lo.z, ds_.bbox_hi.z));
            col.insert(col.end(), {0.5, 0.5, 0.5});
        }
    }
    const size_t n = pos.size() / 3;

    // Isotropic scale from the mean 3-NN distance.
    std::vector<double> nn(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        double best[3] = {1e30, 1e30, 1e30};
        for (size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = pos[3 * i] - pos[3 * j], dy = pos[3 * i + 1] - pos[3 * j + 1],
                         dz = pos[3 * i + 2] - pos[3 * j + 2];
            const double d2 = dx * dx + dy * dy + dz * dz;
            if (d2 < best[0]) { best[2] = best[1]; best[1] = best[0]; best[0] = d2; }
            else if (d2 < best[1]) { best[2] = best[1]; best[1] = d2; }
            else if (d2 < best[2]) { best[2] = d2; }
        }
        nn[i] = std::sqrt((best[0] + best[1] + best[2]) / 3.0);
    }

    Rng feat_rng(cfg_.seed ^ 0xfea7ull);
    for (size_t i = 0; i < n; ++i) {
        Gaussian g;
        g.position = {pos[3 * i], pos[3 * i + 1], pos[3 * i + 2]};
        const double s = std::clamp(nn[i], 1e-4, 1.0);
        g.log_scale = {std::log(s), std::log(s), std::log(s)};
        g.rotation = {1, 0, 0, 0};
        g.opacity_logit = logit(cfg_.init_opacity);
        g.color = {std::clamp(col[3 * i], 0.0, 1.0), std::clamp(col[3 * i + 1], 0.0, 1.0),
                   std::clamp(col[3 * i + 2], 0.0, 1.0)};
        g.feature.resize(cfg_.feature_dim);
        for (auto& f : g.feature) f = feat_rng.normal(0.0, 0.1);
        g.generation = 0;
        cloud_.push(g);
    }
}

std::vector<uint32_t> Trainer::sample_batch() {
    const size_t n = ds_.train_split.size();
    std::vector<uint32_t> batch;
    const int b = std::max(1, cfg_.batch_size);
    for (int k = 0; k < b; ++k)
        batch.push_back(ds_.train_split[rng_.uniform_index(n)]);
    return batch;
}

ImageD Trainer::render_frame(const Frame& frame) const {
    RenderOptions opts;
    opts.f64 = cfg_.use_f64;
    const DeformedState state = gate_.stage() == StageGate::Stage::Fine
                                    ? deform(field_, cloud_, frame.timestamp)
                                    : canonical_state(cloud_);
    return render(cloud_, state, frame.camera, opts).color;
}

LossBreakdown Trainer::compute_loss(const std::vector<uint32_t>& batch, CloudGrads* cg,
                                    FieldGrads* fg) {
    LossBreakdown out;
    const bool fine = gate_.stage() == StageGate::Stage::Fine;
    const double inv_batch = 1.0 / double(batch.size());
    RenderOptions opts;
    opts.f64 = cfg_.use_f64;

    for (uint32_t fi : batch) {
        const Frame& frame = ds_.frames[fi];
        DeformationField::Cache cache;
        const DeformedState state =
            fine ? deform(field_, cloud_, frame.timestamp, &cache) : canonical_state(cloud_);
        const RenderOutput rendered = render(cloud_, state, frame.camera, opts);

        RenderUpstream up;
        up.d_color = ImageD(frame.camera.height, frame.camera.width, 3);

        if (fine && cfg_.enable_hgg) {
            out.photometric += masked_image_loss(rendered.color, frame.image, frame.mask,
                                                 lambda_m_, &up.d_color,
                                                 cfg_.lambda_mask * inv_batch);
        } else {
            out.photometric += l1_image_loss(rendered.color, frame.image,
                                             cfg_.lambda_mask * inv_batch, &up.d_color);
        }

        if (fine && has_codec_) {
            up.d_feature = ImageD(frame.camera.height, frame.camera.width, cfg_.feature_dim);
            for (int s = 0; s < 3; ++s) {
                ImageD target(frame.camera.height, frame.camera.width, cfg_.feature_dim);
                const ClassImage& cm = frame.classes[s];
                for (int y = 0; y < target.height; ++y)
                    for (int x = 0; x < target.width; ++x) {
                        const auto& latent = latent_table_[cm.at(y, x)];
                        for (int c = 0; c < cfg_.feature_dim; ++c)
                            target.at(y, x, c) = latent[c];
                    }
                out.semantic += l1_image_loss(rendered.feature, target,
                                              cfg_.lambda_semantic * inv_batch, &up.d_feature);
            }
        }

        if (cg) {
            const RenderGradients rg = render_backward(cloud_, state, frame.camera, up, opts);
            const size_t n = cloud_.size();
            for (size_t i = 0; i < 3 * n; ++i) {
                cg->position[i] += rg.d_position[i];
                cg->log_scale[i] += rg.d_log_scale[i];
                cg->color[i] += rg.d_color[i];
            }
            for (size_t i = 0; i < 4 * n; ++i) cg->rotation[i] += rg.d_rotation[i];
            for (size_t i = 0; i < n; ++i) cg->opacity_logit[i] += rg.d_opacity_logit[i];
            for (size_t i = 0; i < rg.d_feature.size(); ++i) cg->feature[i] += rg.d_feature[i];
            for (size_t i = 0; i < n; ++i) {
                signal_accum_[i] += rg.densify_signal[i];
                visible_count_[i] += rg.visible[i];
            }
            if (fine && fg) {
                const std::vector<double> extra = deform_backward(field_, cloud_, cache, rg, *fg);
                for (size_t i = 0; i < extra.size(); ++i) cg->position[i] += extra[i];
            }
        }
    }

    if (cfg_.enable_hgf)
        out.anchor = anchor_loss(cloud_, gate_, cfg_.anchor, cg, cfg_.lambda_anchor);

    if (fine && cfg_.lambda_tv > 0) {
        out.tv = cfg_.lambda_tv * tv_loss(field_);
        if (fg) tv_loss_backward(field_, cfg_.lambda_tv, fg->grid);
    }

    out.total = out.photometric + out.anchor + out.semantic + out.tv;
    return out;
}

double Trainer::current_lr() const {
    if (gate_.stage() == StageGate::Stage::Coarse || cfg_.fine_iters <= 0) return cfg_.lr_cloud;
    const double frac =
        std::clamp(double(iteration_ - cfg_.coarse_iters) / double(cfg_.fine_iters), 0.0, 1.0);
    return cfg_.lr_cloud * std::pow(cfg_.lr_cloud_final / cfg_.lr_cloud, frac);
}

void Trainer::apply_gradients(const CloudGrads& cg, const FieldGrads& fg) {
    const double lr = current_lr();
    adam_step(cloud_.position, cg.position, moments_.position, lr);
    adam_step(cloud_.log_scale, cg.log_scale, moments_.log_scale, lr);
    adam_step(cloud_.rotation, cg.rotation, moments_.rotation, lr);
    adam_step(cloud_.opacity_logit, cg.opacity_logit, moments_.opacity_logit, lr);
    adam_step(cloud_.color, cg.color, moments_.color, lr);
    adam_step(cloud_.feature, cg.feature, moments_.feature, lr);

    if (gate_.stage() == StageGate::Stage::Fine) {
        adam_step(field_.grid(), fg.grid, grid_moments_, cfg_.lr_deform_grid);
        for (int l = 0; l < field_.mlp().layer_count(); ++l) {
            adam_step(field_.mlp().weights(l), fg.mlp.weights[l], mlp_moments_[2 * l],
                      cfg_.lr_deform_mlp);
            adam_step(field_.mlp().biases(l), fg.mlp.biases[l], mlp_moments_[2 * l + 1],
                      cfg_.lr_deform_mlp);
        }
    }

    cloud_.renormalize_rotations();
    for (auto& c : cloud_.color) c = std::clamp(c, 0.0, 1.0);
}

void Trainer::maybe_switch_stage() {
    if (gate_.stage() == StageGate::Stage::Coarse && iteration_ > cfg_.coarse_iters) {
        gate_.advance_to_fine();
        // Fresh anchors when the fine stage starts constraining features.
        anchor_record(cloud_);
        ++anchor_refreshes_;
    }
}

void Trainer::maybe_densify() {
    if (iteration_ < cfg_.densify_start || iteration_ > cfg_.densify_until) return;
    if (cfg_.densify_interval <= 0 || iteration_ % cfg_.densify_interval != 0) return;

    std::vector<double> mean_signal(cloud_.size(), 0.0);
    for (size_t i = 0; i < cloud_.size(); ++i)
        if (visible_count_[i] > 0) mean_signal[i] = signal_accum_[i] / double(visible_count_[i]);

    DensifyConfig dc;
    dc.grad_threshold = cfg_.densify_grad_threshold;
    dc.prune_opacity = cfg_.prune_opacity;
    dc.percent_dense = cfg_.percent_dense;
    dc.split_scale_factor = cfg_.split_scale_factor;
    dc.scene_extent = 0.5 * (ds_.bbox_hi - ds_.bbox_lo).norm();

    densify_and_prune(cloud_, mean_signal, moments_, dc, rng_);
    ++anchor_refreshes_;

    signal_accum_.assign(cloud_.size(), 0.0);
    visible_count_.assign(cloud_.size(), 0);
}

MetricsRecord Trainer::step() {
    ++iteration_;
    maybe_switch_stage();

    const std::vector<uint32_t> batch = sample_batch();
    CloudGrads cg;
    cg.resize(cloud_.size(), cfg_.feature_dim);
    FieldGrads fg;
    fg.init_like(field_);

    MetricsRecord rec;
    rec.loss = compute_loss(batch, &cg, &fg);
    rec.iteration = iteration_;
    rec.stage = gate_.stage() == StageGate::Stage::Fine ? 1 : 0;
    rec.lr = current_lr();

    apply_gradients(cg, fg);
    maybe_densify();
    rec.gaussians = cloud_.size();
    return rec;
}

EvalReport Trainer::evaluate_heldout(bool full) const {
    EvalReport report;
    if (ds_.heldout_split.empty()) return report;
    std::vector<uint32_t> subset;
    if (full || ds_.heldout_split.size() <= 12) {
        subset.assign(ds_.heldout_split.begin(), ds_.heldout_split.end());
    } else {
        const size_t step = ds_.heldout_split.size() / 12;
        for (size_t i = 0; i < ds_.heldout_split.size(); i += step) subset.push_back(ds_.heldout_split[i]);
    }
    double sum = 0.0, mn = 1e30;
    for (uint32_t fi : subset) {
        const Frame& frame = ds_.frames[fi];
        const double p = psnr(render_frame(frame), frame.image);
        report.per_frame_psnr.push_back(p);
        sum += p;
        mn = std::min(mn, p);
    }
    report.mean_psnr = sum / double(subset.size());
    report.min_psnr = mn;
    return report;
}

Checkpoint Trainer::make_checkpoint() const {
    Checkpoint ckpt;
    ckpt.cloud = cloud_;
    ckpt.field = field_;
    ckpt.has_field = true;
    ckpt.codec = codec_;
    ckpt.has_codec = has_codec_;
    return ckpt;
}

TrainResult train(const SceneDataset& dataset, const TrainConfig& cfg, const std::string& out_dir,
                  const FeatureCodec* pretrained_codec) {
    fs::create_directories(out_dir);
    Trainer trainer(dataset, cfg, pretrained_codec);

    std::ofstream metrics_file(fs::path(out_dir) / "metrics.jsonl");
    if (!metrics_file) throw DataError("cannot write metrics log in " + out_dir);

    TrainResult result;
    result.texture_density = trainer.scene_density();
    result.lambda_m = trainer.lambda_m();

    const int total = cfg.coarse_iters + cfg.fine_iters;
    for (int it = 1; it <= total; ++it) {
        MetricsRecord rec = trainer.step();
        const bool eval_now = cfg.eval_interval > 0 && it % cfg.eval_interval == 0;
        if (eval_now) rec.heldout_psnr = trainer.evaluate_heldout(false).mean_psnr;
        if (it % std::max(1, cfg.log_interval) == 0 || eval_now || it == total) {
            json j{{"iteration", rec.iteration}, {"stage", rec.stage},
                   {"total", rec.loss.total},   {"photometric", rec.loss.photometric},
                   {"anchor", rec.loss.anchor}, {"semantic", rec.loss.semantic},
                   {"tv", rec.loss.tv},         {"lr", rec.lr},
                   {"gaussians", rec.gaussians}};
            if (rec.heldout_psnr >= 0) j["heldout_psnr"] = rec.heldout_psnr;
            metrics_file << j.dump() << "\n";
        }
        result.metrics.push_back(rec);
    }

    result.checkpoint = trainer.make_checkpoint();
    result.checkpoint_path = (fs::path(out_dir) / "checkpoint.bin").string();
    save_checkpoint(result.checkpoint_path, result.checkpoint);

    result.final_eval = trainer.evaluate_heldout(true);
    json fe{{"mean_psnr", result.final_eval.mean_psnr},
            {"min_psnr", result.final_eval.min_psnr},
            {"per_frame_psnr", result.final_eval.per_frame_psnr},
            {"texture_density", result.texture_density},
            {"lambda_m", result.lambda_m}};
    std::ofstream fef(fs::path(out_dir) / "final_eval.json");
    fef << fe.dump(1) << "\n";
    return result;
}

}  // namespace dho
