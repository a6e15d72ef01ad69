#include <algorithm>
#include <cmath>
#include <numeric>

#include "dho/adam.hpp"
#include "dho/losses.hpp"
#include "dho/metrics.hpp"
#include "dho/rasterize.hpp"
#include "dho/semantics.hpp"

namespace dho {

namespace {

void l2_normalize(std::vector<double>& v) {
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0)
        for (double& x : v) x /= n;
}

}  // namespace

QueryContext make_query_context(const Codebook& book, const std::string& prompt,
                                double threshold) {
    QueryContext ctx;
    ctx.threshold = threshold;
    ctx.query_per_scale.resize(3);
    bool found = false;
    for (size_t i = 0; i < book.entries.size(); ++i) {
        if (book.entries[i].name != prompt) continue;
        const int scale = book.entries[i].scale;
        std::vector<double> row = book.rows[i];
        l2_normalize(row);
        if (scale < 0) {
            for (auto& q : ctx.query_per_scale) q = row;
        } else {
            ctx.query_per_scale[size_t(scale)] = row;
        }
        found = true;
    }
    if (!found) throw DataError("prompt not present in codebook: " + prompt);
    for (int c = 0; c < Codebook::kCanonicalCount; ++c) {
        std::vector<double> row = book.rows[size_t(c)];
        l2_normalize(row);
        ctx.canonicals.push_back(std::move(row));
    }
    return ctx;
}

double relevance(std::span<const double> embedding, std::span<const double> query,
                 const std::vector<std::vector<double>>& canonicals) {
    if (embedding.size() != query.size()) throw DimensionMismatch("relevance: dimension mismatch");
    double eq = 0;
    for (size_t i = 0; i < embedding.size(); ++i) eq += embedding[i] * query[i];
    double best = 1.0;
    for (const auto& canon : canonicals) {
        if (canon.size() != embedding.size())
            throw DimensionMismatch("relevance: canonical dimension mismatch");
        double ec = 0;
        for (size_t i = 0; i < embedding.size(); ++i) ec += embedding[i] * canon[i];
        // exp(eq) / (exp(eq) + exp(ec)) in a stable form
        best = std::min(best, sigmoid(eq - ec));
    }
    return best;
}

RelevanceMap relevance_map(const Checkpoint& ckpt, const Camera& cam, double t,
                           const QueryContext& ctx) {
    if (!ckpt.has_codec) throw DataError("relevance_map needs a trained codec");
    RenderOptions opts;
    const DeformedState state =
        ckpt.has_field ? deform(ckpt.field, ckpt.cloud, t) : canonical_state(ckpt.cloud);
    const RenderOutput out = render(ckpt.cloud, state, cam, opts);

    const int H = cam.height, W = cam.width;
    const size_t pixels = size_t(H) * W;

    const std::vector<double> decoded = ckpt.codec.decode_batch(out.feature.data.data(), pixels);
    const int dhi = ckpt.codec.config().input_dim;

    RelevanceMap rm;
    rm.map = ImageD(H, W, 1);
    rm.scale = Img<uint8_t>(H, W, 1, 0);
    for (size_t p = 0; p < pixels; ++p) {
        const std::span<const double> emb(&decoded[p * dhi], size_t(dhi));
        double best = -1;
        uint8_t best_scale = 0;
        for (int s = 0; s < 3; ++s) {
            if (ctx.query_per_scale[size_t(s)].empty()) continue;
            const double r = relevance(emb, ctx.query_per_scale[size_t(s)], ctx.canonicals);
            if (r > best) {
                best = r;
                best_scale = uint8_t(s);
            }
        }
        if (best < 0) throw DataError("query context has no scale embeddings");
        rm.map.data[p] = best;
        rm.scale.data[p] = best_scale;
    }
    return rm;
}

MaskImage segment(const ImageD& relevance_image, double threshold) {
    MaskImage mask(relevance_image.height, relevance_image.width, 1, 0);
    for (size_t i = 0; i < relevance_image.data.size(); ++i)
        mask.data[i] = relevance_image.data[i] >= threshold ? 1 : 0;
    return mask;
}

std::vector<uint32_t> select_gaussians(const GaussianCloud& cloud,
                                       std::span<const double> prompt_latent, double threshold) {
    if (int(prompt_latent.size()) != cloud.feature_dim())
        throw DimensionMismatch("select_gaussians: latent dimension mismatch");
    double pn = 0;
    for (double v : prompt_latent) pn += v * v;
    pn = std::sqrt(pn);
    if (pn <= 0) throw ZeroPrompt("select_gaussians: zero prompt latent");

    const int fd = cloud.feature_dim();
    std::vector<uint32_t> out;
    for (size_t i = 0; i < cloud.size(); ++i) {
        double dot = 0, fn = 0;
        for (int k = 0; k < fd; ++k) {
            const double f = cloud.feature[i * fd + k];
            dot += f * prompt_latent[k];
            fn += f * f;
        }
        fn = std::sqrt(fn);
        const double cosine = fn > 0 ? dot / (fn * pn) : 0.0;
        if (cosine >= threshold) out.push_back(uint32_t(i));
    }
    return out;
}

Checkpoint edit_remove(const Checkpoint& ckpt, const std::vector<uint32_t>& selection) {
    Checkpoint out = ckpt;
    if (selection.empty()) return out;
    std::vector<uint8_t> remove(out.cloud.size(), 0);
    for (uint32_t idx : selection) {
        if (idx >= out.cloud.size()) throw DataError("edit_remove: selection index out of range");
        remove[idx] = 1;
    }
    out.cloud.compact(remove);
    return out;
}

Checkpoint edit_recolor(const Checkpoint& ckpt, const std::vector<uint32_t>& selection,
                        const RecolorObjective& objective) {
    if (selection.empty()) throw EmptySelection("edit_recolor: empty selection");
    Checkpoint out = ckpt;
    GaussianCloud& cloud = out.cloud;
    std::vector<uint8_t> selected(cloud.size(), 0);
    for (uint32_t idx : selection) {
        if (idx >= cloud.size()) throw DataError("edit_recolor: selection index out of range");
        selected[idx] = 1;
    }

    const DeformedState state = out.has_field
                                    ? deform(out.field, cloud, objective.timestamp)
                                    : canonical_state(cloud);
    RenderOptions opts;
    AdamMoments moments;
    moments.resize(cloud.color.size());

    for (int it = 0; it < objective.iters; ++it) {
        const RenderOutput rendered = render(cloud, state, objective.camera, opts);
        RenderUpstream up;
        up.d_color = ImageD(objective.camera.height, objective.camera.width, 3);
        l1_image_loss(rendered.color, objective.target, 1.0, &up.d_color);
        const RenderGradients rg = render_backward(cloud, state, objective.camera, up, opts);

        std::vector<double> grads(cloud.color.size(), 0.0);
        for (size_t i = 0; i < cloud.size(); ++i)
            if (selected[i])
                for (int k = 0; k < 3; ++k) grads[3 * i + k] = rg.d_color[3 * i + k];
        adam_step(cloud.color, grads, moments, objective.lr);
        for (size_t i = 0; i < cloud.size(); ++i)
            if (selected[i])
                for (int k = 0; k < 3; ++k)
                    cloud.color[3 * i + k] = std::clamp(cloud.color[3 * i + k], 0.0, 1.0);
    }
    return out;
}

TopkDeformation topk_deformation(const Checkpoint& ckpt, const Camera& cam, double t, size_t k,
                                 bool position_only) {
    if (!ckpt.has_field) throw DataError("topk_deformation needs a deformation field");
    if (k > ckpt.cloud.size()) throw DataError("topk_deformation: k exceeds cloud size");

    const std::vector<double> offsets = deform_offsets(ckpt.field, ckpt.cloud, t);
    const size_t n = ckpt.cloud.size();
    std::vector<double> norms(n, 0.0);
    for (size_t i = 0; i < n; ++i) {
        double s = 0;
        const int dims = position_only ? 3 : 10;
        for (int d = 0; d < dims; ++d) s += offsets[i * 10 + d] * offsets[i * 10 + d];
        norms[i] = std::sqrt(s);
    }

    std::vector<uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
        if (norms[a] != norms[b]) return norms[a] > norms[b];
        return a < b;
    });
    order.resize(k);

    TopkDeformation out;
    out.indices = order;
    for (uint32_t idx : order) out.norms.push_back(norms[idx]);

    GaussianCloud sub(ckpt.cloud.feature_dim());
    for (uint32_t idx : order) sub.push(ckpt.cloud.get(idx));
    const DeformedState state = deform(ckpt.field, sub, t);
    out.rendered = render(sub, state, cam, RenderOptions{});
    return out;
}

MaskImage prompt_gt_mask(const Frame& frame, const Codebook& book, const std::string& prompt) {
    const std::vector<uint16_t> rows = book.find(prompt);
    if (rows.empty()) throw DataError("prompt not present in codebook: " + prompt);
    // Prefer the coarsest scale the prompt exists at.
    uint16_t row = rows.front();
    int best_scale = book.entries[row].scale;
    for (uint16_t r : rows)
        if (book.entries[r].scale > best_scale) {
            best_scale = book.entries[r].scale;
            row = r;
        }
    const int scale = std::max(0, best_scale);
    MaskImage gt(frame.classes[scale].height, frame.classes[scale].width, 1, 0);
    for (size_t i = 0; i < gt.data.size(); ++i)
        gt.data[i] = frame.classes[scale].data[i] == row ? 1 : 0;
    return gt;
}

double segmentation_miou(const Checkpoint& ckpt, const SceneDataset& ds, const std::string& prompt,
                         double threshold, std::span<const uint32_t> frames) {
    if (frames.empty()) throw EmptyList("segmentation_miou: no frames");
    const QueryContext ctx = make_query_context(ds.codebook, prompt, threshold);
    double sum = 0;
    for (uint32_t fi : frames) {
        const Frame& frame = ds.frames[fi];
        const RelevanceMap rm = relevance_map(ckpt, frame.camera, frame.timestamp, ctx);
        sum += iou(segment(rm.map, threshold), prompt_gt_mask(frame, ds.codebook, prompt));
    }
    return sum / double(frames.size());
}

MaskImage foreground_mask(const Frame& frame, MaskSourceKind kind, const Checkpoint* ckpt,
                          const QueryContext* ctx) {
    if (kind == MaskSourceKind::GroundTruth) {
        if (frame.mask.empty()) throw MaskUnavailable("frame has no ground-truth mask");
        return frame.mask;
    }
    if (!ckpt || !ctx) throw MaskUnavailable("relevance-query mask needs a checkpoint and context");
    const RelevanceMap rm = relevance_map(*ckpt, frame.camera, frame.timestamp, *ctx);
    return segment(rm.map, ctx->threshold);
}

}  // namespace dho
