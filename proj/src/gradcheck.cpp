#include <cmath>
#include <functional>
#include <sstream>

#include "dho/codec.hpp"
#include "dho/gradcheck.hpp"
#include "dho/losses.hpp"
#include "dho/rasterize.hpp"

namespace dho {

namespace {

constexpr double kRelFloor = 1e-3;

struct CheckScene {
    GaussianCloud cloud{4};
    DeformationField field;
    Camera cam;
    double t = 0.6;
    ImageD target_color, target_feature, target_alpha;
    RenderOptions opts;
};

bool near_cell_boundary(const DeformationField& field, const Vec3d& p) {
    const auto& cfg = field.config();
    const double lo[3] = {cfg.bbox_lo.x, cfg.bbox_lo.y, cfg.bbox_lo.z};
    const double hi[3] = {cfg.bbox_hi.x, cfg.bbox_hi.y, cfg.bbox_hi.z};
    const int n[3] = {cfg.nx, cfg.ny, cfg.nz};
    for (int a = 0; a < 3; ++a) {
        if (n[a] <= 1) continue;
        const double g = (p[a] - lo[a]) / (hi[a] - lo[a]) * double(n[a] - 1);
        const double frac = g - std::floor(g);
        if (std::min(frac, 1.0 - frac) < 1e-3) return true;
    }
    return false;
}

CheckScene make_scene(const GradCheckConfig& cfg) {
    Rng rng(cfg.seed * 0x9e3779b9u + 17);
    CheckScene s;
    s.cloud = GaussianCloud(cfg.feature_dim);

    const int size = cfg.image_size;
    s.cam = make_lookat_camera({0.25, 0.35, 4.0}, {0, 0, 0}, size * 1.3, size, size, 0.6);
    s.t = 0.35 + 0.5 * rng.uniform();

    DeformConfig dc;
    dc.nx = dc.ny = dc.nz = 3;
    dc.nt = 2;
    dc.channels = 4;
    dc.hidden = 16;
    dc.bbox_lo = {-1.5, -1.5, -1.5};
    dc.bbox_hi = {1.5, 1.5, 1.5};
    s.field = DeformationField(dc);
    // Randomize every layer (including the output heads): a zero-initialized
    // field would zero out the grid and hidden-layer gradients.
    for (auto& v : s.field.grid()) v = rng.normal(0.0, 0.3);
    for (int l = 0; l < s.field.mlp().layer_count(); ++l) {
        const double scale = l + 1 == s.field.mlp().layer_count() ? 0.05 : 0.5;
        for (auto& w : s.field.mlp().weights(l)) w = rng.normal(0.0, scale);
        for (auto& b : s.field.mlp().biases(l)) b = rng.normal(0.0, 0.02);
    }

    std::vector<double> depths;
    for (int i = 0; i < cfg.gaussians; ++i) {
        Gaussian g;
        for (int attempt = 0; attempt < 1000; ++attempt) {
            g.position = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-0.8, 0.8)};
            if (near_cell_boundary(s.field, g.position)) continue;
            const double depth = s.cam.to_camera(g.position).z;
            bool tie = false;
            for (double d : depths)
                if (std::abs(d - depth) < 1e-2) tie = true;
            if (tie) continue;
            depths.push_back(depth);
            break;
        }
        // Not too sharp: central differences pick up O(h^2 f''') truncation
        // error on steep falloffs.
        g.log_scale = {rng.uniform(-2.4, -1.0), rng.uniform(-2.4, -1.0), rng.uniform(-2.4, -1.0)};
        Quatd q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        g.rotation = q.normalized();
        g.opacity_logit = rng.uniform(-2.0, 1.5);
        g.color = {rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95), rng.uniform(0.05, 0.95)};
        g.feature.resize(cfg.feature_dim);
        for (auto& f : g.feature) f = rng.normal(0.0, 0.5);
        s.cloud.push(g);
    }

    s.target_color = ImageD(size, size, 3);
    for (auto& v : s.target_color.data) v = rng.uniform();
    s.target_feature = ImageD(size, size, cfg.feature_dim);
    for (auto& v : s.target_feature.data) v = rng.normal(0.0, 0.5);
    s.target_alpha = ImageD(size, size, 1);
    for (auto& v : s.target_alpha.data) v = rng.uniform();

    // The checked function must be smooth: no footprint cull, no early
    // termination, 64-bit accumulation.
    s.opts.falloff_cutoff = 0;
    s.opts.early_stop_transmittance = 0;
    s.opts.f64 = true;
    s.opts.background = {0.15, 0.25, 0.35};
    return s;
}

double scene_loss(const CheckScene& s) {
    const DeformedState state = deform(s.field, s.cloud, s.t);
    const RenderOutput out = render(s.cloud, state, s.cam, s.opts);
    double loss = 0;
    for (size_t i = 0; i < out.color.data.size(); ++i) {
        const double d = out.color.data[i] - s.target_color.data[i];
        loss += d * d;
    }
    for (size_t i = 0; i < out.feature.data.size(); ++i) {
        const double d = out.feature.data[i] - s.target_feature.data[i];
        loss += d * d;
    }
    for (size_t i = 0; i < out.alpha.data.size(); ++i) {
        const double d = out.alpha.data[i] - s.target_alpha.data[i];
        loss += d * d;
    }
    return loss;
}

void scene_analytic(const CheckScene& s, CloudGrads& cg, FieldGrads& fg) {
    DeformationField::Cache cache;
    const DeformedState state = deform(s.field, s.cloud, s.t, &cache);
    const RenderOutput out = render(s.cloud, state, s.cam, s.opts);

    RenderUpstream up;
    up.d_color = ImageD(out.color.height, out.color.width, 3);
    for (size_t i = 0; i < out.color.data.size(); ++i)
        up.d_color.data[i] = 2.0 * (out.color.data[i] - s.target_color.data[i]);
    up.d_feature = ImageD(out.feature.height, out.feature.width, out.feature.channels);
    for (size_t i = 0; i < out.feature.data.size(); ++i)
        up.d_feature.data[i] = 2.0 * (out.feature.data[i] - s.target_feature.data[i]);
    up.d_alpha = ImageD(out.alpha.height, out.alpha.width, 1);
    for (size_t i = 0; i < out.alpha.data.size(); ++i)
        up.d_alpha.data[i] = 2.0 * (out.alpha.data[i] - s.target_alpha.data[i]);

    const RenderGradients rg = render_backward(s.cloud, state, s.cam, up, s.opts);
    const size_t n = s.cloud.size();
    cg.resize(n, s.cloud.feature_dim());
    for (size_t i = 0; i < 3 * n; ++i) {
        cg.position[i] += rg.d_position[i];
        cg.log_scale[i] += rg.d_log_scale[i];
        cg.color[i] += rg.d_color[i];
    }
    for (size_t i = 0; i < 4 * n; ++i) cg.rotation[i] += rg.d_rotation[i];
    for (size_t i = 0; i < n; ++i) cg.opacity_logit[i] += rg.d_opacity_logit[i];
    for (size_t i = 0; i < rg.d_feature.size(); ++i) cg.feature[i] += rg.d_feature[i];

    fg.init_like(s.field);
    const std::vector<double> extra = deform_backward(s.field, s.cloud, cache, rg, fg);
    for (size_t i = 0; i < extra.size(); ++i) cg.position[i] += extra[i];
}

struct ClassCheck {
    std::string name;
    std::vector<double>* analytic;
    std::function<double&(size_t)> param;  // mutable access to parameter k
    size_t count;
};

GradClassReport check_class(const ClassCheck& cls, const std::function<double()>& eval,
                            double fd_step, double tolerance, const GradCorruption* corruption) {
    GradClassReport rep;
    rep.name = cls.name;
    rep.parameter_count = cls.count;
    if (corruption && corruption->class_name == cls.name && corruption->index < cls.count)
        (*cls.analytic)[corruption->index] += corruption->delta;
    for (size_t k = 0; k < cls.count; ++k) {
        double& p = cls.param(k);
        const double saved = p;
        p = saved + fd_step;
        const double up = eval();
        p = saved - fd_step;
        const double down = eval();
        p = saved;
        const double fd = (up - down) / (2.0 * fd_step);
        const double a = (*cls.analytic)[k];
        const double rel = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), kRelFloor});
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst_index = k;
            rep.analytic_at_worst = a;
            rep.fd_at_worst = fd;
        }
    }
    rep.passed = rep.max_rel_err < tolerance;
    return rep;
}

}  // namespace

std::string GradCheckReport::to_string() const {
    std::ostringstream o;
    o << "gradient check: " << (passed ? "PASS" : "FAIL") << " (max rel err " << max_rel_err
      << ")\n";
    for (const auto& c : classes) {
        o << "  " << c.name << ": ";
        if (c.parameter_count == 0) {
            o << "no parameters\n";
            continue;
        }
        o << (c.passed ? "pass" : "FAIL") << " max_rel_err=" << c.max_rel_err << " at ["
          << c.worst_index << "] analytic=" << c.analytic_at_worst << " fd=" << c.fd_at_worst
          << " (" << c.parameter_count << " params)\n";
    }
    return o.str();
}

GradCheckReport check_gradients(const GradCheckConfig& cfg, const GradCorruption* corruption) {
    GradCheckReport report;
    CheckScene scene = make_scene(cfg);

    CloudGrads cg;
    FieldGrads fg;
    scene_analytic(scene, cg, fg);

    const auto eval = [&scene] { return scene_loss(scene); };
    GaussianCloud& cloud = scene.cloud;

    std::vector<double> mlp_flat_grads;
    for (int l = 0; l < scene.field.mlp().layer_count(); ++l) {
        mlp_flat_grads.insert(mlp_flat_grads.end(), fg.mlp.weights[l].begin(),
                              fg.mlp.weights[l].end());
        mlp_flat_grads.insert(mlp_flat_grads.end(), fg.mlp.biases[l].begin(),
                              fg.mlp.biases[l].end());
    }
    const auto mlp_param = [&scene](size_t k) -> double& {
        Mlp& mlp = scene.field.mlp();
        for (int l = 0; l < mlp.layer_count(); ++l) {
            if (k < mlp.weights(l).size()) return mlp.weights(l)[k];
            k -= mlp.weights(l).size();
            if (k < mlp.biases(l).size()) return mlp.biases(l)[k];
            k -= mlp.biases(l).size();
        }
        throw DataError("mlp parameter index out of range");
    };

    std::vector<ClassCheck> checks = {
        {"position", &cg.position, [&cloud](size_t k) -> double& { return cloud.position[k]; },
         cloud.position.size()},
        {"log_scale", &cg.log_scale, [&cloud](size_t k) -> double& { return cloud.log_scale[k]; },
         cloud.log_scale.size()},
        {"rotation", &cg.rotation, [&cloud](size_t k) -> double& { return cloud.rotation[k]; },
         cloud.rotation.size()},
        {"opacity_logit", &cg.opacity_logit,
         [&cloud](size_t k) -> double& { return cloud.opacity_logit[k]; },
         cloud.opacity_logit.size()},
        {"color", &cg.color, [&cloud](size_t k) -> double& { return cloud.color[k]; },
         cloud.color.size()},
        {"feature", &cg.feature, [&cloud](size_t k) -> double& { return cloud.feature[k]; },
         cloud.feature.size()},
        {"deformation_grid", &fg.grid,
         [&scene](size_t k) -> double& { return scene.field.grid()[k]; },
         scene.field.grid_size()},
        {"deformation_mlp", &mlp_flat_grads, mlp_param, mlp_flat_grads.size()},
    };
    for (const auto& cls : checks)
        report.classes.push_back(
            check_class(cls, eval, cfg.fd_step, cfg.tolerance, corruption));

    // Codec MLP, via the reconstruction loss on a small random feature set.
    {
        Rng rng(cfg.seed ^ 0xc0decull);
        CodecConfig cc;
        cc.input_dim = 6;
        cc.latent_dim = 3;
        cc.hidden = 8;
        FeatureCodec codec(cc);
        codec.encoder().init_random(rng);
        codec.decoder().init_random(rng);
        for (int l = 0; l < codec.encoder().layer_count(); ++l)
            for (auto& b : codec.encoder().biases(l)) b = rng.normal(0.0, 0.1);
        for (int l = 0; l < codec.decoder().layer_count(); ++l)
            for (auto& b : codec.decoder().biases(l)) b = rng.normal(0.0, 0.1);

        std::vector<std::vector<double>> feats(5, std::vector<double>(6));
        for (auto& f : feats)
            for (auto& v : f) v = rng.normal(0.0, 0.8);

        Mlp::Grads eg, dg;
        eg.init_like(codec.encoder());
        dg.init_like(codec.decoder());
        codec_reconstruction_loss(codec, feats, ReconMetric::L1, &eg, &dg);

        std::vector<double> flat;
        for (int l = 0; l < codec.encoder().layer_count(); ++l) {
            flat.insert(flat.end(), eg.weights[l].begin(), eg.weights[l].end());
            flat.insert(flat.end(), eg.biases[l].begin(), eg.biases[l].end());
        }
        for (int l = 0; l < codec.decoder().layer_count(); ++l) {
            flat.insert(flat.end(), dg.weights[l].begin(), dg.weights[l].end());
            flat.insert(flat.end(), dg.biases[l].begin(), dg.biases[l].end());
        }
        const auto codec_param = [&codec](size_t k) -> double& {
            for (Mlp* mlp : {&codec.encoder(), &codec.decoder()}) {
                for (int l = 0; l < mlp->layer_count(); ++l) {
                    if (k < mlp->weights(l).size()) return mlp->weights(l)[k];
                    k -= mlp->weights(l).size();
                    if (k < mlp->biases(l).size()) return mlp->biases(l)[k];
                    k -= mlp->biases(l).size();
                }
            }
            throw DataError("codec parameter index out of range");
        };
        const auto codec_eval = [&codec, &feats] {
            return codec_reconstruction_loss(codec, feats, ReconMetric::L1);
        };
        ClassCheck cls{"codec_mlp", &flat, codec_param, flat.size()};
        report.classes.push_back(
            check_class(cls, codec_eval, cfg.fd_step, cfg.tolerance, corruption));
    }

    for (const auto& c : report.classes) {
        report.max_rel_err = std::max(report.max_rel_err, c.max_rel_err);
        report.passed = report.passed && c.passed;
    }
    return report;
}

}  // namespace dho
