#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dho/cli.hpp"
#include "dho/gradcheck.hpp"
#include "dho/losses.hpp"
#include "dho/metrics.hpp"
#include "dho/rasterize.hpp"
#include "dho/semantics.hpp"
#include "dho/threading.hpp"
#include "dho/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace dho {

namespace {

constexpr const char* kVersion = "dho 1.0.0";

struct CommonArgs {
    uint64_t seed = 0;
    int threads = 0;
    bool f64 = false;
};

void add_common(CLI::App* cmd, CommonArgs& c) {
    cmd->add_option("--seed", c.seed, "random seed");
    cmd->add_option("--threads", c.threads, "cap internal parallelism (0 = default)");
    cmd->add_flag("--f64", c.f64, "64-bit accumulation in the rasterizer");
}

const Frame& frame_at(const SceneDataset& ds, int index) {
    if (index < 0 || size_t(index) >= ds.frames.size())
        throw DataError("frame index out of range: " + std::to_string(index));
    return ds.frames[size_t(index)];
}

ImageD gray_image(const ImageD& single_channel) {
    return single_channel;
}

std::vector<double> prompt_latent(const Checkpoint& ckpt, const SceneDataset& ds,
                                  const std::string& prompt) {
    if (!ckpt.has_codec) throw DataError("checkpoint has no codec");
    const auto rows = ds.codebook.find(prompt);
    if (rows.empty()) throw DataError("prompt not present in codebook: " + prompt);
    uint16_t row = rows.front();
    int best_scale = ds.codebook.entries[row].scale;
    for (uint16_t r : rows)
        if (ds.codebook.entries[r].scale > best_scale) {
            best_scale = ds.codebook.entries[r].scale;
            row = r;
        }
    return ckpt.codec.encode(ds.codebook.rows[row]);
}

DeformedState state_for(const Checkpoint& ckpt, double t) {
    return ckpt.has_field ? deform(ckpt.field, ckpt.cloud, t) : canonical_state(ckpt.cloud);
}

int cmd_generate_scene(const std::string& name, const std::string& out, uint64_t seed,
                       double noise, int flat, int views, int heldout, int times, int res) {
    SceneSpec spec = bundled_scene(name);
    if (noise >= 0) spec.noise_amplitude = noise;
    if (flat >= 0) spec.flat_background = flat != 0;
    if (views > 0) spec.train_views = views;
    if (heldout >= 0) spec.heldout_views = heldout;
    if (times > 0) spec.timestamps = times;
    if (res > 0) spec.image_size = res;
    const SceneDataset ds = generate_scene(spec, seed);
    save_scene(ds, out);
    json j{{"scene", spec.name},
           {"frames", ds.frames.size()},
           {"train_frames", ds.train_split.size()},
           {"heldout_frames", ds.heldout_split.size()},
           {"out", out}};
    std::cout << j.dump(1) << "\n";
    return 0;
}

int cmd_train(const std::string& scene_dir, const std::string& out_dir,
              const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& codec_path, const CommonArgs& common, bool seed_given) {
    TrainConfig cfg;
    if (!config_path.empty()) cfg = load_train_config(config_path, cfg);
    for (const auto& kv : sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw DataError("--set expects key=value: " + kv);
        set_train_config_kv(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (seed_given) cfg.seed = common.seed;
    if (common.f64) cfg.use_f64 = true;

    const SceneDataset ds = load_scene(scene_dir);

    FeatureCodec codec;
    const FeatureCodec* pretrained = nullptr;
    if (!codec_path.empty()) {
        Checkpoint c = load_checkpoint(codec_path);
        if (!c.has_codec) throw DataError("no codec block in " + codec_path);
        codec = c.codec;
        pretrained = &codec;
    }

    fs::create_directories(out_dir);
    {
        std::ofstream rc(fs::path(out_dir) / "config_resolved.txt");
        rc << train_config_to_string(cfg);
    }
    std::cerr << "resolved config:\n" << train_config_to_string(cfg);

    const TrainResult result = train(ds, cfg, out_dir, pretrained);
    json j{{"checkpoint", result.checkpoint_path},
           {"gaussians", result.checkpoint.cloud.size()},
           {"heldout_mean_psnr", result.final_eval.mean_psnr},
           {"heldout_min_psnr", result.final_eval.min_psnr},
           {"texture_density", result.texture_density},
           {"lambda_m", result.lambda_m}};
    std::cout << j.dump(1) << "\n";
    return 0;
}

int cmd_render(const std::string& ckpt_path, const std::string& scene_dir, int frame_idx,
               double time_override, const std::string& out_prefix, const CommonArgs& common) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const SceneDataset ds = load_scene(scene_dir);
    const Frame& frame = frame_at(ds, frame_idx);
    const double t = time_override >= 0 ? time_override : frame.timestamp;

    RenderOptions opts;
    opts.f64 = common.f64;
    const RenderOutput out = render(ckpt.cloud, state_for(ckpt, t), frame.camera, opts);

    write_png_rgb8(out_prefix + "_color.png", out.color);
    write_png_gray8(out_prefix + "_alpha.png", gray_image(out.alpha));
    write_float_image(out_prefix + "_feature.bin", out_prefix + "_feature.json", out.feature);
    json j{{"color", out_prefix + "_color.png"},
           {"alpha", out_prefix + "_alpha.png"},
           {"feature", out_prefix + "_feature.bin"},
           {"psnr_vs_frame", psnr(out.color, frame.image)}};
    std::cout << j.dump(1) << "\n";
    return 0;
}

int cmd_query(const std::string& ckpt_path, const std::string& scene_dir,
              const std::string& prompt, int frame_idx, const std::string& out_prefix) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const SceneDataset ds = load_scene(scene_dir);
    const Frame& frame = frame_at(ds, frame_idx);
    const QueryContext ctx = make_query_context(ds.codebook, prompt);
    const RelevanceMap rm = relevance_map(ckpt, frame.camera, frame.timestamp, ctx);
    write_png_gray8(out_prefix + "_relevance.png", rm.map);
    double mn = 1, mx = 0;
    for (double v : rm.map.data) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
    }
    json j{{"relevance", out_prefix + "_relevance.png"}, {"min", mn}, {"max", mx}};
    std::cout << j.dump(1) << "\n";
    return 0;
}

int cmd_segment(const std::string& ckpt_path, const std::string& scene_dir,
                const std::string& prompt, double threshold, int frame_idx,
                const std::string& out_prefix) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const SceneDataset ds = load_scene(scene_dir);
    const Frame& frame = frame_at(ds, frame_idx);
    const QueryContext ctx = make_query_context(ds.codebook, prompt, threshold);
    const RelevanceMap rm = relevance_map(ckpt, frame.camera, frame.timestamp, ctx);
    const MaskImage mask = segment(rm.map, threshold);
    ImageD m(mask.height, mask.width, 1);
    for (size_t i = 0; i < m.data.size(); ++i) m.data[i] = mask.data[i] ? 1.0 : 0.0;
    write_png_gray8(out_prefix + "_mask.png", m);
    json j{{"mask", out_prefix + "_mask.png"}, {"threshold", threshold}};
    try {
        j["iou"] = iou(mask, prompt_gt_mask(frame, ds.codebook, prompt));
    } catch (const DataError&) {
        // no ground truth for this prompt
    }
    std::cout << j.dump(1) << "\n";
    return 0;
}

int cmd_edit(const std::string& ckpt_path, const std::string& scene_dir,
             const std::string& prompt, double threshold, const std::string& action,
             const std::string& target_path, int frame_idx, int iters,
             const std::string& out_path) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const SceneDataset ds = load_scene(scene_dir);
    const std::vector<double> latent = prompt_latent(ckpt, ds, prompt);
    const std::vector<uint32_t> selection = select_gaussians(ckpt.cloud, latent, threshold);

    Checkpoint edited;
    if (action == "remove") {
        edited = edit_remove(ckpt, selection);
    } else if (action == "recolor") {
        if (target_path.empty()) throw DataError("recolor needs --target");
        const Frame& frame = frame_at(ds, frame_idx);
        RecolorObjective obj;
        obj.target = read_png_rgb8(target_path);
        obj.camera = frame.camera;
        obj.timestamp = frame.timestamp;
        obj.iters = iters;
        edited = edit_recolor(ckpt, selection, obj);
    } else {
        throw DataError("unknown edit action: " + action);
    }
    save_checkpoint(out_path, edited);
    json j{{"selected", selection.size()},
           {"action", action},
           {"gaussians", edited.cloud.size()},
           {"out", out_path}};
    std::cout << j.dump(1) << "\n";
    return 0;
}

int cmd_topk(const std::string& ckpt_path, const std::string& scene_dir, int k, double fraction,
             int frame_idx, const std::string& out_prefix) {
    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const SceneDataset ds = load_scene(scene_dir);
    const Frame& frame = frame_at(ds, frame_idx);
    size_t kk = k > 0 ? size_t(k) : size_t(fraction * double(ckpt.cloud.size()));
    kk = std::min(kk, ckpt.cloud.size());
    const TopkDeformation top =
        topk_deformation(ckpt, frame.camera, frame.timestamp, kk);
    write_png_rgb8(out_prefix + "_topk.png", top.rendered.color);

    // Fraction of selected centers projecting inside the GT dynamic mask.
    size_t inside = 0, projected = 0;
    const DeformedState state = state_for(ckpt, frame.timestamp);
    for (uint32_t idx : top.indices) {
        const Vec3d p{state.position[3 * idx], state.position[3 * idx + 1],
                      state.position[3 * idx + 2]};
        const auto proj = project_gaussian(p, {0, 0, 0}, {1, 0, 0, 0}, frame.camera);
        if (!proj) continue;
        const int px = int(proj->mean2d.x), py = int(proj->mean2d.y);
        if (px < 0 || py < 0 || px >= frame.mask.width || py >= frame.mask.height) continue;
        ++projected;
        inside += frame.mask.at(py, px) ? 1 : 0;
    }
    json j{{"k", kk},
           {"image", out_prefix + "_topk.png"},
           {"projected", projected},
           {"inside_mask", inside}};
    if (projected > 0) j["inside_fraction"] = double(inside) / double(projected);
    std::cout << j.dump(1) << "\n";
    return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& scene_dir,
             const std::string& texture_scene, const std::string& prompt, double threshold,
             const std::string& out_path, const CommonArgs& common) {
    json report;
    if (!texture_scene.empty()) {
        const SceneDataset ds = load_scene(texture_scene);
        std::vector<ImageD> imgs;
        for (uint32_t fi : ds.train_split) imgs.push_back(ds.frames[fi].image);
        GuidanceConfig gc;
        const double density = texture_density(imgs, gc);
        report["texture_density"] = density;
        report["lambda_m"] = adaptive_mask_weight(density, gc);
        std::cout << report.dump(1) << "\n";
        return 0;
    }

    const Checkpoint ckpt = load_checkpoint(ckpt_path);
    const SceneDataset ds = load_scene(scene_dir);
    RenderOptions opts;
    opts.f64 = common.f64;

    double sum_psnr = 0, sum_ssim = 0, sum_mpsnr = 0, sum_mssim = 0;
    size_t masked_frames = 0;
    for (uint32_t fi : ds.heldout_split) {
        const Frame& frame = ds.frames[fi];
        const RenderOutput out =
            render(ckpt.cloud, state_for(ckpt, frame.timestamp), frame.camera, opts);
        sum_psnr += psnr(out.color, frame.image);
        sum_ssim += ssim(out.color, frame.image);
        bool any = false;
        for (uint8_t m : frame.mask.data) any = any || m;
        if (any) {
            const MaskedMetrics mm = masked_metrics(out.color, frame.image, frame.mask);
            sum_mpsnr += mm.psnr;
            sum_mssim += mm.ssim;
            ++masked_frames;
        }
    }
    const double n = double(ds.heldout_split.size());
    report["heldout_frames"] = ds.heldout_split.size();
    report["psnr"] = sum_psnr / n;
    report["ssim"] = sum_ssim / n;
    if (masked_frames) {
        report["masked_psnr"] = sum_mpsnr / double(masked_frames);
        report["masked_ssim"] = sum_mssim / double(masked_frames);
    }

    {
        std::vector<ImageD> imgs;
        for (uint32_t fi : ds.train_split) imgs.push_back(ds.frames[fi].image);
        GuidanceConfig gc;
        report["texture_density"] = texture_density(imgs, gc);
        report["lambda_m"] = adaptive_mask_weight(report["texture_density"].get<double>(), gc);
    }

    if (ckpt.has_codec) {
        // Segmentation mIoU per whole-scale foreground class.
        json miou_report = json::object();
        for (size_t r = 0; r < ds.codebook.entries.size(); ++r) {
            const auto& e = ds.codebook.entries[r];
            if (e.scale != int(Scale::Whole)) continue;
            if (!prompt.empty() && e.name != prompt) continue;
            miou_report[e.name] =
                segmentation_miou(ckpt, ds, e.name, threshold, ds.heldout_split);
        }
        report["segmentation_miou"] = miou_report;
    }

    if (!out_path.empty()) {
        std::ofstream f(out_path);
        if (!f) throw DataError("cannot write report: " + out_path);
        f << report.dump(1) << "\n";
    }
    std::cout << report.dump(1) << "\n";
    return 0;
}

int cmd_check_gradients(uint64_t seed, int gaussians, int size, double tolerance) {
    GradCheckConfig cfg;
    cfg.seed = seed;
    cfg.gaussians = gaussians;
    cfg.image_size = size;
    cfg.tolerance = tolerance;
    const GradCheckReport report = check_gradients(cfg);
    std::cout << report.to_string();
    return report.passed ? 0 : 4;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"semantic dynamic Gaussian splatting engine"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(0, 1);

    CommonArgs common;

    // generate-scene
    auto* gen = app.add_subcommand("generate-scene", "ray-trace a synthetic scene to disk");
    std::string gen_name = "dynamic-clean", gen_out;
    double gen_noise = -1;
    int gen_flat = -1, gen_views = -1, gen_heldout = -1, gen_times = -1, gen_res = -1;
    gen->add_option("--name", gen_name, "bundled scene name")->required();
    gen->add_option("--out", gen_out, "output directory")->required();
    gen->add_option("--noise-amplitude", gen_noise, "background clutter amplitude");
    gen->add_option("--flat-background", gen_flat, "1 = uniform backdrop");
    gen->add_option("--views", gen_views, "training view count");
    gen->add_option("--heldout", gen_heldout, "held-out view count");
    gen->add_option("--times", gen_times, "timestamp count");
    gen->add_option("--res", gen_res, "image size");
    add_common(gen, common);

    // train-codec
    auto* tc = app.add_subcommand("train-codec", "train the feature autoencoder");
    std::string tc_features, tc_scene, tc_out = "codec.bin", tc_metric = "l1";
    int tc_dim = 0, tc_latent = 8, tc_hidden = 128, tc_iters = 4000;
    double tc_lr = 1e-3;
    tc->add_option("--features", tc_features, "flat float32 feature file");
    tc->add_option("--scene", tc_scene, "scene directory (uses its codebook)");
    tc->add_option("--dim", tc_dim, "input feature dimension (with --features)");
    tc->add_option("--latent", tc_latent, "latent dimension");
    tc->add_option("--hidden", tc_hidden, "hidden width");
    tc->add_option("--iters", tc_iters, "training iterations");
    tc->add_option("--lr", tc_lr, "learning rate");
    tc->add_option("--metric", tc_metric, "reconstruction metric: l1 | l2");
    tc->add_option("--out", tc_out, "output codec file");
    add_common(tc, common);

    // train
    auto* tr = app.add_subcommand("train", "two-stage optimization on a scene");
    std::string tr_scene, tr_out, tr_config, tr_codec;
    std::vector<std::string> tr_sets;
    tr->add_option("--scene", tr_scene, "scene directory")->required();
    tr->add_option("--out", tr_out, "output directory")->required();
    tr->add_option("--config", tr_config, "key=value config file");
    tr->add_option("--set", tr_sets, "config override key=value (repeatable)");
    tr->add_option("--codec", tr_codec, "pretrained codec checkpoint");
    add_common(tr, common);

    // render
    auto* rd = app.add_subcommand("render", "render a checkpoint at a dataset frame");
    std::string rd_ckpt, rd_scene, rd_out = "render";
    int rd_frame = 0;
    double rd_time = -1;
    rd->add_option("--checkpoint", rd_ckpt)->required();
    rd->add_option("--scene", rd_scene)->required();
    rd->add_option("--frame", rd_frame, "dataset frame index");
    rd->add_option("--time", rd_time, "timestamp override in [0,1]");
    rd->add_option("--out", rd_out, "output prefix");
    add_common(rd, common);

    // query
    auto* qr = app.add_subcommand("query", "relevance map for a prompt");
    std::string qr_ckpt, qr_scene, qr_prompt, qr_out = "query";
    int qr_frame = 0;
    qr->add_option("--checkpoint", qr_ckpt)->required();
    qr->add_option("--scene", qr_scene)->required();
    qr->add_option("--prompt", qr_prompt)->required();
    qr->add_option("--frame", qr_frame);
    qr->add_option("--out", qr_out);
    add_common(qr, common);

    // segment
    auto* sg = app.add_subcommand("segment", "threshold a relevance map into a mask");
    std::string sg_ckpt, sg_scene, sg_prompt, sg_out = "segment";
    double sg_threshold = 0.6;
    int sg_frame = 0;
    sg->add_option("--checkpoint", sg_ckpt)->required();
    sg->add_option("--scene", sg_scene)->required();
    sg->add_option("--prompt", sg_prompt)->required();
    sg->add_option("--threshold", sg_threshold);
    sg->add_option("--frame", sg_frame);
    sg->add_option("--out", sg_out);
    add_common(sg, common);

    // edit
    auto* ed = app.add_subcommand("edit", "remove or recolor semantically selected Gaussians");
    std::string ed_ckpt, ed_scene, ed_prompt, ed_action, ed_target, ed_out = "edited.bin";
    double ed_threshold = 0.6;
    int ed_frame = 0, ed_iters = 200;
    ed->add_option("--checkpoint", ed_ckpt)->required();
    ed->add_option("--scene", ed_scene)->required();
    ed->add_option("--prompt", ed_prompt)->required();
    ed->add_option("--threshold", ed_threshold);
    ed->add_option("--action", ed_action, "remove | recolor")->required();
    ed->add_option("--target", ed_target, "target image for recolor");
    ed->add_option("--frame", ed_frame);
    ed->add_option("--iters", ed_iters);
    ed->add_option("--out", ed_out);
    add_common(ed, common);

    // topk-deform
    auto* tk = app.add_subcommand("topk-deform", "render the k most-deformed Gaussians");
    std::string tk_ckpt, tk_scene, tk_out = "topk";
    int tk_k = 0, tk_frame = 0;
    double tk_fraction = 0.1;
    tk->add_option("--checkpoint", tk_ckpt)->required();
    tk->add_option("--scene", tk_scene)->required();
    tk->add_option("--k", tk_k, "explicit count (overrides --fraction)");
    tk->add_option("--fraction", tk_fraction, "fraction of the cloud");
    tk->add_option("--frame", tk_frame);
    tk->add_option("--out", tk_out);
    add_common(tk, common);

    // eval
    auto* ev = app.add_subcommand("eval", "metrics report for a checkpoint or scene");
    std::string ev_ckpt, ev_scene, ev_texture, ev_prompt, ev_out;
    double ev_threshold = 0.6;
    ev->add_option("--checkpoint", ev_ckpt);
    ev->add_option("--scene", ev_scene);
    ev->add_option("--texture-density", ev_texture, "scene dir: only report texture density");
    ev->add_option("--prompt", ev_prompt, "restrict segmentation mIoU to one prompt");
    ev->add_option("--threshold", ev_threshold);
    ev->add_option("--out", ev_out, "write the JSON report here");
    add_common(ev, common);

    // check-gradients
    auto* cg = app.add_subcommand("check-gradients", "finite-difference gradient verification");
    int cg_gaussians = 20, cg_size = 16;
    double cg_tolerance = 1e-4;
    cg->add_option("--gaussians", cg_gaussians);
    cg->add_option("--size", cg_size);
    cg->add_option("--tolerance", cg_tolerance);
    add_common(cg, common);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return 2;
    }

    set_max_threads(common.threads);
    CLI::App* active = app.get_subcommands().front();
    const bool seed_given = active->count("--seed") > 0;

    try {
        if (gen->parsed())
            return cmd_generate_scene(gen_name, gen_out, common.seed, gen_noise, gen_flat,
                                      gen_views, gen_heldout, gen_times, gen_res);
        if (tc->parsed()) {
            std::vector<std::vector<double>> feats;
            int dim = tc_dim;
            if (!tc_scene.empty()) {
                const SceneDataset ds = load_scene(tc_scene);
                feats = ds.codebook.rows;
                dim = ds.codebook.dim;
            } else if (!tc_features.empty()) {
                if (dim <= 0) throw DataError("--features needs --dim");
                std::ifstream in(tc_features, std::ios::binary);
                if (!in) throw DataError("cannot open " + tc_features);
                std::vector<float> buf(static_cast<size_t>(dim), 0.0f);
                while (in.read(reinterpret_cast<char*>(buf.data()),
                               std::streamsize(buf.size() * sizeof(float))))
                    feats.emplace_back(buf.begin(), buf.end());
            } else {
                throw DataError("train-codec needs --scene or --features");
            }
            CodecConfig cc;
            cc.input_dim = dim;
            cc.latent_dim = tc_latent;
            cc.hidden = tc_hidden;
            cc.iters = tc_iters;
            cc.lr = tc_lr;
            cc.metric = tc_metric == "l2" ? ReconMetric::L2 : ReconMetric::L1;
            cc.seed = common.seed;
            const CodecTrainResult result = train_codec(feats, cc);
            Checkpoint ckpt;
            ckpt.cloud = GaussianCloud(tc_latent);
            ckpt.codec = result.codec;
            ckpt.has_codec = true;
            save_checkpoint(tc_out, ckpt);
            json j{{"out", tc_out}, {"final_loss", result.final_loss}, {"vectors", feats.size()}};
            std::cout << j.dump(1) << "\n";
            return 0;
        }
        if (tr->parsed())
            return cmd_train(tr_scene, tr_out, tr_config, tr_sets, tr_codec, common, seed_given);
        if (rd->parsed()) return cmd_render(rd_ckpt, rd_scene, rd_frame, rd_time, rd_out, common);
        if (qr->parsed()) return cmd_query(qr_ckpt, qr_scene, qr_prompt, qr_frame, qr_out);
        if (sg->parsed())
            return cmd_segment(sg_ckpt, sg_scene, sg_prompt, sg_threshold, sg_frame, sg_out);
        if (ed->parsed())
            return cmd_edit(ed_ckpt, ed_scene, ed_prompt, ed_threshold, ed_action, ed_target,
                            ed_frame, ed_iters, ed_out);
        if (tk->parsed()) return cmd_topk(tk_ckpt, tk_scene, tk_k, tk_fraction, tk_frame, tk_out);
        if (ev->parsed())
            return cmd_eval(ev_ckpt, ev_scene, ev_texture, ev_prompt, ev_threshold, ev_out, common);
        if (cg->parsed())
            return cmd_check_gradients(common.seed, cg_gaussians, cg_size, cg_tolerance);
    } catch (const NumericError& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    std::cerr << app.help();
    return 2;
}

}  // namespace dho
