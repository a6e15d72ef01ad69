#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dho/rasterize.hpp"

namespace dho {

DeformedState canonical_state(const GaussianCloud& cloud) {
    DeformedState s;
    s.position = cloud.position;
    s.rotation = cloud.rotation;
    s.log_scale = cloud.log_scale;
    return s;
}

void RenderGradients::resize(size_t n, int feature_dim) {
    d_position.assign(3 * n, 0.0);
    d_rotation.assign(4 * n, 0.0);
    d_log_scale.assign(3 * n, 0.0);
    d_opacity_logit.assign(n, 0.0);
    d_color.assign(3 * n, 0.0);
    d_feature.assign(size_t(feature_dim) * n, 0.0);
    densify_signal.assign(n, 0.0);
    visible.assign(n, 0);
}

namespace {

template <typename T>
struct Splat {
    T mean_x, mean_y;
    T inv_xx, inv_xy, inv_yy;  // inverse 2D covariance
    T opacity;
    T color[3];
    double depth;
    uint32_t index;     // Gaussian index in the cloud
    int x0, x1, y0, y1; // inclusive pixel bbox
};

// Projection intermediates needed by the per-splat parameter chain. Recomputed
// in double regardless of the compositing precision.
struct SplatGeom {
    Quatd q_unit;
    double q_norm;
    Vec3d s;          // exp(log_scale)
    Mat3d rot;
    Mat3d sigma;
    Vec3d p_cam;
    double j00, j02, j11, j12;
    double cov_xx, cov_xy, cov_yy;  // with low-pass floor
};

bool project_geom(const Vec3d& pos, const Vec3d& ls, const Quatd& raw, const Camera& cam,
                  const ProjectionSettings& ps, SplatGeom& g, Vec2d& mean2d) {
    g.p_cam = cam.to_camera(pos);
    if (g.p_cam.z <= ps.near_plane) return false;
    g.q_norm = raw.norm();
    g.q_unit = raw.normalized();
    g.rot = quat_to_matrix(g.q_unit);
    g.s = {std::exp(ls.x), std::exp(ls.y), std::exp(ls.z)};
    Mat3d m;
    for (int i = 0; i < 3; ++i) {
        m.m[i][0] = g.rot.m[i][0] * g.s.x;
        m.m[i][1] = g.rot.m[i][1] * g.s.y;
        m.m[i][2] = g.rot.m[i][2] * g.s.z;
    }
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            g.sigma.m[i][j] = m.m[i][0] * m.m[j][0] + m.m[i][1] * m.m[j][1] + m.m[i][2] * m.m[j][2];

    const Mat3d cov_cam = cam.world_to_cam * g.sigma * cam.world_to_cam.transposed();
    const double inv_z = 1.0 / g.p_cam.z;
    g.j00 = cam.fx * inv_z;
    g.j02 = -cam.fx * g.p_cam.x * inv_z * inv_z;
    g.j11 = cam.fy * inv_z;
    g.j12 = -cam.fy * g.p_cam.y * inv_z * inv_z;

    const auto& c = cov_cam.m;
    const double a0 = g.j00 * c[0][0] + g.j02 * c[2][0];
    const double a2 = g.j00 * c[0][2] + g.j02 * c[2][2];
    const double b0 = g.j11 * c[1][0] + g.j12 * c[2][0];
    const double b1 = g.j11 * c[1][1] + g.j12 * c[2][1];
    const double b2 = g.j11 * c[1][2] + g.j12 * c[2][2];
    g.cov_xx = a0 * g.j00 + a2 * g.j02 + ps.lowpass;
    g.cov_xy = b0 * g.j00 + b2 * g.j02;
    g.cov_yy = b1 * g.j11 + b2 * g.j12 + ps.lowpass;
    mean2d = {cam.fx * g.p_cam.x * inv_z + cam.cx, cam.fy * g.p_cam.y * inv_z + cam.cy};
    return true;
}

template <typename T>
struct Prepared {
    std::vector<Splat<T>> splats;           // depth-sorted, visible only
    std::vector<uint32_t> row_offsets;      // H+1 CSR offsets into row_items
    std::vector<uint32_t> row_items;        // indices into `splats`
    RenderStats stats;
};

template <typename T>
Prepared<T> prepare(const GaussianCloud& cloud, const DeformedState& state,
                    const Camera& cam, const RenderOptions& opts) {
    const size_t n = cloud.size();
    if (state.size() != n) throw ShapeMismatch("deformed state size does not match cloud");
    const int W = cam.width, H = cam.height;

    Prepared<T> prep;
    prep.splats.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const Vec3d pos{state.position[3 * i], state.position[3 * i + 1], state.position[3 * i + 2]};
        const Vec3d ls{state.log_scale[3 * i], state.log_scale[3 * i + 1], state.log_scale[3 * i + 2]};
        const Quatd raw{state.rotation[4 * i], state.rotation[4 * i + 1],
                        state.rotation[4 * i + 2], state.rotation[4 * i + 3]};
        SplatGeom geom;
        Vec2d mean2d;
        if (!project_geom(pos, ls, raw, cam, opts.projection, geom, mean2d)) {
            ++prep.stats.culled_behind;
            continue;
        }
        const double det = geom.cov_xx * geom.cov_yy - geom.cov_xy * geom.cov_xy;
        if (!(det >= 1e-12) || !std::isfinite(det)) {
            ++prep.stats.degenerate_cov;
            continue;
        }

        // Conservative extent from the largest eigenvalue of cov2d.
        double radius;
        if (opts.falloff_cutoff > 0) {
            const double mid = 0.5 * (geom.cov_xx + geom.cov_yy);
            const double l1 = mid + std::sqrt(std::max(0.0, mid * mid - det));
            radius = std::sqrt(opts.falloff_cutoff * l1);
        } else {
            radius = std::numeric_limits<double>::infinity();
        }
        int x0 = 0, x1 = W - 1, y0 = 0, y1 = H - 1;
        if (std::isfinite(radius)) {
            x0 = std::max(0, int(std::ceil(mean2d.x - radius - 0.5)));
            x1 = std::min(W - 1, int(std::floor(mean2d.x + radius - 0.5)));
            y0 = std::max(0, int(std::ceil(mean2d.y - radius - 0.5)));
            y1 = std::min(H - 1, int(std::floor(mean2d.y + radius - 0.5)));
            if (x0 > x1 || y0 > y1) continue;  // off-screen
        }

        Splat<T> s;
        s.mean_x = T(mean2d.x);
        s.mean_y = T(mean2d.y);
        const T inv_det = T(1) / T(det);
        s.inv_xx = T(geom.cov_yy) * inv_det;
        s.inv_xy = T(-geom.cov_xy) * inv_det;
        s.inv_yy = T(geom.cov_xx) * inv_det;
        s.opacity = T(sigmoid(cloud.opacity_logit[i]));
        s.color[0] = T(cloud.color[3 * i]);
        s.color[1] = T(cloud.color[3 * i + 1]);
        s.color[2] = T(cloud.color[3 * i + 2]);
        s.depth = geom.p_cam.z;
        s.index = uint32_t(i);
        s.x0 = x0; s.x1 = x1; s.y0 = y0; s.y1 = y1;
        prep.splats.push_back(s);
    }

    std::sort(prep.splats.begin(), prep.splats.end(), [](const Splat<T>& a, const Splat<T>& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.index < b.index;
    });

    prep.row_offsets.assign(size_t(H) + 1, 0);
    for (const auto& s : prep.splats)
        for (int y = s.y0; y <= s.y1; ++y) ++prep.row_offsets[size_t(y) + 1];
    for (int y = 0; y < H; ++y) prep.row_offsets[size_t(y) + 1] += prep.row_offsets[y];
    prep.row_items.resize(prep.row_offsets[H]);
    std::vector<uint32_t> cursor(prep.row_offsets.begin(), prep.row_offsets.end() - 1);
    for (uint32_t k = 0; k < prep.splats.size(); ++k)
        for (int y = prep.splats[k].y0; y <= prep.splats[k].y1; ++y)
            prep.row_items[cursor[y]++] = k;
    return prep;
}

template <typename T>
RenderOutput forward_impl(const GaussianCloud& cloud, const DeformedState& state,
                          const Camera& cam, const RenderOptions& opts) {
    const int W = cam.width, H = cam.height, F = cloud.feature_dim();
    Prepared<T> prep = prepare<T>(cloud, state, cam, opts);

    RenderOutput out;
    out.color = ImageD(H, W, 3);
    out.feature = ImageD(H, W, F);
    out.alpha = ImageD(H, W, 1);
    out.transmittance = ImageD(H, W, 1);
    out.stats = prep.stats;
    out.depth_order.reserve(prep.splats.size());
    for (const auto& s : prep.splats) out.depth_order.push_back(s.index);

    const T cutoff = T(opts.falloff_cutoff);
    const T early = T(opts.early_stop_transmittance);
    const T bg[3] = {T(opts.background.x), T(opts.background.y), T(opts.background.z)};

#pragma omp parallel for schedule(static)
    for (int y = 0; y < H; ++y) {
        std::vector<T> feat_acc(F);
        const uint32_t begin = prep.row_offsets[y], end = prep.row_offsets[size_t(y) + 1];
        const T py = T(y) + T(0.5);
        for (int x = 0; x < W; ++x) {
            const T px = T(x) + T(0.5);
            T acc[3] = {T(0), T(0), T(0)};
            std::fill(feat_acc.begin(), feat_acc.end(), T(0));
            T alpha_acc = T(0);
            T trans = T(1);
            for (uint32_t it = begin; it < end; ++it) {
                const Splat<T>& s = prep.splats[prep.row_items[it]];
                if (x < s.x0 || x > s.x1) continue;
                const T dx = px - s.mean_x, dy = py - s.mean_y;
                const T g = s.inv_xx * dx * dx + T(2) * s.inv_xy * dx * dy + s.inv_yy * dy * dy;
                if (cutoff > T(0) && g > cutoff) continue;
                const T ahat = s.opacity * std::exp(T(-0.5) * g);
                const T w = ahat * trans;
                acc[0] += w * s.color[0];
                acc[1] += w * s.color[1];
                acc[2] += w * s.color[2];
                const double* f = &cloud.feature[size_t(s.index) * F];
                for (int j = 0; j < F; ++j) feat_acc[j] += w * T(f[j]);
                alpha_acc += w;
                trans *= (T(1) - ahat);
                if (early > T(0) && trans < early) break;
            }
            for (int c = 0; c < 3; ++c) out.color.at(y, x, c) = double(acc[c] + trans * bg[c]);
            for (int j = 0; j < F; ++j) out.feature.at(y, x, j) = double(feat_acc[j]);
            out.alpha.at(y, x) = double(alpha_acc);
            out.transmittance.at(y, x) = double(trans);
        }
    }
    return out;
}

// One compositing step recorded for the backward sweep.
template <typename T>
struct PixelHit {
    uint32_t slot;  // index into the row's item list
    T ahat, fall, trans;
    T dx, dy;
};

template <typename T>
RenderGradients backward_impl(const GaussianCloud& cloud, const DeformedState& state,
                              const Camera& cam, const RenderUpstream& up,
                              const RenderOptions& opts) {
    const int W = cam.width, H = cam.height, F = cloud.feature_dim();
    const size_t n = cloud.size();
    Prepared<T> prep = prepare<T>(cloud, state, cam, opts);

    const bool has_color = !up.d_color.empty();
    const bool has_feat = !up.d_feature.empty();
    const bool has_alpha = !up.d_alpha.empty();
    if (has_color && (up.d_color.height != H || up.d_color.width != W || up.d_color.channels != 3))
        throw ShapeMismatch("upstream color gradient shape mismatch");
    if (has_feat && (up.d_feature.height != H || up.d_feature.width != W || up.d_feature.channels != F))
        throw ShapeMismatch("upstream feature gradient shape mismatch");
    if (has_alpha && (up.d_alpha.height != H || up.d_alpha.width != W || up.d_alpha.channels != 1))
        throw ShapeMismatch("upstream alpha gradient shape mismatch");

    RenderGradients grads;
    grads.resize(n, F);

    const T cutoff = T(opts.falloff_cutoff);
    const T early = T(opts.early_stop_transmittance);
    const T bg[3] = {T(opts.background.x), T(opts.background.y), T(opts.background.z)};

    // Row-local accumulators: per splat-in-row slot we keep
    // [gm_x, gm_y, gP_xx, gP_xy, gP_yy, g_opacity, g_color*3, g_feature*F].
    const int stride = 9 + F;
    std::vector<std::vector<T>> row_acc(H);

#pragma omp parallel for schedule(static)
    for (int y = 0; y < H; ++y) {
        const uint32_t begin = prep.row_offsets[y], end = prep.row_offsets[size_t(y) + 1];
        const uint32_t items = end - begin;
        if (items == 0) continue;
        auto& acc = row_acc[y];
        acc.assign(size_t(items) * stride, T(0));
        std::vector<PixelHit<T>> hits;
        hits.reserve(items);
        std::vector<T> bf(F), gf(F);
        const T py = T(y) + T(0.5);

        for (int x = 0; x < W; ++x) {
            const T px = T(x) + T(0.5);
            // Forward replay, recording every contributing splat.
            hits.clear();
            T trans = T(1);
            for (uint32_t it = begin; it < end; ++it) {
                const Splat<T>& s = prep.splats[prep.row_items[it]];
                if (x < s.x0 || x > s.x1) continue;
                const T dx = px - s.mean_x, dy = py - s.mean_y;
                const T g = s.inv_xx * dx * dx + T(2) * s.inv_xy * dx * dy + s.inv_yy * dy * dy;
                if (cutoff > T(0) && g > cutoff) continue;
                const T fall = std::exp(T(-0.5) * g);
                const T ahat = s.opacity * fall;
                hits.push_back({it - begin, ahat, fall, trans, dx, dy});
                trans *= (T(1) - ahat);
                if (early > T(0) && trans < early) break;
            }
            if (hits.empty()) continue;

            T gc[3] = {T(0), T(0), T(0)};
            if (has_color)
                for (int c = 0; c < 3; ++c) gc[c] = T(up.d_color.at(y, x, c));
            if (has_feat)
                for (int j = 0; j < F; ++j) gf[j] = T(up.d_feature.at(y, x, j));
            else
                std::fill(gf.begin(), gf.end(), T(0));
            const T ga = has_alpha ? T(up.d_alpha.at(y, x)) : T(0);

            // Back-to-front sweep. B tracks the composited value behind the
            // current splat with transmittance restarted there; the background
            // acts as a virtual opaque last layer for the color channels.
            T bc[3] = {bg[0], bg[1], bg[2]};
            std::fill(bf.begin(), bf.end(), T(0));
            T ba = T(0);
            for (size_t h = hits.size(); h-- > 0;) {
                const PixelHit<T>& hit = hits[h];
                const Splat<T>& s = prep.splats[prep.row_items[begin + hit.slot]];
                const double* f = &cloud.feature[size_t(s.index) * F];
                const T w = hit.ahat * hit.trans;

                T d_ahat = T(0);
                T* slot = &acc[size_t(hit.slot) * stride];
                if (has_color) {
                    for (int c = 0; c < 3; ++c) {
                        d_ahat += gc[c] * hit.trans * (s.color[c] - bc[c]);
                        slot[6 + c] += gc[c] * w;
                    }
                }
                if (has_feat) {
                    for (int j = 0; j < F; ++j) {
                        d_ahat += gf[j] * hit.trans * (T(f[j]) - bf[j]);
                        slot[9 + j] += gf[j] * w;
                    }
                }
                if (has_alpha) d_ahat += ga * hit.trans * (T(1) - ba);

                slot[5] += d_ahat * hit.fall;  // d/d(activated opacity)
                const T dg = d_ahat * s.opacity * T(-0.5) * hit.fall;
                slot[2] += dg * hit.dx * hit.dx;
                slot[3] += dg * T(2) * hit.dx * hit.dy;
                slot[4] += dg * hit.dy * hit.dy;
                // dG/dmean = -2 * P * d
                slot[0] += dg * T(-2) * (s.inv_xx * hit.dx + s.inv_xy * hit.dy);
                slot[1] += dg * T(-2) * (s.inv_xy * hit.dx + s.inv_yy * hit.dy);

                for (int c = 0; c < 3; ++c) bc[c] = hit.ahat * s.color[c] + (T(1) - hit.ahat) * bc[c];
                for (int j = 0; j < F; ++j) bf[j] = hit.ahat * T(f[j]) + (T(1) - hit.ahat) * bf[j];
                ba = hit.ahat + (T(1) - hit.ahat) * ba;
            }
        }
    }

    // Deterministic merge: rows in order, splats in row order. Totals go to
    // per-splat double accumulators independent of thread count.
    std::vector<double> splat_acc(prep.splats.size() * size_t(stride), 0.0);
    for (int y = 0; y < H; ++y) {
        const auto& acc = row_acc[y];
        if (acc.empty()) continue;
        const uint32_t begin = prep.row_offsets[y], end = prep.row_offsets[size_t(y) + 1];
        for (uint32_t it = begin; it < end; ++it) {
            const size_t splat = prep.row_items[it];
            const T* src = &acc[size_t(it - begin) * stride];
            double* dst = &splat_acc[splat * stride];
            for (int k = 0; k < stride; ++k) dst[k] += double(src[k]);
        }
    }
    row_acc.clear();

    // Parameter chain per splat, in double.
#pragma omp parallel for schedule(static)
    for (long k = 0; k < long(prep.splats.size()); ++k) {
        const Splat<T>& s = prep.splats[k];
        const double* a = &splat_acc[size_t(k) * stride];
        const size_t i = s.index;
        grads.visible[i] = 1;

        const Vec2d gm{a[0], a[1]};
        const double gp_xx = a[2], gp_xy = a[3], gp_yy = a[4];
        const double g_op = a[5];

        for (int c = 0; c < 3; ++c) grads.d_color[3 * i + c] = a[6 + c];
        for (int j = 0; j < F; ++j) grads.d_feature[i * F + j] = a[9 + j];

        const double op = sigmoid(cloud.opacity_logit[i]);
        grads.d_opacity_logit[i] = g_op * op * (1.0 - op);

        grads.densify_signal[i] =
            std::hypot(gm.x * cam.width * 0.5, gm.y * cam.height * 0.5);

        // Recompute projection intermediates.
        const Vec3d pos{state.position[3 * i], state.position[3 * i + 1], state.position[3 * i + 2]};
        const Vec3d ls{state.log_scale[3 * i], state.log_scale[3 * i + 1], state.log_scale[3 * i + 2]};
        const Quatd raw{state.rotation[4 * i], state.rotation[4 * i + 1],
                        state.rotation[4 * i + 2], state.rotation[4 * i + 3]};
        SplatGeom geom;
        Vec2d mean2d;
        project_geom(pos, ls, raw, cam, opts.projection, geom, mean2d);

        const double det = geom.cov_xx * geom.cov_yy - geom.cov_xy * geom.cov_xy;
        const double pxx = geom.cov_yy / det, pxy = -geom.cov_xy / det, pyy = geom.cov_xx / det;

        // Inverse rule: dL/dC = -P * U * P, with U the full-matrix form of the
        // reduced (xx, xy, yy) gradients.
        const double uxx = gp_xx, uxy = 0.5 * gp_xy, uyy = gp_yy;
        const double t00 = pxx * uxx + pxy * uxy, t01 = pxx * uxy + pxy * uyy;
        const double t10 = pxy * uxx + pyy * uxy, t11 = pxy * uxy + pyy * uyy;
        const double c_xx = -(t00 * pxx + t01 * pxy);
        const double c_xy = -(t00 * pxy + t01 * pyy);
        const double c_yx = -(t10 * pxx + t11 * pxy);
        const double c_yy = -(t10 * pxy + t11 * pyy);
        // C-grad is symmetric; keep full entries for the chains below.
        const double cg[2][2] = {{c_xx, 0.5 * (c_xy + c_yx)}, {0.5 * (c_xy + c_yx), c_yy}};

        const double J[2][3] = {{geom.j00, 0.0, geom.j02}, {0.0, geom.j11, geom.j12}};
        const Mat3d cov_cam = cam.world_to_cam * geom.sigma * cam.world_to_cam.transposed();

        // cov_cam gradient = J^T * cg * J
        Mat3d ccg;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                double v = 0;
                for (int p = 0; p < 2; ++p)
                    for (int q = 0; q < 2; ++q) v += J[p][r] * cg[p][q] * J[q][c];
                ccg.m[r][c] = v;
            }

        // J gradient = 2 * cg * J * cov_cam
        double jg[2][3] = {{0, 0, 0}, {0, 0, 0}};
        {
            double jc[2][3];  // J * cov_cam
            for (int p = 0; p < 2; ++p)
                for (int c = 0; c < 3; ++c) {
                    double v = 0;
                    for (int q = 0; q < 3; ++q) v += J[p][q] * cov_cam.m[q][c];
                    jc[p][c] = v;
                }
            for (int p = 0; p < 2; ++p)
                for (int c = 0; c < 3; ++c)
                    jg[p][c] = 2.0 * (cg[p][0] * jc[0][c] + cg[p][1] * jc[1][c]);
        }

        // World covariance gradient = W^T * ccg * W
        const Mat3d sig_grad =
            cam.world_to_cam.transposed() * ccg * cam.world_to_cam;

        // Sigma = M M^T with M = R diag(s): dL/dM = (G + G^T) M = 2 G M.
        Mat3d mmat;
        for (int r = 0; r < 3; ++r) {
            mmat.m[r][0] = geom.rot.m[r][0] * geom.s.x;
            mmat.m[r][1] = geom.rot.m[r][1] * geom.s.y;
            mmat.m[r][2] = geom.rot.m[r][2] * geom.s.z;
        }
        Mat3d mg;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) {
                double v = 0;
                for (int p = 0; p < 3; ++p) v += (sig_grad.m[r][p] + sig_grad.m[p][r]) * mmat.m[p][c];
                mg.m[r][c] = v;
            }

        const double sv[3] = {geom.s.x, geom.s.y, geom.s.z};
        for (int c = 0; c < 3; ++c) {
            double gs = 0;
            for (int r = 0; r < 3; ++r) gs += geom.rot.m[r][c] * mg.m[r][c];
            grads.d_log_scale[3 * i + c] = gs * sv[c];
        }

        Mat3d rg;
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) rg.m[r][c] = mg.m[r][c] * sv[c];
        Mat3d dr[4];
        quat_to_matrix_grads(geom.q_unit, dr);
        double qg[4] = {0, 0, 0, 0};
        for (int c = 0; c < 4; ++c)
            for (int r = 0; r < 3; ++r)
                for (int cc = 0; cc < 3; ++cc) qg[c] += rg.m[r][cc] * dr[c].m[r][cc];
        // Through the normalization q = u / |u|.
        const double qdot = qg[0] * geom.q_unit.w + qg[1] * geom.q_unit.x +
                            qg[2] * geom.q_unit.y + qg[3] * geom.q_unit.z;
        const double unit[4] = {geom.q_unit.w, geom.q_unit.x, geom.q_unit.y, geom.q_unit.z};
        for (int c = 0; c < 4; ++c)
            grads.d_rotation[4 * i + c] = (qg[c] - qdot * unit[c]) / geom.q_norm;

        // Camera-space point gradient: mean2d path (J doubles as dmean/dp) plus
        // the J-entry paths.
        const double inv_z = 1.0 / geom.p_cam.z;
        const double inv_z2 = inv_z * inv_z;
        Vec3d gp{J[0][0] * gm.x, J[1][1] * gm.y, J[0][2] * gm.x + J[1][2] * gm.y};
        gp.x += jg[0][2] * (-cam.fx * inv_z2);
        gp.y += jg[1][2] * (-cam.fy * inv_z2);
        gp.z += jg[0][0] * (-cam.fx * inv_z2) + jg[1][1] * (-cam.fy * inv_z2) +
                jg[0][2] * (2.0 * cam.fx * geom.p_cam.x * inv_z2 * inv_z) +
                jg[1][2] * (2.0 * cam.fy * geom.p_cam.y * inv_z2 * inv_z);

        const Vec3d gw = cam.world_to_cam.transposed_mul(gp);
        grads.d_position[3 * i] = gw.x;
        grads.d_position[3 * i + 1] = gw.y;
        grads.d_position[3 * i + 2] = gw.z;
    }
    return grads;
}

template <typename T>
RenderOutput reference_impl(const GaussianCloud& cloud, const DeformedState& state,
                            const Camera& cam, const RenderOptions& opts) {
    const int W = cam.width, H = cam.height, F = cloud.feature_dim();
    const size_t n = cloud.size();
    if (state.size() != n) throw ShapeMismatch("deformed state size does not match cloud");

    struct Entry {
        size_t index;
        double depth;
        Projected proj;
    };
    std::vector<Entry> entries;
    RenderStats stats;
    for (size_t i = 0; i < n; ++i) {
        const Vec3d pos{state.position[3 * i], state.position[3 * i + 1], state.position[3 * i + 2]};
        const Vec3d ls{state.log_scale[3 * i], state.log_scale[3 * i + 1], state.log_scale[3 * i + 2]};
        const Quatd raw{state.rotation[4 * i], state.rotation[4 * i + 1],
                        state.rotation[4 * i + 2], state.rotation[4 * i + 3]};
        auto proj = project_gaussian(pos, ls, raw.normalized(), cam, opts.projection);
        if (!proj) {
            ++stats.culled_behind;
            continue;
        }
        const double det = proj->cov_xx * proj->cov_yy - proj->cov_xy * proj->cov_xy;
        if (!(det >= 1e-12) || !std::isfinite(det)) {
            ++stats.degenerate_cov;
            continue;
        }
        entries.push_back({i, proj->depth, *proj});
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.index < b.index;
    });

    RenderOutput out;
    out.color = ImageD(H, W, 3);
    out.feature = ImageD(H, W, F);
    out.alpha = ImageD(H, W, 1);
    out.transmittance = ImageD(H, W, 1);
    out.stats = stats;
    for (const auto& e : entries) out.depth_order.push_back(uint32_t(e.index));

    std::vector<T> feat_acc(F);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const T px = T(x) + T(0.5), py = T(y) + T(0.5);
            T acc[3] = {T(0), T(0), T(0)};
            std::fill(feat_acc.begin(), feat_acc.end(), T(0));
            T alpha_acc = T(0), trans = T(1);
            for (const auto& e : entries) {
                const double det = e.proj.cov_xx * e.proj.cov_yy - e.proj.cov_xy * e.proj.cov_xy;
                const T pxx = T(e.proj.cov_yy / det), pxy = T(-e.proj.cov_xy / det),
                        pyy = T(e.proj.cov_xx / det);
                const T dx = px - T(e.proj.mean2d.x), dy = py - T(e.proj.mean2d.y);
                const T g = pxx * dx * dx + T(2) * pxy * dx * dy + pyy * dy * dy;
                if (opts.falloff_cutoff > 0 && g > T(opts.falloff_cutoff)) continue;
                const T ahat = T(sigmoid(cloud.opacity_logit[e.index])) * std::exp(T(-0.5) * g);
                const T w = ahat * trans;
                acc[0] += w * T(cloud.color[3 * e.index]);
                acc[1] += w * T(cloud.color[3 * e.index + 1]);
                acc[2] += w * T(cloud.color[3 * e.index + 2]);
                for (int j = 0; j < F; ++j)
                    feat_acc[j] += w * T(cloud.feature[e.index * F + j]);
                alpha_acc += w;
                trans *= (T(1) - ahat);
            }
            out.color.at(y, x, 0) = double(acc[0] + trans * T(opts.background.x));
            out.color.at(y, x, 1) = double(acc[1] + trans * T(opts.background.y));
            out.color.at(y, x, 2) = double(acc[2] + trans * T(opts.background.z));
            for (int j = 0; j < F; ++j) out.feature.at(y, x, j) = double(feat_acc[j]);
            out.alpha.at(y, x) = double(alpha_acc);
            out.transmittance.at(y, x) = double(trans);
        }
    }
    return out;
}

}  // namespace

RenderOutput render(const GaussianCloud& cloud, const DeformedState& state,
                    const Camera& cam, const RenderOptions& opts) {
    return opts.f64 ? forward_impl<double>(cloud, state, cam, opts)
                    : forward_impl<float>(cloud, state, cam, opts);
}

RenderGradients render_backward(const GaussianCloud& cloud, const DeformedState& state,
                                const Camera& cam, const RenderUpstream& upstream,
                                const RenderOptions& opts) {
    return opts.f64 ? backward_impl<double>(cloud, state, cam, upstream, opts)
                    : backward_impl<float>(cloud, state, cam, upstream, opts);
}

RenderOutput reference_render(const GaussianCloud& cloud, const DeformedState& state,
                              const Camera& cam, const RenderOptions& opts) {
    return opts.f64 ? reference_impl<double>(cloud, state, cam, opts)
                    : reference_impl<float>(cloud, state, cam, opts);
}

}  // namespace dho
