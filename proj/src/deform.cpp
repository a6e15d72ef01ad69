#include <algorithm>
#include <cmath>

#include "dho/deform.hpp"

namespace dho {

DeformationField::DeformationField(const DeformConfig& cfg) : cfg_(cfg) {
    grid_.assign(size_t(cfg.nx) * cfg.ny * cfg.nz * cfg.nt * cfg.channels, 0.0);
    mlp_ = Mlp({cfg.channels + 1, cfg.hidden, cfg.hidden, 10});
    mlp_.zero_output_layer();
}

void DeformationField::init_random(Rng& rng) {
    for (auto& v : grid_) v = rng.normal(0.0, 0.1);
    mlp_.init_random(rng);
    mlp_.zero_output_layer();
}

namespace {

struct AxisCoord {
    int lo;
    double frac;
    bool clamped;
};

AxisCoord axis_coord(double world, double lo, double hi, int n, bool* hit_clamp) {
    AxisCoord c{0, 0.0, false};
    if (n <= 1) return c;
    double g = (world - lo) / (hi - lo) * double(n - 1);
    if (g < 0.0) { g = 0.0; c.clamped = true; }
    if (g > double(n - 1)) { g = double(n - 1); c.clamped = true; }
    if (c.clamped && hit_clamp) *hit_clamp = true;
    c.lo = std::min(int(g), n - 2);
    c.frac = g - double(c.lo);
    return c;
}

}  // namespace

void DeformationField::sample(const Vec3d& pos, double t, double* out, Cache* cache,
                              size_t slot) const {
    bool clamped = false;
    const AxisCoord ax = axis_coord(pos.x, cfg_.bbox_lo.x, cfg_.bbox_hi.x, cfg_.nx, &clamped);
    const AxisCoord ay = axis_coord(pos.y, cfg_.bbox_lo.y, cfg_.bbox_hi.y, cfg_.ny, &clamped);
    const AxisCoord az = axis_coord(pos.z, cfg_.bbox_lo.z, cfg_.bbox_hi.z, cfg_.nz, &clamped);
    const AxisCoord at = axis_coord(t, 0.0, 1.0, cfg_.nt, nullptr);

    std::fill(out, out + cfg_.channels, 0.0);
    const AxisCoord axes[4] = {ax, ay, az, at};
    const int dims[4] = {cfg_.nx, cfg_.ny, cfg_.nz, cfg_.nt};
    for (int corner = 0; corner < 16; ++corner) {
        double w = 1.0;
        int idx[4];
        for (int a = 0; a < 4; ++a) {
            const int b = (corner >> a) & 1;
            w *= b ? axes[a].frac : (1.0 - axes[a].frac);
            idx[a] = std::min(axes[a].lo + b, dims[a] - 1);
        }
        if (w == 0.0) continue;
        const size_t base = grid_index(idx[0], idx[1], idx[2], idx[3], 0);
        for (int c = 0; c < cfg_.channels; ++c) out[c] += w * grid_[base + c];
    }

    if (cache) {
        if (clamped) ++cache->clamped;
        cache->cell[slot] = {ax.lo, ay.lo, az.lo, at.lo};
        cache->frac[slot] = {ax.frac, ay.frac, az.frac, at.frac};
        cache->clamped_axis[slot] = {ax.clamped, ay.clamped, az.clamped};
    }
}

void FieldGrads::init_like(const DeformationField& f) {
    grid.assign(f.grid_size(), 0.0);
    mlp.init_like(f.mlp());
}

DeformedState deform(const DeformationField& field, const GaussianCloud& cloud, double t,
                     DeformationField::Cache* cache) {
    const size_t n = cloud.size();
    const auto& cfg = field.config();
    const int cin = cfg.channels + 1;

    if (cache) {
        cache->cell.resize(n);
        cache->frac.resize(n);
        cache->clamped_axis.resize(n);
        cache->clamped = 0;
        cache->inv_cell[0] = cfg.nx > 1 ? double(cfg.nx - 1) / (cfg.bbox_hi.x - cfg.bbox_lo.x) : 0.0;
        cache->inv_cell[1] = cfg.ny > 1 ? double(cfg.ny - 1) / (cfg.bbox_hi.y - cfg.bbox_lo.y) : 0.0;
        cache->inv_cell[2] = cfg.nz > 1 ? double(cfg.nz - 1) / (cfg.bbox_hi.z - cfg.bbox_lo.z) : 0.0;
    }

    std::vector<double> inputs(n * size_t(cin));
    for (size_t i = 0; i < n; ++i) {
        field.sample(cloud.position_at(i), t, &inputs[i * cin], cache, i);
        inputs[i * cin + cfg.channels] = t;
    }

    Mlp::Cache local;
    Mlp::Cache& mlp_cache = cache ? cache->mlp : local;
    field.mlp().forward(inputs.data(), n, mlp_cache);
    const std::vector<double>& out = mlp_cache.act.back();

    DeformedState state;
    state.position.resize(3 * n);
    state.rotation.resize(4 * n);
    state.log_scale.resize(3 * n);
    for (size_t i = 0; i < n; ++i) {
        const double* o = &out[i * 10];
        for (int k = 0; k < 3; ++k) state.position[3 * i + k] = cloud.position[3 * i + k] + o[k];
        for (int k = 0; k < 4; ++k) state.rotation[4 * i + k] = cloud.rotation[4 * i + k] + o[3 + k];
        for (int k = 0; k < 3; ++k) state.log_scale[3 * i + k] = cloud.log_scale[3 * i + k] + o[7 + k];
    }
    return state;
}

std::vector<double> deform_offsets(const DeformationField& field, const GaussianCloud& cloud,
                                   double t) {
    const size_t n = cloud.size();
    const auto& cfg = field.config();
    const int cin = cfg.channels + 1;
    std::vector<double> inputs(n * size_t(cin));
    for (size_t i = 0; i < n; ++i) {
        field.sample(cloud.position_at(i), t, &inputs[i * cin], nullptr, i);
        inputs[i * cin + cfg.channels] = t;
    }
    Mlp::Cache cache;
    field.mlp().forward(inputs.data(), n, cache);
    return cache.act.back();
}

std::vector<double> deform_backward(const DeformationField& field, const GaussianCloud& cloud,
                                    const DeformationField::Cache& cache,
                                    const RenderGradients& state_grads, FieldGrads& grads) {
    const size_t n = cloud.size();
    const auto& cfg = field.config();
    const int cin = cfg.channels + 1;

    std::vector<double> d_out(n * 10);
    for (size_t i = 0; i < n; ++i) {
        double* o = &d_out[i * 10];
        for (int k = 0; k < 3; ++k) o[k] = state_grads.d_position[3 * i + k];
        for (int k = 0; k < 4; ++k) o[3 + k] = state_grads.d_rotation[4 * i + k];
        for (int k = 0; k < 3; ++k) o[7 + k] = state_grads.d_log_scale[3 * i + k];
    }

    std::vector<double> d_in(n * size_t(cin));
    field.mlp().backward(cache.mlp, d_out.data(), d_in.data(), grads.mlp);

    // Scatter grid-feature gradients into the 16 interpolation corners and the
    // sampling coordinates (extra gradient on canonical positions).
    std::vector<double> d_position(3 * n, 0.0);
    const int dims[4] = {cfg.nx, cfg.ny, cfg.nz, cfg.nt};
    for (size_t i = 0; i < n; ++i) {
        const double* df = &d_in[i * cin];
        const auto& cell = cache.cell[i];
        const auto& frac = cache.frac[i];
        for (int corner = 0; corner < 16; ++corner) {
            double w = 1.0;
            double dw[4];  // d(weight)/d(frac_a) with the other axes factored in
            for (int a = 0; a < 4; ++a) dw[a] = 1.0;
            int idx[4];
            for (int a = 0; a < 4; ++a) {
                const int b = (corner >> a) & 1;
                const double fa = b ? frac[a] : (1.0 - frac[a]);
                w *= fa;
                for (int o = 0; o < 4; ++o)
                    if (o != a) dw[o] *= fa;
                dw[a] *= b ? 1.0 : -1.0;
                idx[a] = std::min(cell[a] + b, dims[a] - 1);
            }
            const size_t base = field.grid_index(idx[0], idx[1], idx[2], idx[3], 0);
            double dot = 0.0;
            for (int c = 0; c < cfg.channels; ++c) {
                grads.grid[base + c] += w * df[c];
                dot += df[c] * field.grid()[base + c];
            }
            for (int a = 0; a < 3; ++a) {
                if (dims[a] <= 1 || cache.clamped_axis[i][a]) continue;
                d_position[3 * i + a] += dot * dw[a] * cache.inv_cell[a];
            }
        }
    }
    return d_position;
}

double tv_loss(const DeformationField& field) {
    const auto& cfg = field.config();
    const auto& g = field.grid();
    const int dims[4] = {cfg.nx, cfg.ny, cfg.nz, cfg.nt};
    double sum = 0.0;
    size_t pairs = 0;
    for (int axis = 0; axis < 4; ++axis) {
        if (dims[axis] <= 1) continue;
        for (int ix = 0; ix < cfg.nx; ++ix)
            for (int iy = 0; iy < cfg.ny; ++iy)
                for (int iz = 0; iz < cfg.nz; ++iz)
                    for (int it = 0; it < cfg.nt; ++it) {
                        int jx = ix, jy = iy, jz = iz, jt = it;
                        if (axis == 0) ++jx;
                        if (axis == 1) ++jy;
                        if (axis == 2) ++jz;
                        if (axis == 3) ++jt;
                        if (jx >= cfg.nx || jy >= cfg.ny || jz >= cfg.nz || jt >= cfg.nt) continue;
                        const size_t a = field.grid_index(ix, iy, iz, it, 0);
                        const size_t b = field.grid_index(jx, jy, jz, jt, 0);
                        for (int c = 0; c < cfg.channels; ++c) {
                            const double d = g[a + c] - g[b + c];
                            sum += d * d;
                            ++pairs;
                        }
                    }
    }
    return pairs ? sum / double(pairs) : 0.0;
}

void tv_loss_backward(const DeformationField& field, double upstream,
                      std::vector<double>& grid_grad) {
    const auto& cfg = field.config();
    const auto& g = field.grid();
    const int dims[4] = {cfg.nx, cfg.ny, cfg.nz, cfg.nt};
    size_t pairs = 0;
    for (int axis = 0; axis < 4; ++axis) {
        if (dims[axis] <= 1) continue;
        size_t axis_pairs = 1;
        for (int a = 0; a < 4; ++a)
            axis_pairs *= size_t(a == axis ? dims[a] - 1 : dims[a]);
        pairs += axis_pairs * cfg.channels;
    }
    if (!pairs) return;
    const double scale = 2.0 * upstream / double(pairs);
    for (int axis = 0; axis < 4; ++axis) {
        if (dims[axis] <= 1) continue;
        for (int ix = 0; ix < cfg.nx; ++ix)
            for (int iy = 0; iy < cfg.ny; ++iy)
                for (int iz = 0; iz < cfg.nz; ++iz)
                    for (int it = 0; it < cfg.nt; ++it) {
                        int jx = ix, jy = iy, jz = iz, jt = it;
                        if (axis == 0) ++jx;
                        if (axis == 1) ++jy;
                        if (axis == 2) ++jz;
                        if (axis == 3) ++jt;
                        if (jx >= cfg.nx || jy >= cfg.ny || jz >= cfg.nz || jt >= cfg.nt) continue;
                        const size_t a = field.grid_index(ix, iy, iz, it, 0);
                        const size_t b = field.grid_index(jx, jy, jz, jt, 0);
                        for (int c = 0; c < cfg.channels; ++c) {
                            const double d = scale * (g[a + c] - g[b + c]);
                            grid_grad[a + c] += d;
                            grid_grad[b + c] -= d;
                        }
                    }
    }
}

}  // namespace dho
