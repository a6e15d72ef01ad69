#pragma once

#include <cstdint>
#include <vector>

#include "dho/gaussian.hpp"
#include "dho/image.hpp"
#include "dho/projection.hpp"

namespace dho {

// Per-Gaussian geometry at a timestamp: canonical attributes plus deformation
// offsets. `rotation` may be unnormalized (offset quaternion sum); the
// rasterizer normalizes and differentiates through the normalization.
struct DeformedState {
    std::vector<double> position;   // 3N
    std::vector<double> rotation;   // 4N
    std::vector<double> log_scale;  // 3N

    size_t size() const { return position.size() / 3; }
};

DeformedState canonical_state(const GaussianCloud& cloud);

struct RenderOptions {
    Vec3d background{0, 0, 0};
    // Mahalanobis^2 footprint cull (3-sigma ellipse). <= 0 disables the cull.
    double falloff_cutoff = 9.0;
    // Per-pixel compositing stops once transmittance drops below this. <= 0 disables.
    double early_stop_transmittance = 1e-4;
    bool f64 = false;  // 64-bit accumulation (gradient checks); default is 32-bit
    ProjectionSettings projection;
};

struct RenderStats {
    uint64_t culled_behind = 0;
    uint64_t degenerate_cov = 0;
};

struct RenderOutput {
    ImageD color;          // HxWx3
    ImageD feature;        // HxWxF
    ImageD alpha;          // HxW accumulated opacity
    ImageD transmittance;  // HxW residual transmittance
    std::vector<uint32_t> depth_order;  // visible Gaussians sorted by (depth, index)
    RenderStats stats;
};

// Per-pixel gradients of a scalar loss with respect to the rendered images.
// Empty images are treated as zero.
struct RenderUpstream {
    ImageD d_color;
    ImageD d_feature;
    ImageD d_alpha;
};

struct RenderGradients {
    std::vector<double> d_position;       // 3N, w.r.t. deformed position
    std::vector<double> d_rotation;       // 4N, w.r.t. raw (pre-normalization) quaternion
    std::vector<double> d_log_scale;      // 3N, w.r.t. deformed log scale
    std::vector<double> d_opacity_logit;  // N
    std::vector<double> d_color;          // 3N
    std::vector<double> d_feature;        // F*N
    std::vector<double> densify_signal;   // N, ||dL/dmean2d|| in normalized pixel units
    std::vector<uint8_t> visible;         // N, participated in the forward pass

    void resize(size_t n, int feature_dim);
};

RenderOutput render(const GaussianCloud& cloud, const DeformedState& state,
                    const Camera& cam, const RenderOptions& opts = {});

RenderGradients render_backward(const GaussianCloud& cloud, const DeformedState& state,
                                const Camera& cam, const RenderUpstream& upstream,
                                const RenderOptions& opts = {});

// Serial reference compositor: every Gaussian is evaluated at every pixel in
// front-to-back depth order with no early termination and no footprint
// binning. Kept as the test oracle and the benchmark baseline.
RenderOutput reference_render(const GaussianCloud& cloud, const DeformedState& state,
                              const Camera& cam, const RenderOptions& opts = {});

}  // namespace dho
