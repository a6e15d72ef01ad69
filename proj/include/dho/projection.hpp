#pragma once

#include <optional>

#include "dho/gaussian.hpp"
#include "dho/linalg.hpp"

namespace dho {

// Sigma = R * diag(exp(ls))^2 * R^T. Quaternion must be unit-norm.
Mat3d build_covariance(const Vec3d& log_scale, const Quatd& rotation);

struct Projected {
    Vec2d mean2d;     // pixel coordinates
    double cov_xx = 0, cov_xy = 0, cov_yy = 0;  // 2D covariance (low-pass floor included)
    double depth = 0; // camera-space z
};

struct ProjectionSettings {
    double near_plane = 0.01;
    double lowpass = 0.3;  // added to both cov2d diagonal entries, in px^2
};

// EWA projection of one Gaussian. Empty when the mean is at or behind the near
// plane; the caller culls.
std::optional<Projected> project_gaussian(const Vec3d& position, const Vec3d& log_scale,
                                          const Quatd& rotation, const Camera& cam,
                                          const ProjectionSettings& s = {});

struct Activated {
    double opacity;   // sigmoid(opacity_logit)
    Vec3d scale;      // exp(log_scale)
};

inline Activated activate(double opacity_logit, const Vec3d& log_scale) {
    return {sigmoid(opacity_logit),
            {std::exp(log_scale.x), std::exp(log_scale.y), std::exp(log_scale.z)}};
}

inline Activated activate(const Gaussian& g) { return activate(g.opacity_logit, g.log_scale); }

}  // namespace dho
