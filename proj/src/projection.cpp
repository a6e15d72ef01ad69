#include "dho/projection.hpp"

namespace dho {

Mat3d build_covariance(const Vec3d& log_scale, const Quatd& rotation) {
    const Mat3d r = quat_to_matrix(rotation);
    const Vec3d s{std::exp(log_scale.x), std::exp(log_scale.y), std::exp(log_scale.z)};
    // M = R * diag(s); Sigma = M * M^T.
    Mat3d m;
    for (int i = 0; i < 3; ++i) {
        m.m[i][0] = r.m[i][0] * s.x;
        m.m[i][1] = r.m[i][1] * s.y;
        m.m[i][2] = r.m[i][2] * s.z;
    }
    Mat3d sigma;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            sigma.m[i][j] = m.m[i][0] * m.m[j][0] + m.m[i][1] * m.m[j][1] + m.m[i][2] * m.m[j][2];
    return sigma;
}

std::optional<Projected> project_gaussian(const Vec3d& position, const Vec3d& log_scale,
                                          const Quatd& rotation, const Camera& cam,
                                          const ProjectionSettings& s) {
    const Vec3d p = cam.to_camera(position);
    if (p.z <= s.near_plane) return std::nullopt;

    const Mat3d sigma = build_covariance(log_scale, rotation);
    const Mat3d& w = cam.world_to_cam;
    const Mat3d cov_cam = w * sigma * w.transposed();

    const double inv_z = 1.0 / p.z;
    // Perspective Jacobian J (2x3) evaluated at the camera-space mean.
    const double j00 = cam.fx * inv_z;
    const double j02 = -cam.fx * p.x * inv_z * inv_z;
    const double j11 = cam.fy * inv_z;
    const double j12 = -cam.fy * p.y * inv_z * inv_z;

    // cov2d = J * cov_cam * J^T with J sparse as above.
    const auto& c = cov_cam.m;
    const double a0 = j00 * c[0][0] + j02 * c[2][0];
    const double a2 = j00 * c[0][2] + j02 * c[2][2];
    const double b0 = j11 * c[1][0] + j12 * c[2][0];
    const double b1 = j11 * c[1][1] + j12 * c[2][1];
    const double b2 = j11 * c[1][2] + j12 * c[2][2];

    Projected out;
    out.cov_xx = a0 * j00 + a2 * j02 + s.lowpass;
    out.cov_xy = b0 * j00 + b2 * j02;
    out.cov_yy = b1 * j11 + b2 * j12 + s.lowpass;
    out.mean2d = {cam.fx * p.x * inv_z + cam.cx, cam.fy * p.y * inv_z + cam.cy};
    out.depth = p.z;
    return out;
}

}  // namespace dho
