#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dho/error.hpp"
#include "dho/linalg.hpp"

namespace dho {

// Snapshot of the per-Gaussian attributes used by the anchor constraint.
struct AnchorState {
    Vec3d position;
    Vec3d log_scale;
    Quatd rotation;
    double opacity_logit = 0.0;
    Vec3d color;
    std::vector<double> feature;
};

struct Gaussian {
    Vec3d position;
    Vec3d log_scale;                 // activated scale = exp(log_scale)
    Quatd rotation;                  // unit quaternion
    double opacity_logit = 0.0;      // activated opacity = sigmoid(opacity_logit)
    Vec3d color;                     // RGB in [0,1]
    std::vector<double> feature;     // semantic latent, length = cloud feature_dim
    uint32_t generation = 0;         // densification round this Gaussian was created in
    std::optional<AnchorState> anchor;
};

// Structure-of-arrays Gaussian set. All per-attribute vectors stay index-aligned.
class GaussianCloud {
public:
    explicit GaussianCloud(int feature_dim = 8) : feature_dim_(feature_dim) {}

    size_t size() const { return opacity_logit.size(); }
    int feature_dim() const { return feature_dim_; }
    uint32_t round() const { return round_; }
    void set_round(uint32_t r) { round_ = r; }

    void push(const Gaussian& g);
    Gaussian get(size_t i) const;

    Vec3d position_at(size_t i) const { return {position[3 * i], position[3 * i + 1], position[3 * i + 2]}; }
    Vec3d log_scale_at(size_t i) const { return {log_scale[3 * i], log_scale[3 * i + 1], log_scale[3 * i + 2]}; }
    Quatd rotation_at(size_t i) const { return {rotation[4 * i], rotation[4 * i + 1], rotation[4 * i + 2], rotation[4 * i + 3]}; }
    Vec3d color_at(size_t i) const { return {color[3 * i], color[3 * i + 1], color[3 * i + 2]}; }

    // Renormalizes every quaternion in place. Idempotent.
    void renormalize_rotations();

    // Removes Gaussians flagged in `remove` (true = drop). Anchors follow.
    void compact(const std::vector<uint8_t>& remove);

    bool has_anchors() const { return anchors_valid_; }
    void record_anchors();

    // Live attributes.
    std::vector<double> position;       // 3N
    std::vector<double> log_scale;      // 3N
    std::vector<double> rotation;       // 4N
    std::vector<double> opacity_logit;  // N
    std::vector<double> color;          // 3N
    std::vector<double> feature;        // feature_dim * N
    std::vector<uint32_t> generation;   // N

    // Anchor snapshots, same layout as the live attributes.
    std::vector<double> anchor_position;
    std::vector<double> anchor_log_scale;
    std::vector<double> anchor_rotation;
    std::vector<double> anchor_opacity_logit;
    std::vector<double> anchor_color;
    std::vector<double> anchor_feature;

private:
    int feature_dim_;
    uint32_t round_ = 0;
    bool anchors_valid_ = false;
};

struct Camera {
    double fx = 1, fy = 1;
    double cx = 0, cy = 0;
    int width = 1, height = 1;
    Mat3d world_to_cam = Mat3d::identity();
    Vec3d translation;               // camera-space point = world_to_cam * p + translation
    double timestamp = 0.0;          // normalized to [0,1]

    Vec3d to_camera(const Vec3d& p) const { return world_to_cam * p + translation; }
};

// Camera placed at `eye` looking at `target` (y-up), z increasing into the scene.
Camera make_lookat_camera(const Vec3d& eye, const Vec3d& target, double focal,
                          int width, int height, double timestamp);

}  // namespace dho
