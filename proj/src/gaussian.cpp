#include "dho/gaussian.hpp"

namespace dho {

void GaussianCloud::push(const Gaussian& g) {
    if (int(g.feature.size()) != feature_dim_)
        throw DimensionMismatch("gaussian feature length does not match cloud feature_dim");
    position.insert(position.end(), {g.position.x, g.position.y, g.position.z});
    log_scale.insert(log_scale.end(), {g.log_scale.x, g.log_scale.y, g.log_scale.z});
    const Quatd q = g.rotation.normalized();
    rotation.insert(rotation.end(), {q.w, q.x, q.y, q.z});
    opacity_logit.push_back(g.opacity_logit);
    color.insert(color.end(), {g.color.x, g.color.y, g.color.z});
    feature.insert(feature.end(), g.feature.begin(), g.feature.end());
    generation.push_back(g.generation);
    anchors_valid_ = false;
}

Gaussian GaussianCloud::get(size_t i) const {
    Gaussian g;
    g.position = position_at(i);
    g.log_scale = log_scale_at(i);
    g.rotation = rotation_at(i);
    g.opacity_logit = opacity_logit[i];
    g.color = color_at(i);
    g.feature.assign(feature.begin() + long(i) * feature_dim_,
                     feature.begin() + long(i + 1) * feature_dim_);
    g.generation = generation[i];
    if (anchors_valid_) {
        AnchorState a;
        a.position = {anchor_position[3 * i], anchor_position[3 * i + 1], anchor_position[3 * i + 2]};
        a.log_scale = {anchor_log_scale[3 * i], anchor_log_scale[3 * i + 1], anchor_log_scale[3 * i + 2]};
        a.rotation = {anchor_rotation[4 * i], anchor_rotation[4 * i + 1], anchor_rotation[4 * i + 2], anchor_rotation[4 * i + 3]};
        a.opacity_logit = anchor_opacity_logit[i];
        a.color = {anchor_color[3 * i], anchor_color[3 * i + 1], anchor_color[3 * i + 2]};
        a.feature.assign(anchor_feature.begin() + long(i) * feature_dim_,
                         anchor_feature.begin() + long(i + 1) * feature_dim_);
        g.anchor = std::move(a);
    }
    return g;
}

void GaussianCloud::renormalize_rotations() {
    for (size_t i = 0; i < size(); ++i) {
        Quatd q = rotation_at(i);
        q = q.normalized();
        rotation[4 * i] = q.w;
        rotation[4 * i + 1] = q.x;
        rotation[4 * i + 2] = q.y;
        rotation[4 * i + 3] = q.z;
    }
}

namespace {

template <typename T>
void compact_strided(std::vector<T>& v, const std::vector<uint8_t>& remove, int stride) {
    size_t out = 0;
    for (size_t i = 0; i < remove.size(); ++i) {
        if (remove[i]) continue;
        for (int k = 0; k < stride; ++k) v[out * stride + k] = v[i * stride + k];
        ++out;
    }
    v.resize(out * stride);
}

}  // namespace

void GaussianCloud::compact(const std::vector<uint8_t>& remove) {
    if (remove.size() != size()) throw ShapeMismatch("compact mask size mismatch");
    compact_strided(position, remove, 3);
    compact_strided(log_scale, remove, 3);
    compact_strided(rotation, remove, 4);
    compact_strided(opacity_logit, remove, 1);
    compact_strided(color, remove, 3);
    compact_strided(feature, remove, feature_dim_);
    compact_strided(generation, remove, 1);
    if (anchors_valid_) {
        compact_strided(anchor_position, remove, 3);
        compact_strided(anchor_log_scale, remove, 3);
        compact_strided(anchor_rotation, remove, 4);
        compact_strided(anchor_opacity_logit, remove, 1);
        compact_strided(anchor_color, remove, 3);
        compact_strided(anchor_feature, remove, feature_dim_);
    }
}

void GaussianCloud::record_anchors() {
    anchor_position = position;
    anchor_log_scale = log_scale;
    anchor_rotation = rotation;
    anchor_opacity_logit = opacity_logit;
    anchor_color = color;
    anchor_feature = feature;
    anchors_valid_ = true;
}

Camera make_lookat_camera(const Vec3d& eye, const Vec3d& target, double focal,
                          int width, int height, double timestamp) {
    const Vec3d forward = (target - eye).normalized();
    Vec3d up{0, 1, 0};
    Vec3d right = forward.cross(up);
    if (right.norm() < 1e-9) right = Vec3d{1, 0, 0};
    right = right.normalized();
    const Vec3d cam_up = right.cross(forward);

    Camera cam;
    cam.fx = cam.fy = focal;
    cam.cx = width * 0.5;
    cam.cy = height * 0.5;
    cam.width = width;
    cam.height = height;
    cam.timestamp = timestamp;
    // Rows: camera x (right), y (down), z (forward).
    cam.world_to_cam.m[0][0] = right.x;   cam.world_to_cam.m[0][1] = right.y;   cam.world_to_cam.m[0][2] = right.z;
    cam.world_to_cam.m[1][0] = -cam_up.x; cam.world_to_cam.m[1][1] = -cam_up.y; cam.world_to_cam.m[1][2] = -cam_up.z;
    cam.world_to_cam.m[2][0] = forward.x; cam.world_to_cam.m[2][1] = forward.y; cam.world_to_cam.m[2][2] = forward.z;
    cam.translation = Vec3d{} - (cam.world_to_cam * eye);
    return cam;
}

}  // namespace dho
