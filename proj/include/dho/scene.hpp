#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dho/gaussian.hpp"
#include "dho/image.hpp"

namespace dho {

// Feature scale levels, from subpart to whole.
enum class Scale : int { Sub = 0, Part = 1, Whole = 2 };
inline const char* scale_dir(Scale s) {
    switch (s) {
        case Scale::Sub: return "s";
        case Scale::Part: return "m";
        default: return "l";
    }
}

enum class Trajectory { Static, Linear, Circular };
enum class PrimitiveKind { Sphere, Box };

struct SceneObject {
    PrimitiveKind kind = PrimitiveKind::Box;
    std::string name = "object";
    Vec3d center{0, 0, 0};       // at t = 0
    Vec3d half_extent{0.5, 0.5, 0.5};  // sphere uses .x as radius
    Trajectory trajectory = Trajectory::Static;
    Vec3d velocity{0, 0, 0};     // Linear: center(t) = center + t * velocity
    double orbit_radius = 0.0;   // Circular: xy-orbit around `center`
    Vec3d base_color{0.8, 0.2, 0.2};

    Vec3d center_at(double t) const;
};

struct SceneSpec {
    std::string name = "scene";
    int image_size = 64;
    int train_views = 20;
    int heldout_views = 4;
    int timestamps = 20;
    double camera_radius = 4.0;
    double camera_height = 0.5;
    double arc_degrees = 60.0;   // total azimuth sweep
    double focal = 77.0;

    bool flat_background = false;   // uniform backdrop, no checker, no clutter
    double checker_contrast = 0.04; // low-contrast checker on the backdrop
    double noise_amplitude = 0.0;   // dark clutter dots ("noisy" scenes)
    double backdrop_z = -1.2;

    int feature_dim_hi = 64;        // codebook embedding dimension
    int init_points = 2000;         // surface samples written for initialization
    std::vector<SceneObject> objects;

    void validate() const;
};

// Codebook rows 0..3 are the canonical reference embeddings, row 4 is the
// background class; object classes follow, tagged with their scale level.
struct CodebookEntry {
    std::string name;
    int scale = -1;  // -1 for canonicals/background (valid at every scale)
};

struct Codebook {
    int dim = 64;
    std::vector<std::vector<double>> rows;
    std::vector<CodebookEntry> entries;

    static constexpr int kCanonicalCount = 4;
    static constexpr uint16_t kBackgroundRow = 4;

    // Rows whose entry name matches, any scale.
    std::vector<uint16_t> find(const std::string& name) const;
};

struct Frame {
    ImageD image;          // HxWx3
    MaskImage mask;        // dynamic-foreground mask
    ClassImage classes[3]; // codebook row ids per scale (indexed by Scale)
    Camera camera;
    int view = 0;
    int time_index = 0;
    double timestamp = 0.0;
};

struct SceneDataset {
    SceneSpec spec;
    Codebook codebook;
    std::vector<Frame> frames;
    std::vector<uint32_t> train_split, heldout_split;
    std::vector<double> init_positions;  // 3K surface samples
    std::vector<double> init_colors;     // 3K
    Vec3d bbox_lo, bbox_hi;
};

// Bundled scene presets: static-textured, dynamic-clean, dynamic-noisy,
// dynamic-multiscale.
SceneSpec bundled_scene(const std::string& name);

// Deterministic ray-traced ground truth; images are 2x2 supersampled, masks
// and class maps come from pixel-center rays.
SceneDataset generate_scene(const SceneSpec& spec, uint64_t seed);

void save_scene(const SceneDataset& dataset, const std::string& dir);
SceneDataset load_scene(const std::string& dir);

}  // namespace dho
