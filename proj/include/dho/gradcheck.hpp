#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dho/checkpoint.hpp"

namespace dho {

struct GradCheckConfig {
    uint64_t seed = 0;
    int gaussians = 20;
    int image_size = 16;
    int feature_dim = 4;
    double fd_step = 1e-4;
    double tolerance = 1e-4;
};

struct GradClassReport {
    std::string name;
    size_t parameter_count = 0;
    double max_rel_err = 0;
    size_t worst_index = 0;
    double analytic_at_worst = 0;
    double fd_at_worst = 0;
    bool passed = true;
};

struct GradCheckReport {
    std::vector<GradClassReport> classes;
    double max_rel_err = 0;
    bool passed = true;

    std::string to_string() const;
};

// Test fixture: adds `delta` to one analytic gradient before comparison so a
// broken class is provably flagged.
struct GradCorruption {
    std::string class_name;
    size_t index = 0;
    double delta = 0.0;
};

// Central finite differences against the analytic backward pass on a seeded
// random scene (deformed render + squared pixel residuals; codec via its
// reconstruction loss). The renderer runs in 64-bit mode with the footprint
// cull and early termination disabled so the checked function is smooth; the
// scene generator keeps camera depths and grid coordinates away from sorting
// ties and interpolation-cell boundaries, where the function is not
// differentiable.
GradCheckReport check_gradients(const GradCheckConfig& cfg,
                                const GradCorruption* corruption = nullptr);

}  // namespace dho
