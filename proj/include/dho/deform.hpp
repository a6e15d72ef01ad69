#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dho/gaussian.hpp"
#include "dho/mlp.hpp"
#include "dho/rasterize.hpp"

namespace dho {

struct DeformConfig {
    int nx = 16, ny = 16, nz = 16, nt = 8;
    int channels = 16;
    int hidden = 64;
    Vec3d bbox_lo{-2, -2, -2};
    Vec3d bbox_hi{2, 2, 2};
};

// Spatio-temporal feature grid plus a small decoder MLP producing per-Gaussian
// offsets (dX, dr, ds) at a timestamp. Output heads are zero-initialized so a
// fresh field is the identity deformation.
class DeformationField {
public:
    DeformationField() = default;
    explicit DeformationField(const DeformConfig& cfg);

    const DeformConfig& config() const { return cfg_; }
    std::vector<double>& grid() { return grid_; }
    const std::vector<double>& grid() const { return grid_; }
    Mlp& mlp() { return mlp_; }
    const Mlp& mlp() const { return mlp_; }

    void init_random(Rng& rng);  // randomizes the grid and MLP, keeps heads zero

    size_t grid_size() const { return grid_.size(); }
    size_t grid_index(int ix, int iy, int iz, int it, int c) const {
        return ((((size_t(ix) * cfg_.ny + iy) * cfg_.nz + iz) * cfg_.nt + it) * cfg_.channels) + c;
    }

    struct Cache {
        Mlp::Cache mlp;
        // Per-Gaussian corner cell and interpolation fractions.
        std::vector<std::array<int, 4>> cell;
        std::vector<std::array<double, 4>> frac;
        std::vector<std::array<bool, 3>> clamped_axis;  // spatial clamps (no gradient axis)
        uint64_t clamped = 0;
        double inv_cell[3] = {0, 0, 0};  // d(grid coord)/d(world coord) per axis
    };

    // Interpolated grid feature (channels values) at one position/time.
    void sample(const Vec3d& pos, double t, double* out, Cache* cache, size_t slot) const;

private:
    DeformConfig cfg_;
    std::vector<double> grid_;
    Mlp mlp_;
};

struct FieldGrads {
    std::vector<double> grid;
    Mlp::Grads mlp;
    void init_like(const DeformationField& f);
};

// Deformed geometry at time t: position + dX, rotation + dr (renormalized by
// the consumer), log_scale + ds. Features and opacity pass through untouched.
DeformedState deform(const DeformationField& field, const GaussianCloud& cloud, double t,
                     DeformationField::Cache* cache = nullptr);

// Raw per-Gaussian offsets, one 10-vector (dX, dr, ds) per Gaussian.
std::vector<double> deform_offsets(const DeformationField& field, const GaussianCloud& cloud,
                                   double t);

// Backpropagates state gradients into the field. Returns the extra gradient on
// canonical positions that flows through the grid sampling coordinates.
std::vector<double> deform_backward(const DeformationField& field, const GaussianCloud& cloud,
                                    const DeformationField::Cache& cache,
                                    const RenderGradients& state_grads, FieldGrads& grads);

// Mean squared difference between grid-adjacent values along all four axes.
double tv_loss(const DeformationField& field);
void tv_loss_backward(const DeformationField& field, double upstream, std::vector<double>& grid_grad);

}  // namespace dho
