#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "dho/error.hpp"

namespace dho {

struct AdamParams {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;
};

// First/second moment state for one parameter tensor.
struct AdamMoments {
    std::vector<double> m, v;
    int64_t step = 0;

    void resize(size_t n) {
        m.assign(n, 0.0);
        v.assign(n, 0.0);
    }
};

// Textbook bias-corrected Adam update, in place.
void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& moments,
               double lr, const AdamParams& cfg = {});

}  // namespace dho
