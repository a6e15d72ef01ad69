#include <cmath>

#include "dho/adam.hpp"

namespace dho {

void adam_step(std::span<double> params, std::span<const double> grads, AdamMoments& moments,
               double lr, const AdamParams& cfg) {
    if (params.size() != grads.size()) throw ShapeMismatch("adam_step: params/grads size mismatch");
    if (moments.m.size() != params.size()) {
        if (moments.m.empty() && moments.step == 0)
            moments.resize(params.size());
        else
            throw ShapeMismatch("adam_step: moment size mismatch");
    }
    ++moments.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, double(moments.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, double(moments.step));
    for (size_t i = 0; i < params.size(); ++i) {
        moments.m[i] = cfg.beta1 * moments.m[i] + (1.0 - cfg.beta1) * grads[i];
        moments.v[i] = cfg.beta2 * moments.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
        const double mhat = moments.m[i] / bc1;
        const double vhat = moments.v[i] / bc2;
        params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

}  // namespace dho
