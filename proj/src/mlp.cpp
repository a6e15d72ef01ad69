#include <cmath>
#include <cstring>

#include "dho/mlp.hpp"

namespace dho {

Mlp::Mlp(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
    if (sizes_.size() < 2) throw DimensionMismatch("mlp needs at least two layer sizes");
    for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
        weights_.emplace_back(size_t(sizes_[l + 1]) * sizes_[l], 0.0);
        biases_.emplace_back(size_t(sizes_[l + 1]), 0.0);
    }
}

void Mlp::init_random(Rng& rng) {
    for (size_t l = 0; l < weights_.size(); ++l) {
        const double scale = 1.0 / std::sqrt(double(sizes_[l]));
        for (auto& w : weights_[l]) w = rng.normal(0.0, scale);
        for (auto& b : biases_[l]) b = 0.0;
    }
}

void Mlp::zero_output_layer() {
    std::fill(weights_.back().begin(), weights_.back().end(), 0.0);
    std::fill(biases_.back().begin(), biases_.back().end(), 0.0);
}

size_t Mlp::param_count() const {
    size_t n = 0;
    for (size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
}

std::vector<double> Mlp::flatten_params() const {
    std::vector<double> flat;
    flat.reserve(param_count());
    for (size_t l = 0; l < weights_.size(); ++l) {
        flat.insert(flat.end(), weights_[l].begin(), weights_[l].end());
        flat.insert(flat.end(), biases_[l].begin(), biases_[l].end());
    }
    return flat;
}

void Mlp::load_params(const std::vector<double>& flat) {
    if (flat.size() != param_count()) throw DimensionMismatch("mlp parameter count mismatch");
    size_t off = 0;
    for (size_t l = 0; l < weights_.size(); ++l) {
        std::copy(flat.begin() + off, flat.begin() + off + weights_[l].size(), weights_[l].begin());
        off += weights_[l].size();
        std::copy(flat.begin() + off, flat.begin() + off + biases_[l].size(), biases_[l].begin());
        off += biases_[l].size();
    }
}

void Mlp::forward(const double* in, size_t batch, Cache& cache) const {
    cache.batch = batch;
    cache.act.resize(sizes_.size());
    cache.act[0].assign(in, in + batch * sizes_[0]);
    for (size_t l = 0; l < weights_.size(); ++l) {
        const int nin = sizes_[l], nout = sizes_[l + 1];
        const bool last = (l + 1 == weights_.size());
        cache.act[l + 1].assign(batch * nout, 0.0);
        const double* w = weights_[l].data();
        const double* b = biases_[l].data();
        const double* src = cache.act[l].data();
        double* dst = cache.act[l + 1].data();
        for (size_t r = 0; r < batch; ++r) {
            const double* x = src + r * nin;
            double* y = dst + r * nout;
            for (int o = 0; o < nout; ++o) {
                double acc = b[o];
                const double* wrow = w + size_t(o) * nin;
                for (int j = 0; j < nin; ++j) acc += wrow[j] * x[j];
                y[o] = last ? acc : std::tanh(acc);
            }
        }
    }
}

std::vector<double> Mlp::forward_one(const std::vector<double>& in) const {
    if (int(in.size()) != input_dim()) throw DimensionMismatch("mlp input size mismatch");
    Cache cache;
    forward(in.data(), 1, cache);
    return cache.act.back();
}

void Mlp::Grads::init_like(const Mlp& mlp) {
    weights.resize(mlp.layer_count());
    biases.resize(mlp.layer_count());
    for (int l = 0; l < mlp.layer_count(); ++l) {
        weights[l].assign(mlp.weights(l).size(), 0.0);
        biases[l].assign(mlp.biases(l).size(), 0.0);
    }
}

void Mlp::Grads::clear() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
}

void Mlp::backward(const Cache& cache, const double* d_out, double* d_in, Grads& grads) const {
    const size_t batch = cache.batch;
    std::vector<double> delta(d_out, d_out + batch * sizes_.back());
    std::vector<double> prev;
    for (int l = layer_count() - 1; l >= 0; --l) {
        const int nin = sizes_[l], nout = sizes_[l + 1];
        const bool last = (l + 1 == layer_count());
        const double* w = weights_[l].data();
        const double* x = cache.act[l].data();
        const double* y = cache.act[l + 1].data();
        if (!last) {
            // tanh' = 1 - y^2 using the cached activation
            for (size_t r = 0; r < batch; ++r)
                for (int o = 0; o < nout; ++o) {
                    const double v = y[r * nout + o];
                    delta[r * nout + o] *= (1.0 - v * v);
                }
        }
        double* wg = grads.weights[l].data();
        double* bg = grads.biases[l].data();
        prev.assign(batch * nin, 0.0);
        for (size_t r = 0; r < batch; ++r) {
            const double* xr = x + r * nin;
            const double* dr = delta.data() + r * nout;
            double* pr = prev.data() + r * nin;
            for (int o = 0; o < nout; ++o) {
                const double d = dr[o];
                bg[o] += d;
                double* wgrow = wg + size_t(o) * nin;
                const double* wrow = w + size_t(o) * nin;
                for (int j = 0; j < nin; ++j) {
                    wgrow[j] += d * xr[j];
                    pr[j] += d * wrow[j];
                }
            }
        }
        delta.swap(prev);
    }
    if (d_in) std::memcpy(d_in, delta.data(), sizeof(double) * batch * sizes_[0]);
}

}  // namespace dho
