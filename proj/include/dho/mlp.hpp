#pragma once

#include <vector>

#include "dho/error.hpp"
#include "dho/rng.hpp"

namespace dho {

// Small dense MLP with tanh hidden layers and a linear output layer.
class Mlp {
public:
    Mlp() = default;
    explicit Mlp(std::vector<int> layer_sizes);

    int input_dim() const { return sizes_.empty() ? 0 : sizes_.front(); }
    int output_dim() const { return sizes_.empty() ? 0 : sizes_.back(); }
    const std::vector<int>& layer_sizes() const { return sizes_; }
    int layer_count() const { return int(weights_.size()); }

    void init_random(Rng& rng);
    void zero_output_layer();

    std::vector<double>& weights(int layer) { return weights_[layer]; }
    const std::vector<double>& weights(int layer) const { return weights_[layer]; }
    std::vector<double>& biases(int layer) { return biases_[layer]; }
    const std::vector<double>& biases(int layer) const { return biases_[layer]; }

    size_t param_count() const;
    std::vector<double> flatten_params() const;
    void load_params(const std::vector<double>& flat);

    // Activations per layer for one batch of inputs (batch-major rows).
    struct Cache {
        size_t batch = 0;
        std::vector<std::vector<double>> act;  // act[0] = input, act.back() = output
    };

    void forward(const double* in, size_t batch, Cache& cache) const;
    std::vector<double> forward_one(const std::vector<double>& in) const;

    struct Grads {
        std::vector<std::vector<double>> weights, biases;
        void init_like(const Mlp& mlp);
        void clear();
    };

    // Accumulates parameter gradients and writes input gradients (batch rows).
    void backward(const Cache& cache, const double* d_out, double* d_in, Grads& grads) const;

private:
    std::vector<int> sizes_;
    std::vector<std::vector<double>> weights_;  // [l]: sizes[l+1] x sizes[l], row-major
    std::vector<std::vector<double>> biases_;   // [l]: sizes[l+1]
};

}  // namespace dho
