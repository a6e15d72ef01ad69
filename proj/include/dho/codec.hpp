#pragma once

#include <cstdint>
#include <vector>

#include "dho/mlp.hpp"

namespace dho {

enum class ReconMetric { L1, L2 };

struct CodecConfig {
    int input_dim = 64;   // high-dimensional semantic feature size
    int latent_dim = 8;   // per-Gaussian feature size
    int hidden = 128;
    int iters = 4000;
    double lr = 1e-3;
    ReconMetric metric = ReconMetric::L1;
    uint64_t seed = 0;
};

// Scene autoencoder: encoder compresses semantic features to the per-Gaussian
// latent, decoder lifts latents back for querying. Trained up front, then frozen.
class FeatureCodec {
public:
    FeatureCodec() = default;
    explicit FeatureCodec(const CodecConfig& cfg);

    const CodecConfig& config() const { return cfg_; }
    Mlp& encoder() { return encoder_; }
    const Mlp& encoder() const { return encoder_; }
    Mlp& decoder() { return decoder_; }
    const Mlp& decoder() const { return decoder_; }

    std::vector<double> encode(const std::vector<double>& feature) const;
    std::vector<double> decode(const std::vector<double>& latent) const;

    // Batched decode of an interleaved latent buffer (count rows).
    std::vector<double> decode_batch(const double* latents, size_t count) const;

private:
    CodecConfig cfg_;
    Mlp encoder_, decoder_;
};

// Mean reconstruction error of decode(encode(x)) over the set, averaged over
// samples and coordinates. Optionally accumulates parameter gradients.
double codec_reconstruction_loss(const FeatureCodec& codec,
                                 const std::vector<std::vector<double>>& features,
                                 ReconMetric metric, Mlp::Grads* enc_grads = nullptr,
                                 Mlp::Grads* dec_grads = nullptr);

struct CodecTrainResult {
    FeatureCodec codec;
    double final_loss = 0.0;
};

CodecTrainResult train_codec(const std::vector<std::vector<double>>& features,
                             const CodecConfig& cfg);

}  // namespace dho
