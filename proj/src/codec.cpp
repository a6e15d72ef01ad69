#include <cmath>

#include "dho/adam.hpp"
#include "dho/codec.hpp"

namespace dho {

FeatureCodec::FeatureCodec(const CodecConfig& cfg)
    : cfg_(cfg),
      encoder_({cfg.input_dim, cfg.hidden, cfg.latent_dim}),
      decoder_({cfg.latent_dim, cfg.hidden, cfg.input_dim}) {}

std::vector<double> FeatureCodec::encode(const std::vector<double>& feature) const {
    if (int(feature.size()) != cfg_.input_dim)
        throw DimensionMismatch("encode: feature dimension mismatch");
    return encoder_.forward_one(feature);
}

std::vector<double> FeatureCodec::decode(const std::vector<double>& latent) const {
    if (int(latent.size()) != cfg_.latent_dim)
        throw DimensionMismatch("decode: latent dimension mismatch");
    return decoder_.forward_one(latent);
}

std::vector<double> FeatureCodec::decode_batch(const double* latents, size_t count) const {
    Mlp::Cache cache;
    decoder_.forward(latents, count, cache);
    return cache.act.back();
}

double codec_reconstruction_loss(const FeatureCodec& codec,
                                 const std::vector<std::vector<double>>& features,
                                 ReconMetric metric, Mlp::Grads* enc_grads,
                                 Mlp::Grads* dec_grads) {
    if (features.empty()) throw EmptyList("codec loss needs at least one feature vector");
    const int d = codec.config().input_dim;
    const size_t n = features.size();
    std::vector<double> batch(n * size_t(d));
    for (size_t i = 0; i < n; ++i) {
        if (int(features[i].size()) != d)
            throw DimensionMismatch("codec loss: ragged feature set");
        std::copy(features[i].begin(), features[i].end(), batch.begin() + long(i) * d);
    }

    Mlp::Cache enc_cache, dec_cache;
    codec.encoder().forward(batch.data(), n, enc_cache);
    codec.decoder().forward(enc_cache.act.back().data(), n, dec_cache);
    const std::vector<double>& recon = dec_cache.act.back();

    const double inv = 1.0 / double(n * size_t(d));
    double loss = 0.0;
    std::vector<double> d_recon(recon.size());
    for (size_t i = 0; i < recon.size(); ++i) {
        const double r = recon[i] - batch[i];
        if (metric == ReconMetric::L1) {
            loss += std::abs(r) * inv;
            d_recon[i] = (r > 0 ? 1.0 : (r < 0 ? -1.0 : 0.0)) * inv;
        } else {
            loss += r * r * inv;
            d_recon[i] = 2.0 * r * inv;
        }
    }

    if (enc_grads && dec_grads) {
        std::vector<double> d_latent(n * size_t(codec.config().latent_dim));
        codec.decoder().backward(dec_cache, d_recon.data(), d_latent.data(), *dec_grads);
        codec.encoder().backward(enc_cache, d_latent.data(), nullptr, *enc_grads);
    }
    return loss;
}

CodecTrainResult train_codec(const std::vector<std::vector<double>>& features,
                             const CodecConfig& cfg) {
    if (features.empty()) throw EmptyList("train_codec needs at least one feature vector");
    for (const auto& f : features)
        if (int(f.size()) != cfg.input_dim)
            throw DimensionMismatch("train_codec: ragged feature set");

    CodecTrainResult result;
    result.codec = FeatureCodec(cfg);
    Rng rng(cfg.seed);
    result.codec.encoder().init_random(rng);
    result.codec.decoder().init_random(rng);

    Mlp::Grads enc_grads, dec_grads;
    enc_grads.init_like(result.codec.encoder());
    dec_grads.init_like(result.codec.decoder());

    std::vector<AdamMoments> enc_m(2 * result.codec.encoder().layer_count());
    std::vector<AdamMoments> dec_m(2 * result.codec.decoder().layer_count());

    for (int it = 0; it < cfg.iters; ++it) {
        enc_grads.clear();
        dec_grads.clear();
        codec_reconstruction_loss(result.codec, features, cfg.metric, &enc_grads, &dec_grads);
        for (int l = 0; l < result.codec.encoder().layer_count(); ++l) {
            adam_step(result.codec.encoder().weights(l), enc_grads.weights[l], enc_m[2 * l], cfg.lr);
            adam_step(result.codec.encoder().biases(l), enc_grads.biases[l], enc_m[2 * l + 1], cfg.lr);
        }
        for (int l = 0; l < result.codec.decoder().layer_count(); ++l) {
            adam_step(result.codec.decoder().weights(l), dec_grads.weights[l], dec_m[2 * l], cfg.lr);
            adam_step(result.codec.decoder().biases(l), dec_grads.biases[l], dec_m[2 * l + 1], cfg.lr);
        }
    }
    result.final_loss = codec_reconstruction_loss(result.codec, features, cfg.metric);
    return result;
}

}  // namespace dho
