#include <doctest.h>

#include <cmath>

#include "dho/codec.hpp"
#include "dho/rng.hpp"

using namespace dho;

namespace {

// 8 one-hot-derived 64-d rows.
std::vector<std::vector<double>> onehot_codebook() {
    std::vector<std::vector<double>> rows(8, std::vector<double>(64, 0.0));
    for (int i = 0; i < 8; ++i) rows[size_t(i)][size_t(i * 7)] = 1.0;
    return rows;
}

double l1_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return s;
}

}  // namespace

TEST_SUITE("codec") {

TEST_CASE("zero training vector has zero loss at initialization") {
    // Biases start at zero, so a zero input maps to zero through tanh layers.
    CodecConfig cfg;
    cfg.input_dim = 16;
    cfg.latent_dim = 4;
    cfg.hidden = 8;
    FeatureCodec codec(cfg);
    Rng rng(3);
    codec.encoder().init_random(rng);
    codec.decoder().init_random(rng);
    const std::vector<std::vector<double>> feats{std::vector<double>(16, 0.0)};
    CHECK(codec_reconstruction_loss(codec, feats, ReconMetric::L1) == doctest::Approx(0.0));
}

TEST_CASE("zero-parameter codec maps any input to zero") {
    CodecConfig cfg;
    cfg.input_dim = 6;
    cfg.latent_dim = 2;
    cfg.hidden = 4;
    FeatureCodec codec(cfg);
    const std::vector<double> out = codec.decode(codec.encode({1.0, -2.0, 3.0, 0.5, -0.25, 4.0}));
    for (double v : out) CHECK(v == 0.0);
}

TEST_CASE("encode output length equals the latent dimension") {
    CodecConfig cfg;
    cfg.input_dim = 10;
    cfg.latent_dim = 3;
    FeatureCodec codec(cfg);
    CHECK(codec.encode(std::vector<double>(10, 0.5)).size() == 3);
    CHECK_THROWS_AS(codec.encode(std::vector<double>(9, 0.5)), DimensionMismatch);
    CHECK_THROWS_AS(codec.decode(std::vector<double>(4, 0.5)), DimensionMismatch);
}

TEST_CASE("ragged training input is rejected") {
    CodecConfig cfg;
    cfg.input_dim = 4;
    cfg.latent_dim = 2;
    std::vector<std::vector<double>> feats{std::vector<double>(4, 0.1),
                                           std::vector<double>(3, 0.1)};
    CHECK_THROWS_AS(train_codec(feats, cfg), DimensionMismatch);
    CHECK_THROWS_AS(train_codec({}, cfg), EmptyList);
}

TEST_CASE("trains the one-hot codebook to low reconstruction error") {
    CodecConfig cfg;
    cfg.input_dim = 64;
    cfg.latent_dim = 8;
    cfg.hidden = 128;
    cfg.iters = 3000;
    cfg.seed = 0;
    const auto rows = onehot_codebook();
    const CodecTrainResult result = train_codec(rows, cfg);
    CHECK(result.final_loss < 0.01);

    // decode(encode(row)) maps each row to itself under nearest-neighbor L1.
    for (size_t k = 0; k < rows.size(); ++k) {
        const std::vector<double> recon = result.codec.decode(result.codec.encode(rows[k]));
        size_t best = 0;
        double best_d = 1e30;
        for (size_t j = 0; j < rows.size(); ++j) {
            const double d = l1_dist(recon, rows[j]);
            if (d < best_d) {
                best_d = d;
                best = j;
            }
        }
        CHECK(best == k);
    }
}

TEST_CASE("memorizes a single repeated vector") {
    CodecConfig cfg;
    cfg.input_dim = 12;
    cfg.latent_dim = 4;
    cfg.hidden = 32;
    cfg.iters = 5000;
    cfg.lr = 2e-4;  // Adam on an L1 objective oscillates at ~lr amplitude
    cfg.seed = 1;
    Rng rng(9);
    std::vector<double> v(12);
    for (auto& x : v) x = rng.normal();
    const CodecTrainResult result = train_codec({v, v, v}, cfg);
    const std::vector<double> recon = result.codec.decode(result.codec.encode(v));
    CHECK(l1_dist(recon, v) < 1e-3 * 12);
}

TEST_CASE("training is deterministic for a fixed seed") {
    CodecConfig cfg;
    cfg.input_dim = 8;
    cfg.latent_dim = 2;
    cfg.hidden = 16;
    cfg.iters = 200;
    cfg.seed = 5;
    Rng rng(11);
    std::vector<std::vector<double>> feats(4, std::vector<double>(8));
    for (auto& f : feats)
        for (auto& v : f) v = rng.normal();
    const CodecTrainResult a = train_codec(feats, cfg);
    const CodecTrainResult b = train_codec(feats, cfg);
    CHECK(a.final_loss == b.final_loss);
    CHECK(a.codec.encoder().weights(0) == b.codec.encoder().weights(0));
    CHECK(a.codec.decoder().weights(1) == b.codec.decoder().weights(1));
}

}  // TEST_SUITE
