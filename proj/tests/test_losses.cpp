#include <doctest.h>

#include <cmath>

#include "dho/losses.hpp"
#include "dho/rng.hpp"

using namespace dho;

namespace {

GaussianCloud anchored_cloud(Rng& rng, int n, int fd = 4) {
    GaussianCloud cloud(fd);
    for (int i = 0; i < n; ++i) {
        Gaussian g;
        g.position = {rng.normal(), rng.normal(), rng.normal()};
        g.log_scale = {rng.normal(), rng.normal(), rng.normal()};
        Quatd q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        g.rotation = q.normalized();
        g.opacity_logit = rng.normal();
        g.color = {rng.uniform(), rng.uniform(), rng.uniform()};
        g.feature.resize(fd);
        for (auto& f : g.feature) f = rng.normal();
        cloud.push(g);
    }
    anchor_record(cloud);
    return cloud;
}

// Independent scalar Sobel: double loop, explicit kernels, its own grayscale.
double sobel_density_oracle(const ImageD& img, double frac) {
    const int H = img.height, W = img.width;
    std::vector<double> gray(size_t(H) * W);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            gray[size_t(y) * W + x] = img.channels == 1
                                          ? img.at(y, x)
                                          : 0.299 * img.at(y, x, 0) + 0.587 * img.at(y, x, 1) +
                                                0.114 * img.at(y, x, 2);
    const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    const int ky[3][3] = {{-1, -2, -1}, {0, 0, 0}, {1, 2, 1}};
    std::vector<double> mag(size_t(H) * W, 0.0);
    double mx = 0;
    for (int y = 1; y < H - 1; ++y)
        for (int x = 1; x < W - 1; ++x) {
            double gx = 0, gy = 0;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx) {
                    const double v = gray[size_t(y + dy) * W + (x + dx)];
                    gx += kx[dy + 1][dx + 1] * v;
                    gy += ky[dy + 1][dx + 1] * v;
                }
            const double m = std::sqrt(gx * gx + gy * gy);
            mag[size_t(y) * W + x] = m;
            mx = std::max(mx, m);
        }
    if (mx <= 0) return 0;
    size_t count = 0;
    for (double m : mag) count += m > frac * mx ? 1 : 0;
    return double(count) / double(size_t(H) * W);
}

}  // namespace

TEST_SUITE("losses") {

TEST_CASE("anchor strength grows with age and caps") {
    AnchorConfig cfg;
    cfg.base = 0.1;
    cfg.growth = 1.5;
    cfg.cap = 1.0;
    CHECK(anchor_strength(cfg, 0) == doctest::Approx(0.1));
    CHECK(anchor_strength(cfg, 1) == doctest::Approx(0.15));
    CHECK(anchor_strength(cfg, 2) == doctest::Approx(0.225));
    CHECK(anchor_strength(cfg, 50) == doctest::Approx(1.0));
    for (uint32_t age = 0; age < 20; ++age)
        CHECK(anchor_strength(cfg, age + 1) >= anchor_strength(cfg, age));
}

TEST_CASE("anchor loss is zero right after recording, in both stages") {
    Rng rng(3);
    GaussianCloud cloud = anchored_cloud(rng, 12);
    StageGate gate;
    AnchorConfig cfg;
    CHECK(anchor_loss(cloud, gate, cfg) == doctest::Approx(0.0));
    gate.advance_to_fine();
    CHECK(anchor_loss(cloud, gate, cfg) == doctest::Approx(0.0));
}

TEST_CASE("anchor record refreshes to the perturbed state and keeps generations") {
    Rng rng(5);
    GaussianCloud cloud = anchored_cloud(rng, 4);
    cloud.set_round(7);
    cloud.generation[2] = 7;
    cloud.position[0] += 0.5;
    anchor_record(cloud);
    CHECK(cloud.anchor_position[0] == doctest::Approx(cloud.position[0]));
    CHECK(cloud.generation[2] == 7);
    StageGate gate;
    CHECK(anchor_loss(cloud, gate, AnchorConfig{}) == doctest::Approx(0.0));
}

TEST_CASE("missing anchors raise") {
    GaussianCloud cloud(2);
    Gaussian g;
    g.feature = {0, 0};
    cloud.push(g);
    StageGate gate;
    CHECK_THROWS_AS(anchor_loss(cloud, gate, AnchorConfig{}), MissingAnchor);
}

TEST_CASE("coarse-stage single-displacement closed form: lambda * d^2 / 3") {
    Rng rng(7);
    GaussianCloud cloud = anchored_cloud(rng, 1);
    const double d = 0.37;
    cloud.position[0] += d;
    AnchorConfig cfg;
    cfg.base = 0.25;
    cfg.cap = 0.25;
    StageGate gate;
    CloudGrads grads;
    grads.resize(1, 4);
    const double loss = anchor_loss(cloud, gate, cfg, &grads);
    CHECK(loss == doctest::Approx(0.25 * d * d / 3.0));
    CHECK(grads.position[0] == doctest::Approx(0.25 * 2.0 * d / 3.0));
    CHECK(grads.feature[0] == 0.0);  // stage gating: no feature gradient in coarse
}

TEST_CASE("fine-stage feature displacement closed form: lambda * mean(e^2)") {
    Rng rng(9);
    GaussianCloud cloud = anchored_cloud(rng, 1, 4);
    StageGate gate;
    gate.advance_to_fine();
    const std::vector<double> e = {0.1, -0.2, 0.3, -0.4};
    double mean_sq = 0;
    for (size_t k = 0; k < 4; ++k) {
        cloud.feature[k] += e[k];
        mean_sq += e[k] * e[k] / 4.0;
    }
    cloud.position[0] += 5.0;  // geometric displacement must contribute nothing
    AnchorConfig cfg;
    cfg.base = 0.5;
    cfg.cap = 0.5;
    CloudGrads grads;
    grads.resize(1, 4);
    const double loss = anchor_loss(cloud, gate, cfg, &grads);
    CHECK(loss == doctest::Approx(0.5 * mean_sq));
    CHECK(grads.position[0] == 0.0);
    CHECK(grads.opacity_logit[0] == 0.0);
    CHECK(grads.feature[1] == doctest::Approx(0.5 * 2.0 * e[1] / 4.0));
}

TEST_CASE("stage gating is exact on randomized clouds") {
    Rng rng(11);
    for (int trial = 0; trial < 5; ++trial) {
        GaussianCloud cloud = anchored_cloud(rng, 10);
        for (auto& v : cloud.position) v += rng.normal();
        for (auto& v : cloud.feature) v += rng.normal();
        for (auto& v : cloud.color) v += rng.normal(0, 0.1);

        StageGate gate;
        CloudGrads coarse;
        coarse.resize(10, 4);
        anchor_loss(cloud, gate, AnchorConfig{}, &coarse);
        for (double v : coarse.feature) CHECK(v == 0.0);

        gate.advance_to_fine();
        CloudGrads fine;
        fine.resize(10, 4);
        anchor_loss(cloud, gate, AnchorConfig{}, &fine);
        for (double v : fine.position) CHECK(v == 0.0);
        for (double v : fine.log_scale) CHECK(v == 0.0);
        for (double v : fine.rotation) CHECK(v == 0.0);
        for (double v : fine.opacity_logit) CHECK(v == 0.0);
        for (double v : fine.color) CHECK(v == 0.0);
    }
}

TEST_CASE("older generation contributes at least as much for equal deviation") {
    Rng rng(13);
    GaussianCloud young = anchored_cloud(rng, 1);
    GaussianCloud old = young;
    old.set_round(5);  // age 5 vs age 0
    young.position[0] += 0.2;
    old.position[0] += 0.2;
    StageGate gate;
    AnchorConfig cfg;
    cfg.base = 0.1;
    cfg.growth = 1.5;
    cfg.cap = 1.0;
    CHECK(anchor_loss(old, gate, cfg) >= anchor_loss(young, gate, cfg));
}

TEST_CASE("stage gate advances exactly once") {
    StageGate gate;
    CHECK(gate.theta_coarse() == 1.0);
    CHECK(gate.theta_fine() == 0.0);
    gate.advance_to_fine();
    CHECK(gate.theta_coarse() == 0.0);
    CHECK(gate.theta_fine() == 1.0);
    CHECK_THROWS_AS(gate.advance_to_fine(), DataError);
}

TEST_CASE("texture density of a constant image is zero") {
    const ImageD img(16, 16, 3, 0.42);
    std::vector<ImageD> images{img};
    CHECK(texture_density(images, GuidanceConfig{}) == doctest::Approx(0.0));
}

TEST_CASE("all-edge operator fixture gives density one") {
    std::vector<ImageD> images{ImageD(8, 8, 3, 0.5)};
    const auto all_ones = [](const ImageD& img) {
        return MaskImage(img.height, img.width, 1, 1);
    };
    CHECK(texture_density(images, all_ones) == doctest::Approx(1.0));
}

TEST_CASE("checkerboard density matches the scalar double-loop Sobel oracle") {
    ImageD img(32, 32, 3);
    for (int y = 0; y < 32; ++y)
        for (int x = 0; x < 32; ++x) {
            const double v = ((x / 4 + y / 4) % 2) ? 0.9 : 0.1;
            for (int c = 0; c < 3; ++c) img.at(y, x, c) = v;
        }
    GuidanceConfig cfg;
    std::vector<ImageD> images{img};
    const double got = texture_density(images, cfg);
    const double want = sobel_density_oracle(img, cfg.edge_threshold_frac);
    CHECK(got == want);  // exact: same comparisons on both paths
    CHECK(got > 0.0);
}

TEST_CASE("texture density is bounded and permutation invariant") {
    Rng rng(17);
    std::vector<ImageD> images;
    for (int k = 0; k < 4; ++k) {
        ImageD img(16, 16, 3);
        for (auto& v : img.data) v = rng.uniform();
        images.push_back(img);
    }
    const double a = texture_density(images, GuidanceConfig{});
    std::swap(images[0], images[3]);
    std::swap(images[1], images[2]);
    const double b = texture_density(images, GuidanceConfig{});
    CHECK(a == doctest::Approx(b));
    CHECK(a >= 0.0);
    CHECK(a <= 1.0);
}

TEST_CASE("empty image list raises") {
    std::vector<ImageD> none;
    CHECK_THROWS_AS(texture_density(none, GuidanceConfig{}), EmptyImage);
}

TEST_CASE("adaptive mask weight closed forms") {
    GuidanceConfig cfg;  // alpha 10, beta 0.01
    CHECK(adaptive_mask_weight(0.01, cfg) == doctest::Approx(0.5));
    CHECK(adaptive_mask_weight(0.05, cfg) == doctest::Approx(0.598687660112452).epsilon(1e-12));
    CHECK(adaptive_mask_weight(0.21, cfg) == doctest::Approx(0.8807970779778823).epsilon(1e-12));
}

TEST_CASE("adaptive mask weight is strictly increasing and in (0,1)") {
    GuidanceConfig cfg;
    double prev = 0.0;
    for (double d = 0.0; d <= 1.0; d += 0.02) {
        const double v = adaptive_mask_weight(d, cfg);
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        CHECK(v > prev);
        prev = v;
    }
}

TEST_CASE("masked loss is zero for identical images") {
    const ImageD a(8, 8, 3, 0.3), b(8, 8, 3, 0.3);
    MaskImage mask(8, 8, 1, 0);
    mask.at(2, 2) = 1;
    CHECK(masked_image_loss(a, b, mask, 0.7) == doctest::Approx(0.0));
}

TEST_CASE("balanced half mask at lambda 0.5 reduces to plain L1") {
    Rng rng(23);
    ImageD rendered(8, 8, 3), target(8, 8, 3);
    for (auto& v : rendered.data) v = rng.uniform();
    for (auto& v : target.data) v = rng.uniform();
    MaskImage mask(8, 8, 1, 0);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 4; ++x) mask.at(y, x) = 1;  // exactly half
    const double masked = masked_image_loss(rendered, target, mask, 0.5);
    const double plain = l1_image_loss(rendered, target, 1.0);
    CHECK(masked == doctest::Approx(plain).epsilon(1e-12));
}

TEST_CASE("uniform error on a half mask gives loss e at lambda 0.5") {
    ImageD rendered(6, 6, 3, 0.5), target(6, 6, 3, 0.3);
    MaskImage mask(6, 6, 1, 0);
    for (int y = 0; y < 3; ++y)
        for (int x = 0; x < 6; ++x) mask.at(y, x) = 1;
    const double e = 3 * 0.2;  // channel-summed per-pixel error
    CHECK(masked_image_loss(rendered, target, mask, 0.5) == doctest::Approx(e));
}

TEST_CASE("masked loss matches a brute-force per-pixel oracle") {
    Rng rng(29);
    ImageD rendered(11, 7, 3), target(11, 7, 3);
    for (auto& v : rendered.data) v = rng.uniform();
    for (auto& v : target.data) v = rng.uniform();
    MaskImage mask(11, 7, 1, 0);
    for (auto& m : mask.data) m = rng.uniform() < 0.4 ? 1 : 0;
    const double lambda = 0.73;

    size_t in = 0;
    for (auto m : mask.data) in += m;
    const size_t out = mask.pixel_count() - in;
    double want = 0;
    for (int y = 0; y < 11; ++y)
        for (int x = 0; x < 7; ++x)
            for (int c = 0; c < 3; ++c) {
                const double d = std::abs(rendered.at(y, x, c) - target.at(y, x, c));
                want += mask.at(y, x) ? lambda * d / double(in) : (1 - lambda) * d / double(out);
            }
    CHECK(std::abs(masked_image_loss(rendered, target, mask, lambda) - want) < 1e-10);
}

TEST_CASE("masked loss gradient has the region-normalized magnitudes") {
    ImageD rendered(4, 4, 3, 0.8), target(4, 4, 3, 0.2);
    MaskImage mask(4, 4, 1, 0);
    mask.at(0, 0) = 1;
    mask.at(1, 1) = 1;  // |m| = 2, |m̄| = 14
    ImageD grad(4, 4, 3, 0.0);
    const double lambda = 0.6;
    masked_image_loss(rendered, target, mask, lambda, &grad);
    CHECK(grad.at(0, 0, 0) == doctest::Approx(lambda / 2.0));
    CHECK(grad.at(2, 2, 1) == doctest::Approx((1 - lambda) / 14.0));
}

TEST_CASE("empty regions contribute zero") {
    ImageD rendered(4, 4, 3, 0.9), target(4, 4, 3, 0.1);
    const MaskImage all(4, 4, 1, 1), none(4, 4, 1, 0);
    const double li = masked_image_loss(rendered, target, all, 0.5);
    CHECK(li == doctest::Approx(0.5 * 3 * 0.8));
    const double lo = masked_image_loss(rendered, target, none, 0.5);
    CHECK(lo == doctest::Approx(0.5 * 3 * 0.8));
}

TEST_CASE("shape mismatches are rejected") {
    const ImageD a(4, 4, 3, 0.0), b(4, 5, 3, 0.0);
    MaskImage mask(4, 4, 1, 0);
    CHECK_THROWS_AS(masked_image_loss(a, b, mask, 0.5), ShapeMismatch);
    const ImageD c(4, 4, 3, 0.0);
    MaskImage bad(5, 4, 1, 0);
    CHECK_THROWS_AS(masked_image_loss(a, c, bad, 0.5), ShapeMismatch);
}

}  // TEST_SUITE
