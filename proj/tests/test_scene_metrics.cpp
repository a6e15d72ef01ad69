#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "dho/losses.hpp"
#include "dho/metrics.hpp"
#include "dho/rng.hpp"
#include "dho/scene.hpp"

using namespace dho;
namespace fs = std::filesystem;

TEST_SUITE("scene_metrics") {

TEST_CASE("psnr closed forms") {
    const ImageD a(8, 8, 3, 0.5), b(8, 8, 3, 0.5);
    CHECK(psnr(a, b) == doctest::Approx(100.0));
    ImageD c(8, 8, 3, 0.5), d(8, 8, 3, 0.6);  // MSE = 0.01
    CHECK(psnr(c, d) == doctest::Approx(20.0));
    CHECK_THROWS_AS(psnr(a, ImageD(8, 9, 3, 0.0)), ShapeMismatch);
}

TEST_CASE("psnr matches an independent scalar formula on random images") {
    Rng rng(3);
    ImageD a(12, 12, 3), b(12, 12, 3);
    for (auto& v : a.data) v = rng.uniform();
    for (auto& v : b.data) v = rng.uniform();
    double mse = 0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= double(a.data.size());
    CHECK(std::abs(psnr(a, b) - 10.0 * std::log10(1.0 / mse)) < 1e-8);
    CHECK(psnr(a, b) == doctest::Approx(psnr(b, a)));
}

TEST_CASE("ssim closed forms and symmetry") {
    Rng rng(5);
    ImageD a(16, 16, 3), b(16, 16, 3);
    for (auto& v : a.data) v = rng.uniform();
    for (auto& v : b.data) v = rng.uniform();
    CHECK(ssim(a, a) == doctest::Approx(1.0));
    CHECK(ssim(a, b) == doctest::Approx(ssim(b, a)));
    CHECK(ssim(a, b) < 1.0);
    CHECK(ssim(a, b) >= -1.0);
    CHECK(d_ssim(1.0) == doctest::Approx(0.0));
    CHECK(d_ssim(0.0) == doctest::Approx(0.5));
}

TEST_CASE("ssim matches a direct per-window oracle") {
    // Oracle: direct window sums at a few centers, no separable filtering.
    Rng rng(7);
    ImageD a(18, 18, 1), b(18, 18, 1);
    for (auto& v : a.data) v = rng.uniform();
    for (auto& v : b.data) v = 0.7 * a.data[&v - b.data.data()] + 0.3 * rng.uniform();

    // Gaussian window
    double w[11][11], wsum = 0;
    for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
            const double dy = i - 5, dx = j - 5;
            w[i][j] = std::exp(-(dx * dx) / 4.5) * std::exp(-(dy * dy) / 4.5);
            wsum += w[i][j];
        }
    for (auto& row : w)
        for (auto& v : row) v /= wsum;

    double total = 0;
    size_t count = 0;
    for (int cy = 5; cy < 13; ++cy)
        for (int cx = 5; cx < 13; ++cx) {
            double ma = 0, mb = 0, va = 0, vb = 0, cov = 0;
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    ma += w[i][j] * a.at(cy + i - 5, cx + j - 5);
                    mb += w[i][j] * b.at(cy + i - 5, cx + j - 5);
                }
            for (int i = 0; i < 11; ++i)
                for (int j = 0; j < 11; ++j) {
                    const double av = a.at(cy + i - 5, cx + j - 5);
                    const double bv = b.at(cy + i - 5, cx + j - 5);
                    va += w[i][j] * av * av;
                    vb += w[i][j] * bv * bv;
                    cov += w[i][j] * av * bv;
                }
            va -= ma * ma;
            vb -= mb * mb;
            cov -= ma * mb;
            const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
            total += ((2 * ma * mb + c1) * (2 * cov + c2)) /
                     ((ma * ma + mb * mb + c1) * (va + vb + c2));
            ++count;
        }
    CHECK(std::abs(ssim(a, b) - total / double(count)) < 1e-8);
}

TEST_CASE("iou and miou closed forms") {
    MaskImage a(4, 4, 1, 0), b(4, 4, 1, 0);
    SUBCASE("identical masks") {
        a.at(1, 1) = 1;
        b.at(1, 1) = 1;
        std::vector<MaskImage> pa{a}, pb{b};
        CHECK(miou(pa, pb) == doctest::Approx(1.0));
    }
    SUBCASE("disjoint nonempty masks") {
        a.at(0, 0) = 1;
        b.at(3, 3) = 1;
        CHECK(iou(a, b) == doctest::Approx(0.0));
    }
    SUBCASE("half-overlap squares: 2x2 vs 2x2 overlapping 2x1") {
        for (int y = 0; y < 2; ++y)
            for (int x = 0; x < 2; ++x) a.at(y, x) = 1;
        for (int y = 0; y < 2; ++y)
            for (int x = 1; x < 3; ++x) b.at(y, x) = 1;
        CHECK(iou(a, b) == doctest::Approx(2.0 / 6.0));
        CHECK(iou(b, a) == doctest::Approx(iou(a, b)));
    }
    SUBCASE("empty-empty counts as one") {
        CHECK(iou(a, b) == doctest::Approx(1.0));
    }
    SUBCASE("errors") {
        std::vector<MaskImage> none;
        std::vector<MaskImage> one{a};
        CHECK_THROWS_AS(miou(none, one), EmptyList);
        std::vector<MaskImage> two{a, b};
        CHECK_THROWS_AS(miou(one, two), ShapeMismatch);
    }
}

TEST_CASE("masked metrics: all-ones mask equals global metrics") {
    Rng rng(9);
    ImageD a(16, 16, 3), b(16, 16, 3);
    for (auto& v : a.data) v = rng.uniform();
    for (auto& v : b.data) v = rng.uniform();
    const MaskImage all(16, 16, 1, 1);
    const MaskedMetrics mm = masked_metrics(a, b, all);
    CHECK(mm.psnr == doctest::Approx(psnr(a, b)));
    CHECK(mm.ssim == doctest::Approx(ssim(a, b)));
}

TEST_CASE("masked metrics ignore corrupted background") {
    Rng rng(11);
    ImageD target(16, 16, 3, 0.5);
    ImageD rendered = target;
    MaskImage mask(16, 16, 1, 0);
    for (int y = 5; y < 12; ++y)
        for (int x = 5; x < 12; ++x) mask.at(y, x) = 1;
    // corrupt outside the mask only
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x)
            if (!mask.at(y, x)) rendered.at(y, x, 0) = rng.uniform();
    const MaskedMetrics mm = masked_metrics(rendered, target, mask);
    CHECK(mm.psnr == doctest::Approx(100.0));
    CHECK(psnr(rendered, target) < 40.0);
}

TEST_CASE("masked psnr matches a brute-force masked MSE loop") {
    Rng rng(13);
    ImageD a(16, 16, 3), b(16, 16, 3);
    for (auto& v : a.data) v = rng.uniform();
    for (auto& v : b.data) v = rng.uniform();
    MaskImage mask(16, 16, 1, 0);
    for (auto& m : mask.data) m = rng.uniform() < 0.3 ? 1 : 0;
    size_t inside = 0;
    double mse = 0;
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            if (!mask.at(y, x)) continue;
            ++inside;
            for (int c = 0; c < 3; ++c) {
                const double d = a.at(y, x, c) - b.at(y, x, c);
                mse += d * d;
            }
        }
    mse /= double(inside * 3);
    CHECK(std::abs(masked_metrics(a, b, mask).psnr - 10 * std::log10(1.0 / mse)) < 1e-8);
}

TEST_CASE("empty mask raises MetricUndefined") {
    const ImageD a(16, 16, 3, 0.5), b(16, 16, 3, 0.5);
    const MaskImage none(16, 16, 1, 0);
    CHECK_THROWS_AS(masked_metrics(a, b, none), MetricUndefined);
}

TEST_CASE("zero-object scene: all frames identical, masks empty") {
    SceneSpec spec;
    spec.name = "empty";
    spec.image_size = 24;
    spec.train_views = 1;
    spec.heldout_views = 0;
    spec.timestamps = 3;
    spec.init_points = 50;
    spec.objects = {};
    const SceneDataset ds = generate_scene(spec, 0);
    REQUIRE(ds.frames.size() == 3);
    for (const auto& f : ds.frames) {
        CHECK(f.image.data == ds.frames[0].image.data);
        for (uint8_t m : f.mask.data) CHECK(m == 0);
        for (uint16_t c : f.classes[2].data) CHECK(c == Codebook::kBackgroundRow);
    }
}

TEST_CASE("moving object: mask centroid moves monotonically along the trajectory") {
    SceneSpec spec = bundled_scene("dynamic-clean");
    spec.image_size = 32;
    spec.train_views = 1;
    spec.heldout_views = 0;
    spec.timestamps = 6;
    spec.init_points = 50;
    spec.focal = 38;
    const SceneDataset ds = generate_scene(spec, 0);
    double prev = -1e9;
    for (const auto& f : ds.frames) {
        double cx = 0;
        size_t n = 0;
        for (int y = 0; y < 32; ++y)
            for (int x = 0; x < 32; ++x)
                if (f.mask.at(y, x)) {
                    cx += x;
                    ++n;
                }
        REQUIRE(n > 0);
        cx /= double(n);
        CHECK(cx > prev);
        prev = cx;
    }
}

TEST_CASE("noise amplitude raises texture density on the same seed") {
    SceneSpec clean = bundled_scene("dynamic-clean");
    clean.image_size = 48;
    clean.train_views = 2;
    clean.heldout_views = 0;
    clean.timestamps = 2;
    clean.init_points = 50;
    SceneSpec noisy = clean;
    noisy.noise_amplitude = 0.5;
    const SceneDataset a = generate_scene(clean, 0);
    const SceneDataset b = generate_scene(noisy, 0);
    std::vector<ImageD> ia, ib;
    for (const auto& f : a.frames) ia.push_back(f.image);
    for (const auto& f : b.frames) ib.push_back(f.image);
    GuidanceConfig gc;
    CHECK(texture_density(ib, gc) > texture_density(ia, gc));
}

TEST_CASE("codebook rows are unit norm with a nested hierarchy") {
    SceneSpec spec = bundled_scene("dynamic-multiscale");
    spec.image_size = 24;
    spec.train_views = 1;
    spec.heldout_views = 0;
    spec.timestamps = 2;
    spec.init_points = 20;
    spec.focal = 29;
    const SceneDataset ds = generate_scene(spec, 3);
    const auto& rows = ds.codebook.rows;
    const auto dot = [&](size_t i, size_t j) {
        double d = 0;
        for (int k = 0; k < ds.codebook.dim; ++k) d += rows[i][k] * rows[j][k];
        return d;
    };
    for (size_t i = 0; i < rows.size(); ++i) CHECK(dot(i, i) == doctest::Approx(1.0));
    // canonicals, background and the whole-object row are mutually orthogonal
    const size_t whole = Codebook::kBackgroundRow + 1;
    for (size_t i = 0; i <= whole; ++i)
        for (size_t j = 0; j < i; ++j) CHECK(dot(i, j) == doctest::Approx(0.0).epsilon(1e-9));
    // part and subpart rows correlate strongly with their whole-object row
    for (size_t r = whole + 1; r < whole + 7; ++r) {
        CHECK(dot(r, whole) > 0.8);
        CHECK(dot(r, Codebook::kBackgroundRow) == doctest::Approx(0.0).epsilon(1e-9));
    }
    // Scales nest: subpart class implies part class implies whole class.
    const Frame& f = ds.frames[1];
    for (int y = 0; y < 24; ++y)
        for (int x = 0; x < 24; ++x) {
            const bool fg = f.mask.at(y, x) != 0;
            for (int s = 0; s < 3; ++s)
                CHECK((f.classes[s].at(y, x) != Codebook::kBackgroundRow) == fg);
        }
}

TEST_CASE("dataset roundtrip is bit-identical") {
    SceneSpec spec = bundled_scene("dynamic-clean");
    spec.image_size = 24;
    spec.train_views = 2;
    spec.heldout_views = 1;
    spec.timestamps = 2;
    spec.init_points = 40;
    spec.focal = 29;
    const SceneDataset ds = generate_scene(spec, 1);
    const fs::path dir = fs::temp_directory_path() / "dho_scene_roundtrip";
    fs::remove_all(dir);
    save_scene(ds, dir.string());
    const SceneDataset back = load_scene(dir.string());
    // Re-save: byte-identical files prove the roundtrip is lossless.
    const fs::path dir2 = fs::temp_directory_path() / "dho_scene_roundtrip2";
    fs::remove_all(dir2);
    save_scene(back, dir2.string());

    REQUIRE(back.frames.size() == ds.frames.size());
    for (size_t i = 0; i < ds.frames.size(); ++i) {
        CHECK(back.frames[i].mask.data == ds.frames[i].mask.data);
        for (int s = 0; s < 3; ++s)
            CHECK(back.frames[i].classes[s].data == ds.frames[i].classes[s].data);
    }
    for (const char* rel : {"frames/0000.png", "masks/0001.png", "classes/l/0002.png",
                            "codebook.bin", "init_points.bin"}) {
        std::ifstream fa(dir / rel, std::ios::binary), fb(dir2 / rel, std::ios::binary);
        const std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
        const std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
        CHECK(sa == sb);
        CHECK(!sa.empty());
    }
    fs::remove_all(dir);
    fs::remove_all(dir2);
}

TEST_CASE("scene spec validation") {
    SceneSpec spec = bundled_scene("dynamic-clean");
    spec.image_size = 4;
    CHECK_THROWS_AS(generate_scene(spec, 0), SpecValidation);
    CHECK_THROWS_AS(bundled_scene("no-such-scene"), SpecValidation);
}

}  // TEST_SUITE
