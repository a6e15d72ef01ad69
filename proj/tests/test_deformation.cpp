#include <doctest.h>

#include <cmath>

#include "dho/deform.hpp"
#include "dho/rng.hpp"

using namespace dho;

namespace {

DeformConfig tiny_config() {
    DeformConfig cfg;
    cfg.nx = cfg.ny = cfg.nz = 4;
    cfg.nt = 2;
    cfg.channels = 3;
    cfg.hidden = 8;
    cfg.bbox_lo = {-1, -1, -1};
    cfg.bbox_hi = {1, 1, 1};
    return cfg;
}

GaussianCloud small_cloud(Rng& rng, int n) {
    GaussianCloud cloud(2);
    for (int i = 0; i < n; ++i) {
        Gaussian g;
        g.position = {rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9), rng.uniform(-0.9, 0.9)};
        g.log_scale = {-1, -1, -1};
        Quatd q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        g.rotation = q.normalized();
        g.opacity_logit = 0.3;
        g.color = {0.5, 0.5, 0.5};
        g.feature = {rng.normal(), rng.normal()};
        cloud.push(g);
    }
    return cloud;
}

}  // namespace

TEST_SUITE("deformation") {

TEST_CASE("zero-initialized field is the identity deformation") {
    Rng rng(5);
    DeformationField field(tiny_config());
    // grid values arbitrary, heads zero
    for (auto& v : field.grid()) v = rng.normal();
    Rng mlp_rng(6);
    field.mlp().init_random(mlp_rng);
    field.mlp().zero_output_layer();

    GaussianCloud cloud = small_cloud(rng, 10);
    const DeformedState state = deform(field, cloud, 0.37);
    CHECK(state.position == cloud.position);
    CHECK(state.rotation == cloud.rotation);
    CHECK(state.log_scale == cloud.log_scale);
}

TEST_CASE("constant position-head bias shifts every Gaussian") {
    Rng rng(7);
    DeformationField field(tiny_config());
    field.mlp().biases(field.mlp().layer_count() - 1)[0] = 1.0;  // dX.x
    GaussianCloud cloud = small_cloud(rng, 6);
    const DeformedState state = deform(field, cloud, 0.5);
    for (size_t i = 0; i < cloud.size(); ++i) {
        CHECK(state.position[3 * i] == doctest::Approx(cloud.position[3 * i] + 1.0));
        CHECK(state.position[3 * i + 1] == doctest::Approx(cloud.position[3 * i + 1]));
        CHECK(state.position[3 * i + 2] == doctest::Approx(cloud.position[3 * i + 2]));
    }
}

TEST_CASE("features and opacity pass through untouched") {
    Rng rng(8);
    DeformationField field(tiny_config());
    field.init_random(rng);
    // give the heads values so geometry actually deforms
    Rng hrng(9);
    for (auto& w : field.mlp().weights(field.mlp().layer_count() - 1)) w = hrng.normal(0.0, 0.1);
    GaussianCloud cloud = small_cloud(rng, 5);
    const std::vector<double> feat = cloud.feature;
    const std::vector<double> op = cloud.opacity_logit;
    const DeformedState state = deform(field, cloud, 0.8);
    bool moved = false;
    for (size_t i = 0; i < state.position.size(); ++i)
        moved = moved || state.position[i] != cloud.position[i];
    CHECK(moved);
    CHECK(cloud.feature == feat);
    CHECK(cloud.opacity_logit == op);
}

TEST_CASE("grid interpolation is exact at grid nodes") {
    DeformConfig cfg = tiny_config();
    DeformationField field(cfg);
    Rng rng(17);
    for (auto& v : field.grid()) v = rng.normal();
    // Node (1,2,3) at t-node 1 in grid coordinates.
    const double sx = 2.0 / (cfg.nx - 1);
    const Vec3d pos{-1 + 1 * sx, -1 + 2 * sx, -1 + 3 * sx};
    std::vector<double> out(cfg.channels);
    field.sample(pos, 1.0, out.data(), nullptr, 0);
    for (int c = 0; c < cfg.channels; ++c)
        CHECK(out[c] == doctest::Approx(field.grid()[field.grid_index(1, 2, 3, 1, c)]));
}

TEST_CASE("time-constant grid gives time-invariant output") {
    DeformConfig cfg = tiny_config();
    DeformationField field(cfg);
    Rng rng(19);
    // Same values at every time slice; random MLP with live heads.
    for (int x = 0; x < cfg.nx; ++x)
        for (int y = 0; y < cfg.ny; ++y)
            for (int z = 0; z < cfg.nz; ++z) {
                std::vector<double> vals(cfg.channels);
                for (auto& v : vals) v = rng.normal();
                for (int t = 0; t < cfg.nt; ++t)
                    for (int c = 0; c < cfg.channels; ++c)
                        field.grid()[field.grid_index(x, y, z, t, c)] = vals[size_t(c)];
            }
    field.mlp().init_random(rng);
    for (auto& w : field.mlp().weights(field.mlp().layer_count() - 1)) w = rng.normal(0.0, 0.1);
    // Zero the raw-time input column so only the grid carries time.
    Mlp& mlp = field.mlp();
    const int cin = cfg.channels + 1;
    for (int o = 0; o < mlp.layer_sizes()[1]; ++o) mlp.weights(0)[size_t(o) * cin + cfg.channels] = 0.0;

    GaussianCloud cloud = small_cloud(rng, 6);
    const DeformedState a = deform(field, cloud, 0.2);
    const DeformedState b = deform(field, cloud, 0.9);
    for (size_t i = 0; i < a.position.size(); ++i)
        CHECK(a.position[i] == doctest::Approx(b.position[i]).epsilon(1e-12));
}

TEST_CASE("rotation stays unit norm after offset composition") {
    Rng rng(23);
    DeformationField field(tiny_config());
    field.init_random(rng);
    for (auto& w : field.mlp().weights(field.mlp().layer_count() - 1)) w = rng.normal(0.0, 0.3);
    GaussianCloud cloud = small_cloud(rng, 8);
    const DeformedState state = deform(field, cloud, 0.4);
    for (size_t i = 0; i < cloud.size(); ++i) {
        const Quatd raw{state.rotation[4 * i], state.rotation[4 * i + 1], state.rotation[4 * i + 2],
                        state.rotation[4 * i + 3]};
        CHECK(raw.normalized().norm() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("out-of-box positions clamp with a diagnostic counter") {
    Rng rng(29);
    DeformationField field(tiny_config());
    field.init_random(rng);
    GaussianCloud cloud(2);
    Gaussian g;
    g.position = {5.0, 0.0, 0.0};  // outside the bbox
    g.feature = {0, 0};
    cloud.push(g);
    DeformationField::Cache cache;
    deform(field, cloud, 0.5, &cache);
    CHECK(cache.clamped == 1);
}

TEST_CASE("deformed position gradient w.r.t. grid values matches finite differences") {
    Rng rng(31);
    DeformationField field(tiny_config());
    field.init_random(rng);
    for (auto& w : field.mlp().weights(field.mlp().layer_count() - 1)) w = rng.normal(0.0, 0.2);
    GaussianCloud cloud = small_cloud(rng, 4);
    const double t = 0.3;

    // Scalar objective: sum of all deformed coordinates.
    const auto loss = [&] {
        const DeformedState s = deform(field, cloud, t);
        double sum = 0;
        for (double v : s.position) sum += v;
        for (double v : s.rotation) sum += v;
        for (double v : s.log_scale) sum += v;
        return sum;
    };

    DeformationField::Cache cache;
    deform(field, cloud, t, &cache);
    RenderGradients upstream;
    upstream.resize(cloud.size(), cloud.feature_dim());
    std::fill(upstream.d_position.begin(), upstream.d_position.end(), 1.0);
    std::fill(upstream.d_rotation.begin(), upstream.d_rotation.end(), 1.0);
    std::fill(upstream.d_log_scale.begin(), upstream.d_log_scale.end(), 1.0);
    FieldGrads grads;
    grads.init_like(field);
    deform_backward(field, cloud, cache, upstream, grads);

    const double h = 1e-4;
    Rng pick(37);
    for (int trial = 0; trial < 40; ++trial) {
        const size_t k = pick.uniform_index(field.grid_size());
        const double saved = field.grid()[k];
        field.grid()[k] = saved + h;
        const double up = loss();
        field.grid()[k] = saved - h;
        const double down = loss();
        field.grid()[k] = saved;
        const double fd = (up - down) / (2 * h);
        CHECK(std::abs(grads.grid[k] - fd) / std::max({std::abs(fd), std::abs(grads.grid[k]), 1e-3}) <
              1e-4);
    }
}

TEST_CASE("tv loss closed forms") {
    SUBCASE("constant grid is zero") {
        DeformationField field(tiny_config());
        for (auto& v : field.grid()) v = 3.25;
        CHECK(tv_loss(field) == doctest::Approx(0.0));
    }
    SUBCASE("two-node single-axis grid with values 0 and 1") {
        DeformConfig cfg;
        cfg.nx = 2;
        cfg.ny = cfg.nz = cfg.nt = 1;
        cfg.channels = 1;
        cfg.hidden = 4;
        DeformationField field(cfg);
        field.grid()[field.grid_index(0, 0, 0, 0, 0)] = 0.0;
        field.grid()[field.grid_index(1, 0, 0, 0, 0)] = 1.0;
        CHECK(tv_loss(field) == doctest::Approx(1.0));
    }
}

TEST_CASE("tv loss matches a brute-force adjacency oracle") {
    DeformConfig cfg;
    cfg.nx = cfg.ny = cfg.nz = cfg.nt = 4;
    cfg.channels = 2;
    cfg.hidden = 4;
    DeformationField field(cfg);
    Rng rng(43);
    for (auto& v : field.grid()) v = rng.normal();

    double sum = 0;
    size_t pairs = 0;
    for (int x = 0; x < 4; ++x)
        for (int y = 0; y < 4; ++y)
            for (int z = 0; z < 4; ++z)
                for (int t = 0; t < 4; ++t)
                    for (int c = 0; c < 2; ++c) {
                        const double v = field.grid()[field.grid_index(x, y, z, t, c)];
                        const auto add = [&](int x2, int y2, int z2, int t2) {
                            const double w = field.grid()[field.grid_index(x2, y2, z2, t2, c)];
                            sum += (v - w) * (v - w);
                            ++pairs;
                        };
                        if (x + 1 < 4) add(x + 1, y, z, t);
                        if (y + 1 < 4) add(x, y + 1, z, t);
                        if (z + 1 < 4) add(x, y, z + 1, t);
                        if (t + 1 < 4) add(x, y, z, t + 1);
                    }
    CHECK(std::abs(tv_loss(field) - sum / double(pairs)) < 1e-10);
}

TEST_CASE("tv loss gradient matches finite differences") {
    DeformConfig cfg = tiny_config();
    DeformationField field(cfg);
    Rng rng(47);
    for (auto& v : field.grid()) v = rng.normal();
    std::vector<double> grad(field.grid_size(), 0.0);
    tv_loss_backward(field, 1.0, grad);
    const double h = 1e-4;  // tv is quadratic: central differences are exact
    Rng pick(53);
    for (int trial = 0; trial < 30; ++trial) {
        const size_t k = pick.uniform_index(field.grid_size());
        const double saved = field.grid()[k];
        field.grid()[k] = saved + h;
        const double up = tv_loss(field);
        field.grid()[k] = saved - h;
        const double down = tv_loss(field);
        field.grid()[k] = saved;
        const double fd = (up - down) / (2 * h);
        CHECK(std::abs(grad[k] - fd) / std::max({std::abs(fd), std::abs(grad[k]), 1e-6}) < 1e-6);
    }
}

}  // TEST_SUITE
