#include <benchmark/benchmark.h>

#include "dho/rasterize.hpp"
#include "dho/rng.hpp"
#include "dho/threading.hpp"

using namespace dho;

namespace {

GaussianCloud make_cloud(int n, int feature_dim) {
    Rng rng(42);
    GaussianCloud cloud(feature_dim);
    for (int i = 0; i < n; ++i) {
        Gaussian g;
        g.position = {rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(2.0, 5.0)};
        g.log_scale = {rng.uniform(-3, -1.5), rng.uniform(-3, -1.5), rng.uniform(-3, -1.5)};
        Quatd q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        g.rotation = q.normalized();
        g.opacity_logit = rng.uniform(-2, 2);
        g.color = {rng.uniform(), rng.uniform(), rng.uniform()};
        g.feature.resize(feature_dim);
        for (auto& f : g.feature) f = rng.normal();
        cloud.push(g);
    }
    return cloud;
}

Camera make_camera(int size) {
    Camera cam;
    cam.fx = cam.fy = size * 1.1;
    cam.cx = cam.cy = size * 0.5;
    cam.width = cam.height = size;
    return cam;
}

void bench_forward(benchmark::State& state) {
    const GaussianCloud cloud = make_cloud(int(state.range(0)), 8);
    const Camera cam = make_camera(int(state.range(1)));
    const DeformedState ds = canonical_state(cloud);
    for (auto _ : state) {
        RenderOutput out = render(cloud, ds, cam, RenderOptions{});
        benchmark::DoNotOptimize(out.color.data.data());
    }
}

void bench_forward_reference(benchmark::State& state) {
    const GaussianCloud cloud = make_cloud(int(state.range(0)), 8);
    const Camera cam = make_camera(int(state.range(1)));
    const DeformedState ds = canonical_state(cloud);
    for (auto _ : state) {
        RenderOutput out = reference_render(cloud, ds, cam, RenderOptions{});
        benchmark::DoNotOptimize(out.color.data.data());
    }
}

void bench_backward(benchmark::State& state) {
    const GaussianCloud cloud = make_cloud(int(state.range(0)), 8);
    const Camera cam = make_camera(int(state.range(1)));
    const DeformedState ds = canonical_state(cloud);
    RenderUpstream up;
    up.d_color = ImageD(cam.height, cam.width, 3, 0.1);
    up.d_feature = ImageD(cam.height, cam.width, 8, 0.05);
    for (auto _ : state) {
        RenderGradients g = render_backward(cloud, ds, cam, up, RenderOptions{});
        benchmark::DoNotOptimize(g.d_position.data());
    }
}

}  // namespace

BENCHMARK(bench_forward)->Args({2000, 64})->Args({5000, 128})->Unit(benchmark::kMillisecond);
BENCHMARK(bench_forward_reference)->Args({2000, 64})->Args({5000, 128})->Unit(benchmark::kMillisecond);
BENCHMARK(bench_backward)->Args({2000, 64})->Args({5000, 128})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
