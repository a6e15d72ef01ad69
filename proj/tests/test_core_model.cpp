#include <doctest.h>

#include <cmath>

#include "dho/projection.hpp"
#include "dho/rng.hpp"

using namespace dho;

namespace {

// Independent dense 3x3 product oracle: R * S * S^T * R^T built step by step.
Mat3d covariance_oracle(const Vec3d& log_scale, const Quatd& q) {
    const Mat3d r = quat_to_matrix(q);
    Mat3d s{};
    s.m[0][0] = std::exp(log_scale.x);
    s.m[1][1] = std::exp(log_scale.y);
    s.m[2][2] = std::exp(log_scale.z);
    const Mat3d rs = r * s;
    return rs * rs.transposed();
}

Quatd random_unit_quat(Rng& rng) {
    Quatd q{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
    return q.normalized();
}

bool cholesky_ok(const Mat3d& a) {
    double l[3][3] = {};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j <= i; ++j) {
            double sum = a.m[i][j];
            for (int k = 0; k < j; ++k) sum -= l[i][k] * l[j][k];
            if (i == j) {
                if (sum <= 0) return false;
                l[i][i] = std::sqrt(sum);
            } else {
                l[i][j] = sum / l[j][j];
            }
        }
    return true;
}

Camera test_camera(double focal = 60, int size = 48) {
    return make_lookat_camera({0, 0, 5}, {0, 0, 0}, focal, size, size, 0.0);
}

}  // namespace

TEST_SUITE("core_model") {

TEST_CASE("build_covariance identity case") {
    const Mat3d c = build_covariance({0, 0, 0}, {1, 0, 0, 0});
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) CHECK(c.m[i][j] == doctest::Approx(i == j ? 1.0 : 0.0));
}

TEST_CASE("build_covariance axis-aligned closed form") {
    const Mat3d c = build_covariance({std::log(2.0), 0, 0}, {1, 0, 0, 0});
    CHECK(c.m[0][0] == doctest::Approx(4.0));
    CHECK(c.m[1][1] == doctest::Approx(1.0));
    CHECK(c.m[2][2] == doctest::Approx(1.0));
    CHECK(c.m[0][1] == doctest::Approx(0.0));
}

TEST_CASE("build_covariance matches independent matrix oracle") {
    Rng rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3d ls{rng.uniform(-2, 1), rng.uniform(-2, 1), rng.uniform(-2, 1)};
        const Quatd q = random_unit_quat(rng);
        const Mat3d got = build_covariance(ls, q);
        const Mat3d want = covariance_oracle(ls, q);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(std::abs(got.m[i][j] - want.m[i][j]) < 1e-10);
        // symmetry + SPD via Cholesky
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                CHECK(got.m[i][j] == doctest::Approx(got.m[j][i]));
        CHECK(cholesky_ok(got));
    }
}

TEST_CASE("project_gaussian on-axis pinhole closed form") {
    const double f = 60, d = 5, sigma = 0.2;
    Camera cam = test_camera(f);
    const auto proj = project_gaussian({0, 0, 0}, {std::log(sigma), std::log(sigma), std::log(sigma)},
                                       {1, 0, 0, 0}, cam);
    REQUIRE(proj.has_value());
    CHECK(proj->mean2d.x == doctest::Approx(cam.cx));
    CHECK(proj->mean2d.y == doctest::Approx(cam.cy));
    CHECK(proj->depth == doctest::Approx(d));
    const double expected = f * sigma / d;
    CHECK(proj->cov_xx == doctest::Approx(expected * expected + 0.3));
    CHECK(proj->cov_yy == doctest::Approx(expected * expected + 0.3));
    CHECK(proj->cov_xy == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("project_gaussian culls behind camera") {
    Camera cam = test_camera();
    CHECK_FALSE(project_gaussian({0, 0, 5}, {0, 0, 0}, {1, 0, 0, 0}, cam).has_value());
    CHECK_FALSE(project_gaussian({0, 0, 6}, {0, 0, 0}, {1, 0, 0, 0}, cam).has_value());
}

TEST_CASE("project_gaussian cov2d matches finite-difference Jacobian oracle") {
    // Oracle: numerically differentiate the pinhole projection around the mean
    // and form J Sigma_cam J^T.
    Rng rng(13);
    Camera cam = make_lookat_camera({0.4, 0.7, 4.2}, {0, 0, 0}, 55, 64, 64, 0);
    for (int trial = 0; trial < 25; ++trial) {
        const Vec3d pos{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const Vec3d ls{rng.uniform(-2.5, -0.5), rng.uniform(-2.5, -0.5), rng.uniform(-2.5, -0.5)};
        const Quatd q = random_unit_quat(rng);
        const auto proj = project_gaussian(pos, ls, q, cam);
        REQUIRE(proj.has_value());

        const Vec3d pc = cam.to_camera(pos);
        const auto project_pt = [&](const Vec3d& p) {
            return Vec2d{cam.fx * p.x / p.z, cam.fy * p.y / p.z};
        };
        const double h = 1e-6;
        double jac[2][3];
        for (int a = 0; a < 3; ++a) {
            Vec3d hi = pc, lo = pc;
            hi[a] += h;
            lo[a] -= h;
            const Vec2d dp = (project_pt(hi) - project_pt(lo)) * (1.0 / (2 * h));
            jac[0][a] = dp.x;
            jac[1][a] = dp.y;
        }
        const Mat3d sigma_cam =
            cam.world_to_cam * build_covariance(ls, q) * cam.world_to_cam.transposed();
        double want[2][2] = {};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int i = 0; i < 3; ++i)
                    for (int j = 0; j < 3; ++j)
                        want[a][b] += jac[a][i] * sigma_cam.m[i][j] * jac[b][j];
        CHECK(std::abs(proj->cov_xx - 0.3 - want[0][0]) / std::abs(want[0][0]) < 1e-6);
        CHECK(std::abs(proj->cov_yy - 0.3 - want[1][1]) / std::abs(want[1][1]) < 1e-6);
        CHECK(std::abs(proj->cov_xy - want[0][1]) /
                  std::max(1e-6, std::abs(want[0][1])) < 1e-5);
    }
}

TEST_CASE("projection scale consistency: doubling depth and scale preserves cov2d") {
    Camera cam;  // identity pose, camera at origin looking down +z
    cam.fx = cam.fy = 70;
    cam.cx = cam.cy = 32;
    cam.width = cam.height = 64;
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3d pos{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(2.0, 4.0)};
        const double ls = rng.uniform(-2.5, -1.0);
        const Quatd q{1, 0, 0, 0};
        const auto a = project_gaussian(pos, {ls, ls, ls}, q, cam);
        const auto b = project_gaussian(pos * 2.0,
                                        {ls + std::log(2.0), ls + std::log(2.0), ls + std::log(2.0)},
                                        q, cam);
        REQUIRE(a.has_value());
        REQUIRE(b.has_value());
        CHECK(a->cov_xx - 0.3 == doctest::Approx(b->cov_xx - 0.3).epsilon(1e-9));
        CHECK(a->cov_yy - 0.3 == doctest::Approx(b->cov_yy - 0.3).epsilon(1e-9));
        CHECK(a->cov_xy == doctest::Approx(b->cov_xy).epsilon(1e-9));
        CHECK(a->mean2d.x == doctest::Approx(b->mean2d.x));
        CHECK(a->mean2d.y == doctest::Approx(b->mean2d.y));
    }
}

TEST_CASE("activate closed forms") {
    CHECK(activate(0.0, {0, 0, 0}).opacity == doctest::Approx(0.5));
    const auto a = activate(0.0, {0, 0, 0});
    CHECK(a.scale.x == doctest::Approx(1.0));
    CHECK(a.scale.y == doctest::Approx(1.0));
    CHECK(a.scale.z == doctest::Approx(1.0));
    CHECK(activate(2.0, {0, 0, 0}).opacity == doctest::Approx(0.880797).epsilon(1e-6));
}

TEST_CASE("quaternion renormalization is idempotent") {
    Rng rng(11);
    GaussianCloud cloud(2);
    for (int i = 0; i < 8; ++i) {
        Gaussian g;
        g.rotation = Quatd{rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        g.feature = {0, 0};
        cloud.push(g);
    }
    cloud.renormalize_rotations();
    const std::vector<double> once = cloud.rotation;
    cloud.renormalize_rotations();
    CHECK(cloud.rotation == once);
    for (size_t i = 0; i < cloud.size(); ++i)
        CHECK(cloud.rotation_at(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cloud rejects mismatched feature length") {
    GaussianCloud cloud(4);
    Gaussian g;
    g.feature = {1.0, 2.0};
    CHECK_THROWS_AS(cloud.push(g), DimensionMismatch);
}

}  // TEST_SUITE
