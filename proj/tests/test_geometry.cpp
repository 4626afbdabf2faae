#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "floorloc/geometry.hpp"

using namespace floorloc;

namespace {

constexpr double kPi = std::numbers::pi;

// Independent 2x2 rotation-matrix evaluation.
Vec2 rotate_ref(double a, Vec2 p) {
  const double m[2][2] = {{std::cos(a), -std::sin(a)}, {std::sin(a), std::cos(a)}};
  return {m[0][0] * p.x + m[0][1] * p.y, m[1][0] * p.x + m[1][1] * p.y};
}

std::vector<Vec2> random_points(std::mt19937_64& rng, std::size_t n, double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  std::vector<Vec2> pts(n);
  for (Vec2& p : pts) p = {u(rng), u(rng)};
  return pts;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("wrap_angle maps into (-pi, pi]") {
  CHECK(wrap_angle(0.0) == 0.0);
  CHECK(wrap_angle(kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(-kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(3 * kPi) == doctest::Approx(kPi));
  CHECK(wrap_angle(2 * kPi + 0.25) == doctest::Approx(0.25));
  CHECK(wrap_angle(-2 * kPi - 0.25) == doctest::Approx(-0.25));
}

TEST_CASE("transform_point examples") {
  const Vec2 p = transform_point(RigidTransform2D::identity(), {0.3, -0.1});
  CHECK(p.x == 0.3);
  CHECK(p.y == -0.1);

  const Vec2 q = transform_point({kPi / 2, {0, 0}}, {1, 0});
  CHECK(q.x == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(q.y == doctest::Approx(1.0));

  const RigidTransform2D t{kPi / 6, {0.5, 0.2}};
  const Vec2 r = transform_point(t, {0.1, 0.0});
  const Vec2 expect = rotate_ref(kPi / 6, {0.1, 0.0}) + Vec2{0.5, 0.2};
  CHECK(r.x == doctest::Approx(expect.x).epsilon(1e-12));
  CHECK(r.y == doctest::Approx(expect.y).epsilon(1e-12));
}

TEST_CASE("compose and inverse preserve distances") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> a(-kPi, kPi), off(-2.0, 2.0);
  for (int i = 0; i < 200; ++i) {
    const RigidTransform2D t1{a(rng), {off(rng), off(rng)}};
    const RigidTransform2D t2{a(rng), {off(rng), off(rng)}};
    const Vec2 p{off(rng), off(rng)}, q{off(rng), off(rng)};
    const Vec2 composed = t1.compose(t2).apply(p);
    const Vec2 chained = t1.apply(t2.apply(p));
    CHECK(distance(composed, chained) < 1e-12);
    CHECK(distance(t1.inverse().apply(t1.apply(p)), p) < 1e-12);
    CHECK(std::abs(distance(t1.apply(p), t1.apply(q)) - distance(p, q)) < 1e-9);
  }
}

TEST_CASE("pose_delta examples") {
  const PoseDelta same = pose_delta({1, 2, 0.3}, {1, 2, 0.3});
  CHECK(same.distance == 0.0);
  CHECK(same.angle == 0.0);

  const PoseDelta wrap = pose_delta({0, 0, 3.1}, {0, 0, -3.1});
  CHECK(wrap.angle == doctest::Approx(2 * kPi - 6.2));

  CHECK(pose_delta({0, 0, 0}, {0.06, 0.08, 0}).distance == doctest::Approx(0.10));
  CHECK(pose_delta({0, 0, 0}, {0, 0, kPi}).angle == doctest::Approx(kPi));
}

TEST_CASE("estimate_rigid_2d") {
  std::mt19937_64 rng(2);
  SUBCASE("dst = src gives identity") {
    const auto src = random_points(rng, 8, 0.05);
    const RigidTransform2D t = estimate_rigid_2d(src, src);
    CHECK(std::abs(t.rotation) < 1e-12);
    CHECK(norm(t.translation) < 1e-12);
  }
  SUBCASE("quarter turn about the origin") {
    const auto src = random_points(rng, 8, 0.05);
    std::vector<Vec2> dst;
    for (Vec2 p : src) dst.push_back(rotate_ref(kPi / 2, p));
    const RigidTransform2D t = estimate_rigid_2d(src, dst);
    CHECK(t.rotation == doctest::Approx(kPi / 2));
    CHECK(norm(t.translation) < 1e-12);
  }
  SUBCASE("exact on noise-free inputs of any size") {
    std::uniform_real_distribution<double> a(-kPi, kPi), off(-1.0, 1.0);
    for (std::size_t n = 2; n < 40; ++n) {
      const RigidTransform2D truth{a(rng), {off(rng), off(rng)}};
      const auto src = random_points(rng, n, 0.03);
      std::vector<Vec2> dst;
      for (Vec2 p : src) dst.push_back(truth.apply(p));
      const RigidTransform2D t = estimate_rigid_2d(src, dst);
      for (std::size_t i = 0; i < n; ++i) CHECK(distance(t.apply(src[i]), dst[i]) < 1e-9);
    }
  }
  SUBCASE("noisy recovery") {
    const RigidTransform2D truth{0.7, {0.3, -0.2}};
    const auto src = random_points(rng, 10, 0.025);
    std::normal_distribution<double> noise(0.0, 0.0005);
    std::vector<Vec2> dst;
    for (Vec2 p : src) dst.push_back(truth.apply(p) + Vec2{noise(rng), noise(rng)});
    const RigidTransform2D t = estimate_rigid_2d(src, dst);
    CHECK(std::abs(wrap_angle(t.rotation - truth.rotation)) < 0.01);
    CHECK(distance(t.translation, truth.translation) < 0.001);
  }
  SUBCASE("degenerate inputs throw") {
    const std::vector<Vec2> one{{0, 0}};
    CHECK_THROWS_AS(estimate_rigid_2d(one, one), EstimationError);
    const std::vector<Vec2> same{{0.1, 0.1}, {0.1, 0.1}, {0.1, 0.1}};
    CHECK_THROWS_AS(estimate_rigid_2d(same, same), EstimationError);
    const std::vector<Vec2> two{{0, 0}, {1, 0}};
    CHECK_THROWS_AS(estimate_rigid_2d(two, one), EstimationError);
  }
}

TEST_CASE("ransac_rigid") {
  std::mt19937_64 rng(3);
  const RigidTransform2D truth{-1.1, {0.8, 0.4}};

  SUBCASE("exact correspondences") {
    const auto src = random_points(rng, 20, 0.025);
    std::vector<Vec2> dst;
    for (Vec2 p : src) dst.push_back(truth.apply(p));
    RansacParams params;
    const RansacResult r = ransac_rigid(src, dst, params);
    REQUIRE(r);
    CHECK(r.inlier_count == 20);
    CHECK(std::abs(wrap_angle(r.transform->rotation - truth.rotation)) < 1e-9);
    CHECK(distance(r.transform->translation, truth.translation) < 1e-9);
  }
  SUBCASE("inliers plus uniform outliers") {
    auto src = random_points(rng, 20, 0.025);
    std::normal_distribution<double> noise(0.0, 0.0005);
    std::uniform_real_distribution<double> far(-0.5, 0.5);
    std::vector<Vec2> dst;
    for (std::size_t i = 0; i < src.size(); ++i) {
      if (i < 14) {
        dst.push_back(truth.apply(src[i]) + Vec2{noise(rng), noise(rng)});
      } else {
        dst.push_back(truth.translation + Vec2{far(rng), far(rng)});
      }
    }
    RansacParams params;
    params.rng_seed = 11;
    const RansacResult r = ransac_rigid(src, dst, params);
    REQUIRE(r);
    CHECK(r.inlier_count >= 12);
    CHECK(std::abs(wrap_angle(r.transform->rotation - truth.rotation)) < 0.01);
    CHECK(distance(r.transform->translation, truth.translation) < 0.001);
  }
  SUBCASE("three mutually inconsistent correspondences fail") {
    const std::vector<Vec2> src{{0, 0}, {0.01, 0}, {0, 0.01}};
    std::vector<Vec2> dst;
    for (Vec2 p : src) dst.push_back(truth.apply(p));
    dst[2] = dst[2] + Vec2{0.02, 0.0};  // 10x the threshold
    const RansacResult r = ransac_rigid(src, dst, RansacParams{});
    CHECK_FALSE(r);
    CHECK(r.failure == RansacFailure::no_consensus);
  }
  SUBCASE("too few correspondences") {
    const std::vector<Vec2> two{{0, 0}, {1, 0}};
    const RansacResult r = ransac_rigid(two, two, RansacParams{});
    CHECK_FALSE(r);
    CHECK(r.failure == RansacFailure::too_few_matches);
  }
  SUBCASE("same seed, same result") {
    const auto src = random_points(rng, 30, 0.025);
    std::uniform_real_distribution<double> far(-0.1, 0.1);
    std::vector<Vec2> dst;
    for (std::size_t i = 0; i < src.size(); ++i) {
      dst.push_back(i % 2 ? truth.apply(src[i]) : Vec2{far(rng), far(rng)});
    }
    RansacParams params;
    params.rng_seed = 99;
    const RansacResult a = ransac_rigid(src, dst, params);
    const RansacResult b = ransac_rigid(src, dst, params);
    REQUIRE(a);
    REQUIRE(b);
    CHECK(a.transform->rotation == b.transform->rotation);
    CHECK(a.transform->translation == b.transform->translation);
    CHECK(a.inliers == b.inliers);
  }
  SUBCASE("invalid parameters") {
    RansacParams bad;
    bad.min_samples = 1;
    const std::vector<Vec2> pts{{0, 0}, {1, 0}, {0, 1}};
    CHECK_THROWS(ransac_rigid(pts, pts, bad));
    bad = {};
    bad.residual_threshold = 0.0;
    CHECK_THROWS(ransac_rigid(pts, pts, bad));
  }
}

}  // TEST_SUITE
