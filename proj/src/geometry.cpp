#include "floorloc/geometry.hpp"

#include <algorithm>
#include <numeric>
#include <random>

namespace floorloc {

double wrap_angle(double radians) {
  constexpr double kTwoPi = 2.0 * std::numbers::pi;
  double r = std::fmod(radians, kTwoPi);
  if (r <= -std::numbers::pi) r += kTwoPi;
  if (r > std::numbers::pi) r -= kTwoPi;
  return r;
}

Vec2 RigidTransform2D::apply(Vec2 p) const {
  const double c = std::cos(rotation);
  const double s = std::sin(rotation);
  return {c * p.x - s * p.y + translation.x, s * p.x + c * p.y + translation.y};
}

RigidTransform2D RigidTransform2D::inverse() const {
  const double c = std::cos(rotation);
  const double s = std::sin(rotation);
  // R^T (-t)
  return {-rotation,
          {-(c * translation.x + s * translation.y),
           -(-s * translation.x + c * translation.y)}};
}

RigidTransform2D RigidTransform2D::compose(const RigidTransform2D& inner) const {
  return {wrap_angle(rotation + inner.rotation), apply(inner.translation)};
}

Vec2 transform_point(const RigidTransform2D& t, Vec2 p) { return t.apply(p); }

PoseDelta pose_delta(const Pose2D& a, const Pose2D& b) {
  return {distance(a.position(), b.position()),
          std::abs(wrap_angle(a.theta - b.theta))};
}

RigidTransform2D estimate_rigid_2d(std::span<const Vec2> src,
                                   std::span<const Vec2> dst) {
  if (src.size() != dst.size()) {
    throw EstimationError("rigid estimate: point lists differ in length");
  }
  const std::size_t n = src.size();
  if (n < 2) throw EstimationError("rigid estimate: need at least two pairs");

  Vec2 cs, cd;
  for (std::size_t i = 0; i < n; ++i) {
    cs = cs + src[i];
    cd = cd + dst[i];
  }
  cs = (1.0 / n) * cs;
  cd = (1.0 / n) * cd;

  double spread = 0.0;
  double sum_dot = 0.0;
  double sum_cross = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 a = src[i] - cs;
    const Vec2 b = dst[i] - cd;
    spread += dot(a, a);
    sum_dot += dot(a, b);
    sum_cross += cross(a, b);
  }
  if (!(spread > 1e-24)) {
    throw EstimationError("rigid estimate: source points are coincident");
  }

  // The optimal rotation angle maximizes sum_dot*cos + sum_cross*sin; atan2
  // yields a proper rotation, so reflections never appear.
  RigidTransform2D t;
  t.rotation = std::atan2(sum_cross, sum_dot);
  const double c = std::cos(t.rotation);
  const double s = std::sin(t.rotation);
  t.translation = {cd.x - (c * cs.x - s * cs.y), cd.y - (s * cs.x + c * cs.y)};
  return t;
}

void RansacParams::validate() const {
  if (min_samples < 3) throw std::invalid_argument("ransac: min_samples < 3");
  if (!(residual_threshold > 0.0)) {
    throw std::invalid_argument("ransac: residual_threshold must be > 0");
  }
  if (max_trials < 1) throw std::invalid_argument("ransac: max_trials < 1");
}

namespace {

struct Consensus {
  std::size_t count = 0;
  double residual_sum = 0.0;
  std::vector<std::uint8_t> mask;

  double mean_residual() const {
    return count == 0 ? 0.0 : residual_sum / static_cast<double>(count);
  }
  bool better_than(const Consensus& other) const {
    if (count != other.count) return count > other.count;
    return mean_residual() < other.mean_residual();
  }
};

Consensus score(const RigidTransform2D& t, std::span<const Vec2> src,
                std::span<const Vec2> dst, double threshold) {
  Consensus c;
  c.mask.assign(src.size(), 0);
  for (std::size_t i = 0; i < src.size(); ++i) {
    const double r = distance(t.apply(src[i]), dst[i]);
    if (r < threshold) {
      c.mask[i] = 1;
      ++c.count;
      c.residual_sum += r;
    }
  }
  return c;
}

}  // namespace

RansacResult ransac_rigid(std::span<const Vec2> src, std::span<const Vec2> dst,
                          const RansacParams& params) {
  params.validate();
  if (src.size() != dst.size()) {
    throw std::invalid_argument("ransac: point lists differ in length");
  }
  RansacResult result;
  const std::size_t n = src.size();
  if (n < params.min_samples) {
    result.failure = RansacFailure::too_few_matches;
    return result;
  }

  std::mt19937_64 rng(params.rng_seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<Vec2> sample_src(params.min_samples);
  std::vector<Vec2> sample_dst(params.min_samples);

  std::optional<RigidTransform2D> best_model;
  Consensus best;
  for (std::size_t trial = 0; trial < params.max_trials; ++trial) {
    // Partial Fisher-Yates: the first min_samples slots become the sample.
    for (std::size_t i = 0; i < params.min_samples; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, n - 1);
      std::swap(order[i], order[pick(rng)]);
      sample_src[i] = src[order[i]];
      sample_dst[i] = dst[order[i]];
    }
    RigidTransform2D model;
    try {
      model = estimate_rigid_2d(sample_src, sample_dst);
    } catch (const EstimationError&) {
      continue;
    }
    Consensus c = score(model, src, dst, params.residual_threshold);
    if (!best_model || c.better_than(best)) {
      best_model = model;
      best = std::move(c);
    }
  }

  if (!best_model || best.count < params.min_samples) {
    result.failure = RansacFailure::no_consensus;
    return result;
  }

  // Refit on the consensus set; keep it only if it does not lose support.
  std::vector<Vec2> in_src, in_dst;
  for (std::size_t i = 0; i < n; ++i) {
    if (best.mask[i]) {
      in_src.push_back(src[i]);
      in_dst.push_back(dst[i]);
    }
  }
  RigidTransform2D final_model = *best_model;
  Consensus final_consensus = best;
  try {
    const RigidTransform2D refit = estimate_rigid_2d(in_src, in_dst);
    Consensus c = score(refit, src, dst, params.residual_threshold);
    if (c.count >= best.count) {
      final_model = refit;
      final_consensus = std::move(c);
    }
  } catch (const EstimationError&) {
  }

  result.transform = final_model;
  result.inlier_count = final_consensus.count;
  result.inliers = std::move(final_consensus.mask);
  return result;
}

}  // namespace floorloc
