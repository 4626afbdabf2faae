#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

namespace floorloc {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(a - b); }

/// Wraps an angle into (-pi, pi].
double wrap_angle(double radians);

/// Planar pose: position in meters, heading in radians (counterclockwise).
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Vec2 position() const { return {x, y}; }
  Pose2D normalized() const { return {x, y, wrap_angle(theta)}; }
  friend bool operator==(const Pose2D&, const Pose2D&) = default;
};

/// Rotation followed by translation: p' = R(rotation) p + translation.
struct RigidTransform2D {
  double rotation = 0.0;
  Vec2 translation;

  static RigidTransform2D identity() { return {}; }
  static RigidTransform2D from_pose(const Pose2D& pose) {
    return {pose.theta, pose.position()};
  }

  Vec2 apply(Vec2 p) const;
  RigidTransform2D inverse() const;
  /// Returns this ∘ inner, i.e. applies `inner` first.
  RigidTransform2D compose(const RigidTransform2D& inner) const;
};

Vec2 transform_point(const RigidTransform2D& t, Vec2 p);

struct PoseDelta {
  double distance = 0.0;  // meters
  double angle = 0.0;     // radians in [0, pi]
};

PoseDelta pose_delta(const Pose2D& a, const Pose2D& b);

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Least-squares rigid alignment (rotation + translation, no scale, no
/// reflection) minimizing sum |t(src_i) - dst_i|^2.
/// Throws EstimationError on fewer than two pairs or coincident sources.
RigidTransform2D estimate_rigid_2d(std::span<const Vec2> src,
                                   std::span<const Vec2> dst);

struct RansacParams {
  std::size_t min_samples = 3;
  double residual_threshold = 0.002;  // meters
  std::size_t max_trials = 100;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

enum class RansacFailure { none, too_few_matches, no_consensus };

struct RansacResult {
  std::optional<RigidTransform2D> transform;
  std::vector<std::uint8_t> inliers;
  std::size_t inlier_count = 0;
  RansacFailure failure = RansacFailure::none;

  explicit operator bool() const { return transform.has_value(); }
};

RansacResult ransac_rigid(std::span<const Vec2> src, std::span<const Vec2> dst,
                          const RansacParams& params);

}  // namespace floorloc
