#pragma once

// Memoryless per-frame pose estimation against a sealed map.

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "floorloc/features.hpp"
#include "floorloc/mapdb.hpp"

namespace floorloc {

struct LocalizationParams {
  std::size_t k = 20;
  double mode_radius = 0.0285;  // meters, about half the footprint diagonal
  std::size_t min_filtered_matches = 3;
  RansacParams ransac;
  SearchMode search = SearchMode::exact;
  std::uint64_t global_seed = 0;  // per-frame RANSAC seed = global_seed ^ frame_id

  void validate() const;
};

enum class LocStatus { success, no_keypoints, too_few_matches, ransac_failed };

std::string_view status_name(LocStatus s);
std::optional<LocStatus> parse_status(std::string_view s);

struct LocalizationResult {
  std::uint64_t frame_id = 0;
  LocStatus status = LocStatus::no_keypoints;
  std::optional<Pose2D> pose;
  std::size_t n_keypoints = 0;
  std::size_t n_matches = 0;
  std::size_t n_matches_filtered = 0;
  std::size_t inliers = 0;

  bool ok() const { return status == LocStatus::success; }
  friend bool operator==(const LocalizationResult&, const LocalizationResult&) = default;
};

/// A retrieval hit with the geometry needed downstream.
struct PositionedMatch {
  Match match;
  Vec2 query_offset;  // camera frame, meters
  Vec2 map_pos;       // world frame, meters
};

/// Densest spatial concentration of matches: the match with the most others
/// within `radius` (ties: lower distance, then entry id) and everything
/// within `radius` of it, one match per query keypoint (the closest in
/// descriptor space).
std::vector<PositionedMatch> select_mode(std::span<const PositionedMatch> matches, double radius);

class Localizer {
 public:
  Localizer(const MapDatabase& db, const FeatureExtractor& extractor, LocalizationParams params);

  LocalizationResult localize(const RgbImage& image, std::uint64_t frame_id) const;
  LocalizationResult localize_features(const FrameFeatures& features,
                                       std::uint64_t frame_id) const;

  const LocalizationParams& params() const { return params_; }

 private:
  const MapDatabase& db_;
  const FeatureExtractor& extractor_;
  LocalizationParams params_;
};

}  // namespace floorloc
