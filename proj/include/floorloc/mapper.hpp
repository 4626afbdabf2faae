#pragma once

// Map creation: pose-outlier removal, keypoint projection, clustering of
// re-observed keypoints and merging into map entries.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "floorloc/features.hpp"
#include "floorloc/mapdb.hpp"

namespace floorloc {

struct OutlierFilterParams {
  std::size_t window_size = 15;
  double alpha = 0.8;
  double sigma_floor = 0.001;  // meters, per axis

  void validate() const;
};

struct FilterResult {
  PoseLog kept;
  std::vector<std::uint8_t> accepted;  // per input sample
  std::size_t removed = 0;
  bool too_short = false;  // log shorter than the window, returned unfiltered
};

/// Rejects a sample when its position differs from the mean of the window
/// of neighboring raw positions (centered, sample itself excluded) by more
/// than alpha * max(sigma, sigma_floor) on either axis.
FilterResult filter_pose_outliers(const PoseLog& log, const OutlierFilterParams& params);

Vec2 project_keypoint(const Pose2D& pose, const CameraModel& cam, double u, double v);

struct ObservedKeypoint {
  Vec2 world_pos;
  Descriptor descriptor{};
  std::uint64_t frame_id = 0;
  double u = 0.0;
  double v = 0.0;
  std::int64_t patch_index = -1;  // into the build's patch store, if kept
};

struct ClusterParams {
  double position_radius = 0.005;
  double cosine_threshold = 0.1;
  std::size_t min_members = 4;  // seed included

  void validate() const;
};

struct Cluster {
  std::vector<std::uint32_t> members;  // observation indices, seed first
  Vec2 representative_pos;
  Descriptor representative_descriptor{};
};

/// Simplified DBSCAN without transitive expansion. Observations are visited
/// in (frame_id, v, u) order; each unlabeled seed claims unlabeled candidates
/// from other frames within position_radius and below cosine_threshold, one
/// per frame (the nearest). Groups of at least min_members become clusters.
std::vector<Cluster> cluster_keypoints(std::span<const ObservedKeypoint> obs,
                                       const ClusterParams& params);

/// Centroid position and renormalized mean descriptor; entry ids follow
/// cluster order. Throws std::domain_error on a zero mean descriptor.
std::vector<MapEntry> merge_clusters(std::span<const Cluster> clusters,
                                     std::span<const ObservedKeypoint> obs);

struct MapRunInput {
  PoseLog log;          // recorded poses, one per frame
  FrameSource frames;   // frame for sample index i
};

struct MapperParams {
  OutlierFilterParams filter;
  ClusterParams cluster;
  IndexParams index;
  bool keep_patches = false;
  bool keep_observations = false;
  unsigned threads = 0;  // 0: hardware concurrency
  std::function<void(std::size_t done, std::size_t total)> progress;  // frames processed
};

struct MapperStats {
  std::size_t n_frames = 0;
  std::size_t n_pose_outliers = 0;
  std::size_t n_blobs = 0;
  std::size_t n_keypoints = 0;
  std::size_t n_clustered = 0;
  std::size_t n_clusters = 0;

  std::string summary() const;
};

class MapEmptyError : public std::runtime_error {
 public:
  explicit MapEmptyError(const MapperStats& stats)
      : std::runtime_error("map empty: " + stats.summary()), stats_(stats) {}
  const MapperStats& stats() const { return stats_; }

 private:
  MapperStats stats_;
};

struct MapBuildResult {
  MapDatabase db;
  MapperStats stats;
  std::vector<Cluster> clusters;             // when keep_observations
  std::vector<ObservedKeypoint> observations;  // when keep_observations
  std::vector<Patch> patches;                // when keep_patches
};

/// Filter -> detect -> describe -> project -> cluster -> merge -> index.
/// Frame ids must be unique across all runs.
MapBuildResult build_map(std::span<const MapRunInput> runs, const FeatureExtractor& extractor,
                         const MapperParams& params);

/// Bridges clusters to the descriptor module's training export.
std::vector<ClusterPatchSet> cluster_patch_sets(const MapBuildResult& build);

}  // namespace floorloc
