#pragma once

// Rotation-normalized label patches and the 30-dim blob descriptor.

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "floorloc/detector.hpp"
#include "floorloc/floorsim.hpp"

namespace floorloc {

inline constexpr int kPatchRadius = 64;
inline constexpr int kPatchSide = 2 * kPatchRadius + 1;
inline constexpr std::size_t kDescriptorDim = 30;
inline constexpr int kSectors = 6;

using Descriptor = std::array<float, kDescriptorDim>;

/// Cosine distance of two unit vectors: 1 - dot.
double cosine_distance(const Descriptor& a, const Descriptor& b);

struct EllipseFit {
  double angle = 0.0;         // major axis, camera frame, radians in (-pi/2, pi/2]
  double eccentricity = 0.0;  // sqrt(1 - minor^2/major^2)
  bool degenerate = false;    // circular blob, angle undefined (reported as 0)
};

/// Orientation from second central moments. Moments are taken in metric
/// camera coordinates so that non-square pixels do not skew the angle.
EllipseFit fit_ellipse(const Blob& blob, const CameraModel& cam);

/// Convenience: fit_ellipse(...).angle.
double fit_ellipse_orientation(const Blob& blob, const CameraModel& cam);

/// Cells of the disc of radius kPatchRadius in a kPatchSide grid.
bool in_patch_disc(int col, int row);
std::size_t patch_disc_cells();

struct Patch {
  // Row-major kPatchSide x kPatchSide labels; row 0 is the +y edge, column 0
  // the -x edge. Cells outside the disc are background.
  std::vector<std::uint8_t> labels;
  double angle = 0.0;  // total rotation applied, including the flip
  bool flip_resolved = false;
  ColorClass center_color = ColorClass::red;
  std::uint64_t blob_pixels = 0;
  double eccentricity = 0.0;

  std::uint8_t at(int col, int row) const {
    return labels[static_cast<std::size_t>(row) * kPatchSide + col];
  }
};

/// Samples the disc around the keypoint on an isotropic metric grid (pitch =
/// the finer pixel scale), rotated by `angle` so the major axis lands on +x.
/// Rotates a further pi if the lower half holds strictly more colored cells.
Patch normalize_patch(const SegMask& mask, const Keypoint& kp, double angle,
                      const CameraModel& cam);

/// Full normalization of a detected keypoint: ellipse fit plus patch.
Patch make_patch(const SegMask& mask, const Keypoint& kp, const Blob& blob,
                 const CameraModel& cam);

/// Layout: [0..3] one-hot center color, [4] blob pixels / disc cells,
/// [5] eccentricity, [6..29] class-major fractions of disc cells per color per
/// 60-degree sector (sector 0 starts at +x, counterclockwise). L2-normalized.
/// Throws std::domain_error for a patch without colored cells.
Descriptor describe(const Patch& patch);

/// One cluster's member patches with their world positions.
struct ClusterPatchSet {
  std::uint64_t cluster_id = 0;
  std::vector<const Patch*> patches;
  std::vector<Vec2> positions;
};

/// Writes `per_cluster` seeded-random member patches of each cluster with at
/// least that many members as PGM under <dir>/cluster_NNNNNN/, plus
/// <dir>/manifest.csv. Returns the number of clusters exported.
std::size_t export_training_clusters(std::span<const ClusterPatchSet> clusters,
                                     std::size_t per_cluster, std::uint64_t seed,
                                     const std::filesystem::path& dir);

}  // namespace floorloc
