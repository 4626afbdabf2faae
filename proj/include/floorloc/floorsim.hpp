#pragma once

// Synthetic granulate floor: seeded blob field, a calibrated downward camera,
// and pose logs for mapping and evaluation runs.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "floorloc/geometry.hpp"
#include "floorloc/image.hpp"

namespace floorloc {

struct FloorSpec {
  double width = 2.0;          // meters
  double height = 2.0;         // meters
  double blob_density = 1.2;   // blobs per cm^2
  double radius_min_mm = 0.8;  // equivalent-area radius range
  double radius_max_mm = 2.5;
  // Minor/major axis ratio range; blobs are ellipses with area pi*r^2.
  double aspect_min = 0.55;
  double aspect_max = 0.95;
  std::array<double, 4> color_weights{1.0, 1.0, 1.0, 1.0};  // R, G, B, W
  std::uint64_t rng_seed = 42;

  void validate() const;
};

struct FloorBlob {
  std::uint64_t id = 0;
  Vec2 center;                // meters, world frame
  double semi_major_mm = 0.0;
  double semi_minor_mm = 0.0;
  double orientation = 0.0;   // major axis angle, radians
  ColorClass color = ColorClass::red;

  bool contains(Vec2 world) const;
  double bounding_radius() const { return semi_major_mm * 1e-3; }
};

Rgb nominal_color(ColorClass c);
inline constexpr Rgb kBackgroundColor{10, 10, 10};

/// Immutable blob field with a uniform-grid spatial index.
class FloorTruth {
 public:
  FloorTruth(FloorSpec spec, std::vector<FloorBlob> blobs);

  const FloorSpec& spec() const { return spec_; }
  std::span<const FloorBlob> blobs() const { return blobs_; }

  /// Indices of blobs whose bounding circle may reach the box, ascending.
  void blobs_near(Vec2 lo, Vec2 hi, std::vector<std::uint32_t>& out) const;

  /// Topmost (highest id) blob covering the point, i.e. what a camera sees.
  std::optional<std::uint64_t> blob_at(Vec2 world) const;

 private:
  FloorSpec spec_;
  std::vector<FloorBlob> blobs_;
  double cell_ = 0.005;
  int cols_ = 0;
  int rows_ = 0;
  std::vector<std::uint32_t> cell_start_;
  std::vector<std::uint32_t> cell_items_;
};

/// Blob count = round(density * area_cm2); centers i.i.d. uniform; fully
/// determined by spec.rng_seed.
FloorTruth generate_floor(const FloorSpec& spec);

void save_floor(const FloorTruth& floor, const std::filesystem::path& path);
FloorTruth load_floor(const std::filesystem::path& path);

/// Downward camera. Pixel (u, v) sits at camera-frame offset
/// ((u - cx) * sx, -(v - cy) * sy): +u is camera +x, +v is camera -y.
struct CameraModel {
  int image_width = 632;
  int image_height = 480;
  double footprint_width = 0.0495;   // meters
  double footprint_height = 0.0280;  // meters

  double scale_x() const { return footprint_width / image_width; }   // m/px
  double scale_y() const { return footprint_height / image_height; }  // m/px
  double cx() const { return image_width / 2.0; }
  double cy() const { return image_height / 2.0; }
  double half_diagonal() const { return 0.5 * std::hypot(footprint_width, footprint_height); }

  Vec2 pixel_to_camera(double u, double v) const {
    return {(u - cx()) * scale_x(), -(v - cy()) * scale_y()};
  }
  Vec2 camera_to_pixel(Vec2 c) const { return {c.x / scale_x() + cx(), -c.y / scale_y() + cy()}; }
  Vec2 pixel_to_world(const Pose2D& pose, double u, double v) const;
  Vec2 world_to_pixel(const Pose2D& pose, Vec2 world) const;
};

struct Frame {
  RgbImage image;
  Pose2D truth_pose;
  std::uint64_t frame_id = 0;
};

using FrameSource = std::function<Frame(std::size_t index)>;

/// Rasterizes the view at `pose`; noise is seeded so renders are reproducible.
Frame render_view(const FloorTruth& floor, const CameraModel& cam, const Pose2D& pose,
                  double noise_sigma, std::uint64_t noise_seed, std::uint64_t frame_id = 0);

/// Per-pixel id of the topmost visible blob, -1 for background.
std::vector<std::int64_t> render_blob_ids(const FloorTruth& floor, const CameraModel& cam,
                                          const Pose2D& pose);

/// Per-pixel ColorClass of the topmost visible blob (0 for background).
std::vector<std::uint8_t> render_class_labels(const FloorTruth& floor, const CameraModel& cam,
                                              const Pose2D& pose);

/// Adds seeded, clipped Gaussian noise to every channel in place.
void add_pixel_noise(RgbImage& image, double sigma, std::uint64_t seed);

/// Per-frame noise seed derived from a run seed.
std::uint64_t frame_noise_seed(std::uint64_t run_seed, std::uint64_t frame_id);

struct PoseSample {
  std::uint64_t frame_id = 0;
  double t = 0.0;  // seconds
  Pose2D pose;
};

struct PoseLog {
  std::vector<PoseSample> samples;
  double capture_rate = 60.0;  // Hz

  std::size_t size() const { return samples.size(); }
  void validate() const;
};

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  bool contains(Vec2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
  double area() const { return (x1 - x0) * (y1 - y0); }
};

struct MappingRunParams {
  Vec2 origin;                 // lower-left corner of the square tile
  double tile = 2.0;           // side length, meters
  double lane_spacing = 0.010;
  double speed = 0.2;          // m/s
  double rate = 60.0;          // Hz
  std::uint64_t first_frame_id = 0;
};

/// Number of lanes a zigzag pass uses for the given tile and spacing.
std::size_t mapping_lane_count(double tile, double spacing);

/// Boustrophedon lanes along x; lanes are centered on the tile.
PoseLog generate_mapping_run(const CameraModel& cam, const MappingRunParams& params);

struct EvalRunParams {
  Rect area;
  std::uint64_t path_seed = 0;
  double speed = 0.3;
  double rate = 60.0;
  double pose_noise_sigma = 0.0;  // meters, per axis, applied to the log only
  std::size_t n_frames = 600;
  std::uint64_t first_frame_id = 0;
};

struct EvalRun {
  PoseLog recorded;             // what the motion-capture log reports
  std::vector<Pose2D> actual;   // where the camera really was
};

/// Smooth seeded random walk confined to params.area.
EvalRun generate_eval_run(const EvalRunParams& params);

// Dataset layout: <dir>/poses.csv and <dir>/frames/frame_NNNNNN.ppm.
std::filesystem::path frame_path(const std::filesystem::path& dir, std::uint64_t frame_id);
void persist_run(std::span<const Frame> frames, const PoseLog& log,
                 const std::filesystem::path& dir);

struct LoadedRun {
  PoseLog log;
  std::vector<Frame> frames;
};
LoadedRun load_run(const std::filesystem::path& dir);

}  // namespace floorloc
