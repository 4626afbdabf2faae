#pragma once

// Segmentation, connected-component labeling and keypoint selection.

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "floorloc/image.hpp"

namespace floorloc {

/// Per-pixel class labels (ColorClass values), row-major.
struct SegMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  SegMask() = default;
  SegMask(int w, int h) : width(w), height(h), labels(static_cast<std::size_t>(w) * h, 0) {}

  std::uint8_t at(int u, int v) const { return labels[static_cast<std::size_t>(v) * width + u]; }
  void set(int u, int v, ColorClass c) {
    labels[static_cast<std::size_t>(v) * width + u] = static_cast<std::uint8_t>(c);
  }
  friend bool operator==(const SegMask&, const SegMask&) = default;
};

GrayImage to_gray(const SegMask& mask);
SegMask from_gray(const GrayImage& image);  // throws FormatError on labels > 4

/// Horizontal run [u0, u1] on row v.
struct Run {
  int v = 0;
  int u0 = 0;
  int u1 = 0;
};

struct Blob {
  std::uint32_t id = 0;
  ColorClass color = ColorClass::red;
  std::uint64_t pixel_count = 0;
  double cu = 0.0;  // centroid, pixels
  double cv = 0.0;
  // Raw pixel moments about the image origin.
  double sum_uu = 0.0;
  double sum_vv = 0.0;
  double sum_uv = 0.0;
  std::vector<Run> runs;  // sorted by (v, u0)
};

/// 4-connected components of every non-background class. Ids follow raster
/// order of each component's first pixel.
std::vector<Blob> connected_components(const SegMask& mask);

struct Keypoint {
  double u = 0.0;
  double v = 0.0;
  std::uint32_t blob_id = 0;
  ColorClass color = ColorClass::red;
};

struct DetectorParams {
  double border_margin = 64.0;
  std::uint64_t min_blob_area = 150;  // strict: area must exceed this
  int support_radius = 64;
  std::uint64_t min_support_pixels = 500;

  void validate() const;
};

/// Number of colored pixels with (u - cu)^2 + (v - cv)^2 <= radius^2.
std::uint64_t support_count(const SegMask& mask, double cu, double cv, int radius);

/// Same count using the row-run index of the mask's components; identical
/// result, much faster when the disc is mostly background.
class SupportCounter {
 public:
  SupportCounter(const SegMask& mask, std::span<const Blob> blobs);
  std::uint64_t count(double cu, double cv, int radius) const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::vector<std::pair<int, int>>> rows_;  // colored runs per row
};

std::vector<Keypoint> detect_keypoints(const SegMask& mask, std::span<const Blob> blobs,
                                       const DetectorParams& params);

/// Pluggable per-frame segmentation.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual SegMask segment(const RgbImage& image, std::uint64_t frame_id) const = 0;
};

/// Nearest reference color by Euclidean RGB distance; colored winners farther
/// than max_distance fall back to background.
class PaletteSegmenter final : public Segmenter {
 public:
  PaletteSegmenter();
  PaletteSegmenter(std::array<Rgb, kNumClasses> palette, double max_distance);

  SegMask segment(const RgbImage& image, std::uint64_t frame_id = 0) const override;

  const std::array<Rgb, kNumClasses>& palette() const { return palette_; }
  double max_distance() const { return max_distance_; }

 private:
  std::array<Rgb, kNumClasses> palette_;
  double max_distance_;
};

SegMask segment(const RgbImage& image, const std::array<Rgb, kNumClasses>& palette,
                double max_distance);

/// Reads externally produced label maps: <dir>/mask_NNNNNN.pgm per frame.
class MaskFileSegmenter final : public Segmenter {
 public:
  explicit MaskFileSegmenter(std::filesystem::path dir) : dir_(std::move(dir)) {}
  SegMask segment(const RgbImage& image, std::uint64_t frame_id) const override;

  static std::filesystem::path mask_path(const std::filesystem::path& dir, std::uint64_t frame_id);

 private:
  std::filesystem::path dir_;
};

}  // namespace floorloc
