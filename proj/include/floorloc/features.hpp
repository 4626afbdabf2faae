#pragma once

// Frame -> keypoints with descriptors, shared by mapping and localization.

#include <memory>
#include <optional>
#include <vector>

#include "floorloc/descriptor.hpp"
#include "floorloc/detector.hpp"
#include "floorloc/floorsim.hpp"

namespace floorloc {

struct Feature {
  Keypoint keypoint;
  Vec2 camera_offset;  // meters, camera frame
  Descriptor descriptor;
  std::optional<Patch> patch;
};

struct FrameFeatures {
  std::size_t n_blobs = 0;
  std::vector<Feature> features;
};

class FeatureExtractor {
 public:
  FeatureExtractor(CameraModel cam, DetectorParams params,
                   std::shared_ptr<const Segmenter> segmenter);
  /// Palette segmentation with default parameters.
  explicit FeatureExtractor(CameraModel cam = {});

  FrameFeatures extract(const RgbImage& image, std::uint64_t frame_id,
                        bool keep_patches = false) const;
  FrameFeatures extract_from_mask(const SegMask& mask, bool keep_patches = false) const;

  const CameraModel& camera() const { return cam_; }
  const DetectorParams& detector_params() const { return params_; }

 private:
  CameraModel cam_;
  DetectorParams params_;
  std::shared_ptr<const Segmenter> segmenter_;
};

}  // namespace floorloc
