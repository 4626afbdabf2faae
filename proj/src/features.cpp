#include "floorloc/features.hpp"

#include <stdexcept>

namespace floorloc {

FeatureExtractor::FeatureExtractor(CameraModel cam, DetectorParams params,
                                   std::shared_ptr<const Segmenter> segmenter)
    : cam_(cam), params_(params), segmenter_(std::move(segmenter)) {
  params_.validate();
  if (!segmenter_) throw std::invalid_argument("feature extractor: null segmenter");
}

FeatureExtractor::FeatureExtractor(CameraModel cam)
    : FeatureExtractor(cam, DetectorParams{}, std::make_shared<PaletteSegmenter>()) {}

FrameFeatures FeatureExtractor::extract(const RgbImage& image, std::uint64_t frame_id,
                                        bool keep_patches) const {
  return extract_from_mask(segmenter_->segment(image, frame_id), keep_patches);
}

FrameFeatures FeatureExtractor::extract_from_mask(const SegMask& mask, bool keep_patches) const {
  FrameFeatures out;
  const std::vector<Blob> blobs = connected_components(mask);
  out.n_blobs = blobs.size();
  const std::vector<Keypoint> kps = detect_keypoints(mask, blobs, params_);
  out.features.reserve(kps.size());
  for (const Keypoint& kp : kps) {
    Patch patch = make_patch(mask, kp, blobs[kp.blob_id], cam_);
    Feature f;
    f.keypoint = kp;
    f.camera_offset = cam_.pixel_to_camera(kp.u, kp.v);
    f.descriptor = describe(patch);
    if (keep_patches) f.patch = std::move(patch);
    out.features.push_back(std::move(f));
  }
  return out;
}

}  // namespace floorloc
