#include "floorloc/localizer.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace floorloc {

void LocalizationParams::validate() const {
  ransac.validate();
  if (k == 0) throw std::invalid_argument("localizer: k must be >= 1");
  if (!(mode_radius > 0.0)) throw std::invalid_argument("localizer: mode_radius must be positive");
  if (min_filtered_matches < ransac.min_samples) {
    throw std::invalid_argument("localizer: min_filtered_matches below RANSAC sample size");
  }
}

std::string_view status_name(LocStatus s) {
  switch (s) {
    case LocStatus::success:
      return "success";
    case LocStatus::no_keypoints:
      return "no_keypoints";
    case LocStatus::too_few_matches:
      return "too_few_matches";
    case LocStatus::ransac_failed:
      return "ransac_failed";
  }
  return "unknown";
}

std::optional<LocStatus> parse_status(std::string_view s) {
  for (LocStatus st : {LocStatus::success, LocStatus::no_keypoints, LocStatus::too_few_matches,
                       LocStatus::ransac_failed}) {
    if (status_name(st) == s) return st;
  }
  return std::nullopt;
}

std::vector<PositionedMatch> select_mode(std::span<const PositionedMatch> matches,
                                         double radius) {
  std::vector<PositionedMatch> out;
  if (matches.empty()) return out;
  const double r2 = radius * radius;
  auto near = [&](const PositionedMatch& a, const PositionedMatch& b) {
    const Vec2 d = a.map_pos - b.map_pos;
    return d.x * d.x + d.y * d.y <= r2;
  };

  std::size_t best = 0;
  std::size_t best_count = 0;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    std::size_t count = 0;
    for (const PositionedMatch& m : matches) count += near(matches[i], m) ? 1 : 0;
    const Match& a = matches[i].match;
    const Match& b = matches[best].match;
    const bool better =
        i == 0 || count > best_count ||
        (count == best_count && (a.cosine_distance < b.cosine_distance ||
                                 (a.cosine_distance == b.cosine_distance && a.entry_id < b.entry_id)));
    if (better) {
      best = i;
      best_count = count;
    }
  }

  // Lowest-distance match per query keypoint inside the winning region.
  std::map<std::uint32_t, std::size_t> per_query;
  for (std::size_t i = 0; i < matches.size(); ++i) {
    if (!near(matches[best], matches[i])) continue;
    const std::uint32_t q = matches[i].match.query_keypoint_idx;
    auto it = per_query.find(q);
    if (it == per_query.end()) {
      per_query.emplace(q, i);
      continue;
    }
    const Match& cur = matches[it->second].match;
    const Match& cand = matches[i].match;
    if (cand.cosine_distance < cur.cosine_distance ||
        (cand.cosine_distance == cur.cosine_distance && cand.entry_id < cur.entry_id)) {
      it->second = i;
    }
  }
  for (const auto& [q, i] : per_query) out.push_back(matches[i]);
  return out;
}

Localizer::Localizer(const MapDatabase& db, const FeatureExtractor& extractor,
                     LocalizationParams params)
    : db_(db), extractor_(extractor), params_(params) {
  params_.validate();
}

LocalizationResult Localizer::localize(const RgbImage& image, std::uint64_t frame_id) const {
  return localize_features(extractor_.extract(image, frame_id), frame_id);
}

LocalizationResult Localizer::localize_features(const FrameFeatures& features,
                                                std::uint64_t frame_id) const {
  LocalizationResult res;
  res.frame_id = frame_id;
  res.n_keypoints = features.features.size();
  if (features.features.empty()) {
    res.status = LocStatus::no_keypoints;
    return res;
  }

  std::vector<PositionedMatch> all;
  for (std::size_t q = 0; q < features.features.size(); ++q) {
    const Feature& f = features.features[q];
    for (const Match& m :
         db_.query(f.descriptor, params_.k, params_.search, static_cast<std::uint32_t>(q))) {
      const MapEntry* e = db_.find(m.entry_id);
      all.push_back({m, f.camera_offset, e->world_pos});
    }
  }
  res.n_matches = all.size();

  const std::vector<PositionedMatch> filtered = select_mode(all, params_.mode_radius);
  res.n_matches_filtered = filtered.size();
  if (filtered.size() < params_.min_filtered_matches) {
    res.status = LocStatus::too_few_matches;
    return res;
  }

  std::vector<Vec2> src, dst;
  for (const PositionedMatch& m : filtered) {
    src.push_back(m.query_offset);
    dst.push_back(m.map_pos);
  }
  RansacParams rp = params_.ransac;
  rp.rng_seed = params_.global_seed ^ frame_id;
  const RansacResult rr = ransac_rigid(src, dst, rp);
  if (!rr) {
    res.status = LocStatus::ransac_failed;
    return res;
  }
  res.inliers = rr.inlier_count;
  const RigidTransform2D& t = *rr.transform;
  res.pose = Pose2D{t.translation.x, t.translation.y, wrap_angle(t.rotation)};
  res.status = LocStatus::success;
  return res;
}

}  // namespace floorloc
