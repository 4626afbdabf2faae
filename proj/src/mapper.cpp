#include "floorloc/mapper.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "parallel.hpp"

namespace floorloc {

void OutlierFilterParams::validate() const {
  if (window_size < 3) throw std::invalid_argument("outlier filter: window_size must be >= 3");
  if (!(alpha > 0.0)) throw std::invalid_argument("outlier filter: alpha must be positive");
  if (!(sigma_floor >= 0.0)) throw std::invalid_argument("outlier filter: negative sigma floor");
}

FilterResult filter_pose_outliers(const PoseLog& log, const OutlierFilterParams& params) {
  params.validate();
  FilterResult res;
  const std::size_t n = log.size();
  res.accepted.assign(n, 1);
  if (n < params.window_size) {
    res.kept = log;
    res.too_short = true;
    return res;
  }

  // Windows never span a capture gap (e.g. a lane change), so each
  // continuous segment is filtered on its own.
  const double gap = 1.5 / log.capture_rate;
  std::vector<std::size_t> seg_begin(n);
  std::vector<std::size_t> seg_end(n);
  for (std::size_t i = 0, s = 0; i < n; ++i) {
    if (i > 0 && log.samples[i].t - log.samples[i - 1].t > gap) s = i;
    seg_begin[i] = s;
  }
  for (std::size_t i = n, e = n - 1; i-- > 0;) {
    if (i + 1 < n && seg_begin[i + 1] != seg_begin[i]) e = i;
    seg_end[i] = e;
  }

  const std::size_t half_max = params.window_size / 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t half = std::min({half_max, i - seg_begin[i], seg_end[i] - i});
    if (half < 2) continue;  // too little context to judge
    double mx = 0.0, my = 0.0;
    for (std::size_t j = i - half; j <= i + half; ++j) {
      if (j == i) continue;
      mx += log.samples[j].pose.x;
      my += log.samples[j].pose.y;
    }
    const auto m = static_cast<double>(2 * half);
    mx /= m;
    my /= m;
    double vx = 0.0, vy = 0.0;
    for (std::size_t j = i - half; j <= i + half; ++j) {
      if (j == i) continue;
      vx += (log.samples[j].pose.x - mx) * (log.samples[j].pose.x - mx);
      vy += (log.samples[j].pose.y - my) * (log.samples[j].pose.y - my);
    }
    const double sx = std::max(std::sqrt(vx / m), params.sigma_floor);
    const double sy = std::max(std::sqrt(vy / m), params.sigma_floor);
    const Pose2D& p = log.samples[i].pose;
    if (std::abs(p.x - mx) > params.alpha * sx || std::abs(p.y - my) > params.alpha * sy) {
      res.accepted[i] = 0;
    }
  }
  res.kept.capture_rate = log.capture_rate;
  for (std::size_t i = 0; i < n; ++i) {
    if (res.accepted[i]) {
      res.kept.samples.push_back(log.samples[i]);
    } else {
      ++res.removed;
    }
  }
  return res;
}

Vec2 project_keypoint(const Pose2D& pose, const CameraModel& cam, double u, double v) {
  return cam.pixel_to_world(pose, u, v);
}

void ClusterParams::validate() const {
  if (!(position_radius > 0.0) || !(cosine_threshold > 0.0) || min_members == 0) {
    throw std::invalid_argument("cluster: parameters must be positive");
  }
}

namespace {

void merge_members(const std::vector<std::uint32_t>& members,
                   std::span<const ObservedKeypoint> obs, Vec2& pos, Descriptor& desc) {
  double x = 0.0, y = 0.0;
  std::array<double, kDescriptorDim> sum{};
  for (std::uint32_t m : members) {
    x += obs[m].world_pos.x;
    y += obs[m].world_pos.y;
    for (std::size_t d = 0; d < kDescriptorDim; ++d) sum[d] += obs[m].descriptor[d];
  }
  const auto n = static_cast<double>(members.size());
  pos = {x / n, y / n};
  double sq = 0.0;
  for (double s : sum) sq += s * s;
  if (!(sq > 0.0)) throw std::domain_error("merge: mean descriptor is zero");
  const double inv = 1.0 / std::sqrt(sq);
  for (std::size_t d = 0; d < kDescriptorDim; ++d) desc[d] = static_cast<float>(sum[d] * inv);
}

// Uniform grid over positions for radius queries.
class PointGrid {
 public:
  PointGrid(std::span<const ObservedKeypoint> obs, double cell) : cell_(cell) {
    items_.reserve(obs.size());
    for (std::uint32_t i = 0; i < obs.size(); ++i) {
      items_.push_back({key(cell_of(obs[i].world_pos.x), cell_of(obs[i].world_pos.y)), i});
    }
    std::sort(items_.begin(), items_.end());
  }

  template <typename Fn>
  void for_each_near(Vec2 p, Fn&& fn) const {
    const std::int64_t cx = cell_of(p.x);
    const std::int64_t cy = cell_of(p.y);
    for (std::int64_t dy = -1; dy <= 1; ++dy) {
      for (std::int64_t dx = -1; dx <= 1; ++dx) {
        const std::uint64_t k = key(cx + dx, cy + dy);
        auto it = std::lower_bound(items_.begin(), items_.end(), std::pair<std::uint64_t, std::uint32_t>{k, 0});
        for (; it != items_.end() && it->first == k; ++it) fn(it->second);
      }
    }
  }

 private:
  std::int64_t cell_of(double v) const { return static_cast<std::int64_t>(std::floor(v / cell_)); }
  static std::uint64_t key(std::int64_t x, std::int64_t y) {
    return (static_cast<std::uint64_t>(x + (1 << 30)) << 32) ^
           static_cast<std::uint64_t>(y + (1 << 30));
  }

  double cell_;
  std::vector<std::pair<std::uint64_t, std::uint32_t>> items_;
};

}  // namespace

std::vector<Cluster> cluster_keypoints(std::span<const ObservedKeypoint> obs,
                                       const ClusterParams& params) {
  params.validate();
  std::vector<std::uint32_t> order(obs.size());
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    const ObservedKeypoint& x = obs[a];
    const ObservedKeypoint& y = obs[b];
    if (x.frame_id != y.frame_id) return x.frame_id < y.frame_id;
    if (x.v != y.v) return x.v < y.v;
    if (x.u != y.u) return x.u < y.u;
    return a < b;
  });
  std::vector<std::uint32_t> rank(obs.size());
  for (std::uint32_t r = 0; r < order.size(); ++r) rank[order[r]] = r;

  const PointGrid grid(obs, params.position_radius);
  std::vector<std::uint8_t> labeled(obs.size(), 0);
  std::vector<Cluster> clusters;

  struct Candidate {
    std::uint64_t frame_id;
    double dist;
    std::uint32_t rank;
    std::uint32_t idx;
  };
  std::vector<Candidate> cands;
  for (std::uint32_t seed : order) {
    if (labeled[seed]) continue;
    const ObservedKeypoint& s = obs[seed];
    cands.clear();
    grid.for_each_near(s.world_pos, [&](std::uint32_t j) {
      if (labeled[j] || obs[j].frame_id == s.frame_id) return;
      const double d = distance(obs[j].world_pos, s.world_pos);
      if (d > params.position_radius) return;
      if (!(cosine_distance(s.descriptor, obs[j].descriptor) < params.cosine_threshold)) return;
      cands.push_back({obs[j].frame_id, d, rank[j], j});
    });
    // One member per frame: the nearest, then the earliest in visiting order.
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
      if (a.frame_id != b.frame_id) return a.frame_id < b.frame_id;
      if (a.dist != b.dist) return a.dist < b.dist;
      return a.rank < b.rank;
    });
    std::vector<std::uint32_t> members{seed};
    for (std::size_t i = 0; i < cands.size(); ++i) {
      if (i > 0 && cands[i].frame_id == cands[i - 1].frame_id) continue;
      members.push_back(cands[i].idx);
    }
    if (members.size() < params.min_members) continue;
    for (std::uint32_t m : members) labeled[m] = 1;
    Cluster c;
    c.members = std::move(members);
    merge_members(c.members, obs, c.representative_pos, c.representative_descriptor);
    clusters.push_back(std::move(c));
  }
  return clusters;
}

std::vector<MapEntry> merge_clusters(std::span<const Cluster> clusters,
                                     std::span<const ObservedKeypoint> obs) {
  std::vector<MapEntry> entries;
  entries.reserve(clusters.size());
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    MapEntry e;
    e.entry_id = i;
    e.member_count = static_cast<std::uint32_t>(clusters[i].members.size());
    merge_members(clusters[i].members, obs, e.world_pos, e.descriptor);
    entries.push_back(e);
  }
  return entries;
}

std::string MapperStats::summary() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "frames=%zu pose_outliers=%zu blobs=%zu keypoints=%zu clustered=%zu clusters=%zu",
                n_frames, n_pose_outliers, n_blobs, n_keypoints, n_clustered, n_clusters);
  return buf;
}

MapBuildResult build_map(std::span<const MapRunInput> runs, const FeatureExtractor& extractor,
                         const MapperParams& params) {
  params.cluster.validate();
  MapBuildResult result;
  MapperStats& stats = result.stats;

  struct Item {
    std::size_t run;
    std::size_t sample;
  };
  std::vector<Item> items;
  std::vector<std::uint64_t> ids;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const PoseLog& log = runs[r].log;
    stats.n_frames += log.size();
    const FilterResult filt = filter_pose_outliers(log, params.filter);
    stats.n_pose_outliers += filt.removed;
    for (std::size_t i = 0; i < log.size(); ++i) {
      ids.push_back(log.samples[i].frame_id);
      if (filt.accepted[i]) items.push_back({r, i});
    }
  }
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw std::invalid_argument("build_map: frame ids repeat across runs");
  }

  struct FrameOut {
    std::size_t n_blobs = 0;
    std::vector<ObservedKeypoint> obs;
    std::vector<Patch> patches;
  };
  std::vector<ObservedKeypoint> observations;
  // Frames are processed in blocks so only one block's results are held
  // before being appended in deterministic order.
  constexpr std::size_t kBlock = 512;
  std::vector<FrameOut> block;
  for (std::size_t start = 0; start < items.size(); start += kBlock) {
    const std::size_t count = std::min(kBlock, items.size() - start);
    block.assign(count, FrameOut{});
    detail::parallel_for(count, params.threads, [&](std::size_t k) {
      const Item& it = items[start + k];
      const PoseSample& sample = runs[it.run].log.samples[it.sample];
      const Frame frame = runs[it.run].frames(it.sample);
      FrameFeatures ff = extractor.extract(frame.image, sample.frame_id, params.keep_patches);
      FrameOut& out = block[k];
      out.n_blobs = ff.n_blobs;
      out.obs.reserve(ff.features.size());
      for (Feature& f : ff.features) {
        ObservedKeypoint o;
        o.world_pos = transform_point(RigidTransform2D::from_pose(sample.pose), f.camera_offset);
        o.descriptor = f.descriptor;
        o.frame_id = sample.frame_id;
        o.u = f.keypoint.u;
        o.v = f.keypoint.v;
        if (f.patch) {
          o.patch_index = static_cast<std::int64_t>(out.patches.size());
          out.patches.push_back(std::move(*f.patch));
        }
        out.obs.push_back(o);
      }
    });
    for (FrameOut& out : block) {
      stats.n_blobs += out.n_blobs;
      stats.n_keypoints += out.obs.size();
      const auto patch_base = static_cast<std::int64_t>(result.patches.size());
      for (ObservedKeypoint& o : out.obs) {
        if (o.patch_index >= 0) o.patch_index += patch_base;
        observations.push_back(o);
      }
      for (Patch& p : out.patches) result.patches.push_back(std::move(p));
    }
    if (params.progress) params.progress(start + count, items.size());
  }

  std::vector<Cluster> clusters = cluster_keypoints(observations, params.cluster);
  stats.n_clusters = clusters.size();
  for (const Cluster& c : clusters) stats.n_clustered += c.members.size();
  if (clusters.empty()) throw MapEmptyError(stats);

  result.db = MapDatabase::build(merge_clusters(clusters, observations), params.index);
  if (params.keep_observations || params.keep_patches) {
    result.clusters = std::move(clusters);
    result.observations = std::move(observations);
  }
  return result;
}

std::vector<ClusterPatchSet> cluster_patch_sets(const MapBuildResult& build) {
  std::vector<ClusterPatchSet> sets;
  for (std::size_t i = 0; i < build.clusters.size(); ++i) {
    ClusterPatchSet s;
    s.cluster_id = i;
    for (std::uint32_t m : build.clusters[i].members) {
      const ObservedKeypoint& o = build.observations[m];
      if (o.patch_index < 0) continue;
      s.patches.push_back(&build.patches[static_cast<std::size_t>(o.patch_index)]);
      s.positions.push_back(o.world_pos);
    }
    sets.push_back(std::move(s));
  }
  return sets;
}

}  // namespace floorloc
