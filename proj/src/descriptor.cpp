#include "floorloc/descriptor.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include "floorloc/errors.hpp"
#include "floorloc/image_io.hpp"

namespace floorloc {

double cosine_distance(const Descriptor& a, const Descriptor& b) {
  double dot = 0.0;
  for (std::size_t i = 0; i < kDescriptorDim; ++i) dot += static_cast<double>(a[i]) * b[i];
  return 1.0 - dot;
}

EllipseFit fit_ellipse(const Blob& blob, const CameraModel& cam) {
  EllipseFit fit;
  if (blob.pixel_count < 3) {
    fit.degenerate = true;
    return fit;
  }
  const auto n = static_cast<double>(blob.pixel_count);
  const double muu = blob.sum_uu / n - blob.cu * blob.cu;
  const double mvv = blob.sum_vv / n - blob.cv * blob.cv;
  const double muv = blob.sum_uv / n - blob.cu * blob.cv;
  const double sx = cam.scale_x();
  const double sy = cam.scale_y();
  // Camera y points against image v.
  const double mxx = sx * sx * muu;
  const double myy = sy * sy * mvv;
  const double mxy = -sx * sy * muv;

  const double trace = mxx + myy;
  const double half_diff = 0.5 * (mxx - myy);
  const double spread = std::sqrt(half_diff * half_diff + mxy * mxy);
  if (!(trace > 0.0) || spread <= 1e-9 * trace) {
    fit.degenerate = true;
    return fit;
  }
  fit.angle = 0.5 * std::atan2(2.0 * mxy, mxx - myy);
  // Rounding in the moments can land a vertical axis just above -pi/2.
  if (fit.angle <= -0.5 * std::numbers::pi + 1e-12) fit.angle += std::numbers::pi;
  const double lmax = 0.5 * trace + spread;
  const double lmin = std::max(0.0, 0.5 * trace - spread);
  fit.eccentricity = std::sqrt(std::clamp(1.0 - lmin / lmax, 0.0, 1.0));
  return fit;
}

double fit_ellipse_orientation(const Blob& blob, const CameraModel& cam) {
  return fit_ellipse(blob, cam).angle;
}

namespace {

struct DiscTable {
  std::vector<std::uint8_t> inside;  // per cell
  std::vector<std::uint8_t> sector;  // per cell, valid inside the disc
  std::vector<int> row_half;         // disc spans columns [r - h, r + h]
  std::size_t cells = 0;

  DiscTable()
      : inside(kPatchSide * kPatchSide), sector(kPatchSide * kPatchSide), row_half(kPatchSide, -1) {
    const int r2 = kPatchRadius * kPatchRadius;
    for (int row = 0; row < kPatchSide; ++row) {
      for (int col = 0; col < kPatchSide; ++col) {
        const int x = col - kPatchRadius;
        const int y = kPatchRadius - row;
        const std::size_t i = static_cast<std::size_t>(row) * kPatchSide + col;
        if (x * x + y * y > r2) continue;
        inside[i] = 1;
        row_half[static_cast<std::size_t>(row)] = std::max(row_half[static_cast<std::size_t>(row)], x);
        ++cells;
        double a = std::atan2(static_cast<double>(y), static_cast<double>(x));
        if (a < 0.0) a += 2.0 * std::numbers::pi;
        const int s = static_cast<int>(a / (2.0 * std::numbers::pi / kSectors));
        sector[i] = static_cast<std::uint8_t>(std::min(s, kSectors - 1));
      }
    }
  }
};

const DiscTable& disc_table() {
  static const DiscTable t;
  return t;
}

}  // namespace

bool in_patch_disc(int col, int row) {
  if (col < 0 || row < 0 || col >= kPatchSide || row >= kPatchSide) return false;
  return disc_table().inside[static_cast<std::size_t>(row) * kPatchSide + col] != 0;
}

std::size_t patch_disc_cells() { return disc_table().cells; }

Patch normalize_patch(const SegMask& mask, const Keypoint& kp, double angle,
                      const CameraModel& cam) {
  const DiscTable& disc = disc_table();
  const double pitch = std::min(cam.scale_x(), cam.scale_y());
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  // Grid step expressed in pixels along each image axis.
  const double ku = pitch / cam.scale_x();
  const double kv = pitch / cam.scale_y();

  Patch patch;
  patch.labels.assign(static_cast<std::size_t>(kPatchSide) * kPatchSide, 0);
  patch.angle = angle;
  patch.center_color = kp.color;
  std::size_t upper = 0;
  std::size_t lower = 0;
  for (int row = 0; row < kPatchSide; ++row) {
    const int y = kPatchRadius - row;
    const int half = disc.row_half[static_cast<std::size_t>(row)];
    for (int x = -half; x <= half; ++x) {
      const double fu = kp.u + (c * x - s * y) * ku + 0.5;
      const double fv = kp.v - (s * x + c * y) * kv + 0.5;
      // Truncation equals floor here because negative values are rejected.
      if (fu < 0.0 || fv < 0.0) continue;
      const int u = static_cast<int>(fu);
      const int v = static_cast<int>(fv);
      if (u >= mask.width || v >= mask.height) continue;
      const std::uint8_t label = mask.at(u, v);
      patch.labels[static_cast<std::size_t>(row) * kPatchSide + (x + kPatchRadius)] = label;
      if (is_colored(label)) {
        if (y > 0) ++upper;
        if (y < 0) ++lower;
      }
    }
  }
  if (lower > upper) {
    std::reverse(patch.labels.begin(), patch.labels.end());
    patch.angle = wrap_angle(angle + std::numbers::pi);
    patch.flip_resolved = true;
  }
  return patch;
}

Patch make_patch(const SegMask& mask, const Keypoint& kp, const Blob& blob,
                 const CameraModel& cam) {
  const EllipseFit fit = fit_ellipse(blob, cam);
  Patch p = normalize_patch(mask, kp, fit.angle, cam);
  p.blob_pixels = blob.pixel_count;
  p.eccentricity = fit.eccentricity;
  return p;
}

Descriptor describe(const Patch& patch) {
  const DiscTable& disc = disc_table();
  std::array<std::uint32_t, kNumColors * kSectors> counts{};
  std::size_t colored = 0;
  for (std::size_t i = 0; i < patch.labels.size(); ++i) {
    const std::uint8_t label = patch.labels[i];
    if (!disc.inside[i] || !is_colored(label)) continue;
    ++counts[static_cast<std::size_t>(label - 1) * kSectors + disc.sector[i]];
    ++colored;
  }
  if (colored == 0) throw std::domain_error("describe: patch has no colored cells");

  const auto cells = static_cast<double>(disc.cells);
  std::array<double, kDescriptorDim> f{};
  if (is_colored(static_cast<std::uint8_t>(patch.center_color))) {
    f[static_cast<std::size_t>(patch.center_color) - 1] = 1.0;
  }
  f[4] = static_cast<double>(patch.blob_pixels) / cells;
  f[5] = patch.eccentricity;
  for (std::size_t i = 0; i < counts.size(); ++i) f[6 + i] = counts[i] / cells;

  double sq = 0.0;
  for (double x : f) sq += x * x;
  const double inv = 1.0 / std::sqrt(sq);
  Descriptor d;
  for (std::size_t i = 0; i < kDescriptorDim; ++i) d[i] = static_cast<float>(f[i] * inv);
  return d;
}

std::size_t export_training_clusters(std::span<const ClusterPatchSet> clusters,
                                     std::size_t per_cluster, std::uint64_t seed,
                                     const std::filesystem::path& dir) {
  if (per_cluster == 0) throw std::invalid_argument("export: per_cluster must be positive");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create export directory");
  std::ofstream manifest(dir / "manifest.csv", std::ios::trunc);
  if (!manifest) throw IoError(dir / "manifest.csv", "cannot open for writing");
  manifest << "cluster_id,member_idx,file,world_x,world_y\n";

  std::mt19937_64 rng(seed);
  std::size_t exported = 0;
  for (const ClusterPatchSet& c : clusters) {
    if (c.patches.size() < per_cluster) continue;
    if (c.positions.size() != c.patches.size()) {
      throw std::invalid_argument("export: patch and position counts differ");
    }
    std::vector<std::size_t> idx(c.patches.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < per_cluster; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    std::sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(per_cluster));

    char sub[40];
    std::snprintf(sub, sizeof(sub), "cluster_%06" PRIu64, c.cluster_id);
    std::filesystem::create_directories(dir / sub, ec);
    if (ec) throw IoError(dir / sub, "cannot create cluster directory");
    for (std::size_t i = 0; i < per_cluster; ++i) {
      const std::size_t m = idx[i];
      char name[32];
      std::snprintf(name, sizeof(name), "member_%03zu.pgm", m);
      GrayImage img(kPatchSide, kPatchSide);
      img.data = c.patches[m]->labels;
      write_pgm(dir / sub / name, img);
      char line[160];
      std::snprintf(line, sizeof(line), "%" PRIu64 ",%zu,%s/%s,%.6f,%.6f\n", c.cluster_id, m,
                    sub, name, c.positions[m].x, c.positions[m].y);
      manifest << line;
    }
    ++exported;
  }
  if (!manifest) throw IoError(dir / "manifest.csv", "write failed");
  return exported;
}

}  // namespace floorloc
