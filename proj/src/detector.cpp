#include "floorloc/detector.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "floorloc/errors.hpp"
#include "floorloc/floorsim.hpp"
#include "floorloc/image_io.hpp"
#include "floorloc/simd/kernels.hpp"

namespace floorloc {

GrayImage to_gray(const SegMask& mask) {
  GrayImage g(mask.width, mask.height);
  g.data = mask.labels;
  return g;
}

SegMask from_gray(const GrayImage& image) {
  SegMask m(image.width, image.height);
  for (std::size_t i = 0; i < image.data.size(); ++i) {
    if (image.data[i] >= kNumClasses) {
      throw FormatError(FormatError::Kind::malformed,
                        "mask label " + std::to_string(image.data[i]) + " out of range");
    }
  }
  m.labels = image.data;
  return m;
}

namespace {

std::uint32_t find_root(std::vector<std::uint32_t>& parent, std::uint32_t x) {
  while (parent[x] != x) {
    parent[x] = parent[parent[x]];
    x = parent[x];
  }
  return x;
}

void unite(std::vector<std::uint32_t>& parent, std::uint32_t a, std::uint32_t b) {
  a = find_root(parent, a);
  b = find_root(parent, b);
  if (a == b) return;
  if (a < b) {
    parent[b] = a;
  } else {
    parent[a] = b;
  }
}

struct LabeledRun {
  Run run;
  std::uint8_t cls;
};

}  // namespace

std::vector<Blob> connected_components(const SegMask& mask) {
  const int w = mask.width;
  const int h = mask.height;
  const auto& k = simd::active();

  // Pass 1: runs per row, provisional labels linked to overlapping runs of the
  // same class on the previous row.
  std::vector<LabeledRun> runs;
  std::vector<std::uint32_t> parent;
  std::size_t prev_begin = 0;
  std::size_t prev_end = 0;
  for (int v = 0; v < h; ++v) {
    const std::uint8_t* row = mask.labels.data() + static_cast<std::size_t>(v) * w;
    const std::size_t row_begin = runs.size();
    int u = 0;
    while (u < w) {
      u += static_cast<int>(k.find_nonzero(row + u, static_cast<std::size_t>(w - u)));
      if (u >= w) break;
      const std::uint8_t cls = row[u];
      int end = u;
      while (end + 1 < w && row[end + 1] == cls) ++end;
      const auto id = static_cast<std::uint32_t>(runs.size());
      runs.push_back({{v, u, end}, cls});
      parent.push_back(id);
      u = end + 1;
    }
    // Both rows are sorted by u0, so one merge-style sweep finds all overlaps.
    std::size_t p = prev_begin;
    for (std::size_t c = row_begin; c < runs.size(); ++c) {
      const Run& cur = runs[c].run;
      while (p < prev_end && runs[p].run.u1 < cur.u0) ++p;
      for (std::size_t q = p; q < prev_end && runs[q].run.u0 <= cur.u1; ++q) {
        if (runs[q].cls == runs[c].cls) {
          unite(parent, static_cast<std::uint32_t>(q), static_cast<std::uint32_t>(c));
        }
      }
    }
    prev_begin = row_begin;
    prev_end = runs.size();
  }

  // Pass 2: dense ids in raster order and moment accumulation.
  std::vector<Blob> blobs;
  std::vector<std::int64_t> root_to_blob(runs.size(), -1);
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const std::uint32_t root = find_root(parent, static_cast<std::uint32_t>(i));
    if (root_to_blob[root] < 0) {
      root_to_blob[root] = static_cast<std::int64_t>(blobs.size());
      Blob b;
      b.id = static_cast<std::uint32_t>(blobs.size());
      b.color = static_cast<ColorClass>(runs[i].cls);
      blobs.push_back(std::move(b));
    }
    Blob& b = blobs[static_cast<std::size_t>(root_to_blob[root])];
    const Run& r = runs[i].run;
    const double n = r.u1 - r.u0 + 1;
    const double su = (static_cast<double>(r.u0) + r.u1) * n / 2.0;
    // Sum of u^2 over [u0, u1] by the closed form.
    auto sq_sum = [](double m) { return m * (m + 1.0) * (2.0 * m + 1.0) / 6.0; };
    const double suu = sq_sum(r.u1) - sq_sum(r.u0 - 1.0);
    b.pixel_count += static_cast<std::uint64_t>(n);
    b.cu += su;
    b.cv += n * r.v;
    b.sum_uu += suu;
    b.sum_vv += n * r.v * static_cast<double>(r.v);
    b.sum_uv += su * r.v;
    b.runs.push_back(r);
  }
  for (Blob& b : blobs) {
    const auto n = static_cast<double>(b.pixel_count);
    b.cu /= n;
    b.cv /= n;
  }
  return blobs;
}

void DetectorParams::validate() const {
  if (!(border_margin > 0.0) || min_blob_area == 0 || support_radius <= 0 ||
      min_support_pixels == 0) {
    throw std::invalid_argument("detector: parameters must be positive");
  }
}

namespace {

// Inclusive column range of the disc on row v, or false if the row misses it.
bool disc_span(double cu, double cv, int radius, int v, int& lo, int& hi) {
  const double r2 = static_cast<double>(radius) * radius;
  const double dy = v - cv;
  if (dy * dy > r2) return false;
  const double half = std::sqrt(r2 - dy * dy);
  lo = static_cast<int>(std::ceil(cu - half));
  hi = static_cast<int>(std::floor(cu + half));
  auto inside = [&](int u) { return (u - cu) * (u - cu) + dy * dy <= r2; };
  // Settle rounding in sqrt against the exact predicate.
  while (!inside(lo) && lo <= hi) ++lo;
  while (inside(lo - 1)) --lo;
  while (!inside(hi) && hi >= lo) --hi;
  while (inside(hi + 1)) ++hi;
  return lo <= hi;
}

}  // namespace

std::uint64_t support_count(const SegMask& mask, double cu, double cv, int radius) {
  const double r2 = static_cast<double>(radius) * radius;
  std::uint64_t count = 0;
  const int v0 = std::max(0, static_cast<int>(std::floor(cv - radius)));
  const int v1 = std::min(mask.height - 1, static_cast<int>(std::ceil(cv + radius)));
  const int u0 = std::max(0, static_cast<int>(std::floor(cu - radius)));
  const int u1 = std::min(mask.width - 1, static_cast<int>(std::ceil(cu + radius)));
  for (int v = v0; v <= v1; ++v) {
    for (int u = u0; u <= u1; ++u) {
      const double du = u - cu;
      const double dv = v - cv;
      if (du * du + dv * dv <= r2 && is_colored(mask.at(u, v))) ++count;
    }
  }
  return count;
}

SupportCounter::SupportCounter(const SegMask& mask, std::span<const Blob> blobs)
    : width_(mask.width), height_(mask.height), rows_(static_cast<std::size_t>(mask.height)) {
  for (const Blob& b : blobs) {
    for (const Run& r : b.runs) rows_[static_cast<std::size_t>(r.v)].emplace_back(r.u0, r.u1);
  }
  for (auto& row : rows_) std::sort(row.begin(), row.end());
}

std::uint64_t SupportCounter::count(double cu, double cv, int radius) const {
  std::uint64_t total = 0;
  const int v0 = std::max(0, static_cast<int>(std::floor(cv - radius)));
  const int v1 = std::min(height_ - 1, static_cast<int>(std::ceil(cv + radius)));
  for (int v = v0; v <= v1; ++v) {
    int lo, hi;
    if (!disc_span(cu, cv, radius, v, lo, hi)) continue;
    lo = std::max(lo, 0);
    hi = std::min(hi, width_ - 1);
    if (lo > hi) continue;
    const auto& row = rows_[static_cast<std::size_t>(v)];
    auto it = std::lower_bound(row.begin(), row.end(), std::pair<int, int>{lo, lo});
    if (it != row.begin() && std::prev(it)->second >= lo) --it;
    for (; it != row.end() && it->first <= hi; ++it) {
      const int a = std::max(lo, it->first);
      const int b = std::min(hi, it->second);
      if (a <= b) total += static_cast<std::uint64_t>(b - a + 1);
    }
  }
  return total;
}

std::vector<Keypoint> detect_keypoints(const SegMask& mask, std::span<const Blob> blobs,
                                       const DetectorParams& params) {
  std::vector<Keypoint> out;
  std::optional<SupportCounter> counter;
  for (const Blob& b : blobs) {
    const double border = std::min({b.cu, b.cv, mask.width - 1 - b.cu, mask.height - 1 - b.cv});
    if (border < params.border_margin) continue;
    if (b.pixel_count <= params.min_blob_area) continue;
    if (!counter) counter.emplace(mask, blobs);
    if (counter->count(b.cu, b.cv, params.support_radius) < params.min_support_pixels) continue;
    out.push_back({b.cu, b.cv, b.id, b.color});
  }
  return out;
}

namespace {

std::array<Rgb, kNumClasses> default_palette() {
  return {kBackgroundColor, nominal_color(ColorClass::red), nominal_color(ColorClass::green),
          nominal_color(ColorClass::blue), nominal_color(ColorClass::white)};
}

}  // namespace

PaletteSegmenter::PaletteSegmenter() : PaletteSegmenter(default_palette(), 90.0) {}

PaletteSegmenter::PaletteSegmenter(std::array<Rgb, kNumClasses> palette, double max_distance)
    : palette_(palette), max_distance_(max_distance) {
  if (!(max_distance >= 0.0)) throw std::invalid_argument("segmenter: negative max_distance");
}

SegMask PaletteSegmenter::segment(const RgbImage& image, std::uint64_t) const {
  return floorloc::segment(image, palette_, max_distance_);
}

SegMask segment(const RgbImage& image, const std::array<Rgb, kNumClasses>& palette,
                double max_distance) {
  simd::PaletteTable table{};
  for (int c = 0; c < kNumClasses; ++c) {
    table.r[c] = palette[c].r;
    table.g[c] = palette[c].g;
    table.b[c] = palette[c].b;
  }
  // Squared distances are integers, so d2 > max^2 iff d2 > floor(max^2).
  table.max_dist_sq = static_cast<std::int32_t>(
      std::min(std::floor(max_distance * max_distance), 3.0 * 255 * 255));
  SegMask mask(image.width, image.height);
  simd::active().classify_rgb(image.data.data(), image.pixel_count(), table,
                              mask.labels.data());
  return mask;
}

std::filesystem::path MaskFileSegmenter::mask_path(const std::filesystem::path& dir,
                                                   std::uint64_t frame_id) {
  char name[48];
  std::snprintf(name, sizeof(name), "mask_%06" PRIu64 ".pgm", frame_id);
  return dir / name;
}

SegMask MaskFileSegmenter::segment(const RgbImage& image, std::uint64_t frame_id) const {
  SegMask m = from_gray(read_pgm(mask_path(dir_, frame_id)));
  if (m.width != image.width || m.height != image.height) {
    throw FormatError(FormatError::Kind::malformed,
                      "mask size differs from frame: " + mask_path(dir_, frame_id).string());
  }
  return m;
}

}  // namespace floorloc
