#pragma once

#include <atomic>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <random>
#include <string>
#include <unistd.h>
#include <vector>

#include "floorloc/detector.hpp"

namespace testing {

class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("floorloc_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Random mask of filled rectangles, discs and speckles in the four colors.
inline floorloc::SegMask random_mask(std::uint64_t seed, int w = 632, int h = 480) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> cls(1, 4);
  floorloc::SegMask m(w, h);
  std::uniform_int_distribution<int> n_shapes(20, 120);
  const int shapes = n_shapes(rng);
  for (int s = 0; s < shapes; ++s) {
    const int c = cls(rng);
    const int cu = std::uniform_int_distribution<int>(0, w - 1)(rng);
    const int cv = std::uniform_int_distribution<int>(0, h - 1)(rng);
    const int r = std::uniform_int_distribution<int>(1, 30)(rng);
    const bool disc = rng() & 1;
    for (int v = std::max(0, cv - r); v <= std::min(h - 1, cv + r); ++v) {
      for (int u = std::max(0, cu - r); u <= std::min(w - 1, cu + r); ++u) {
        if (disc && (u - cu) * (u - cu) + (v - cv) * (v - cv) > r * r) continue;
        m.labels[static_cast<std::size_t>(v) * w + u] = static_cast<std::uint8_t>(c);
      }
    }
  }
  // Speckle: single pixels of any class, including background holes.
  std::uniform_int_distribution<std::size_t> px(0, m.labels.size() - 1);
  std::uniform_int_distribution<int> any(0, 4);
  for (int i = 0; i < w * h / 50; ++i) m.labels[px(rng)] = static_cast<std::uint8_t>(any(rng));
  return m;
}

// Breadth-first 4-connected labeling; -1 for background.
inline std::vector<int> flood_fill_labels(const floorloc::SegMask& m) {
  std::vector<int> out(m.labels.size(), -1);
  int next = 0;
  std::deque<std::pair<int, int>> queue;
  for (int v = 0; v < m.height; ++v) {
    for (int u = 0; u < m.width; ++u) {
      const std::size_t i = static_cast<std::size_t>(v) * m.width + u;
      if (m.labels[i] == 0 || out[i] >= 0) continue;
      const std::uint8_t c = m.labels[i];
      out[i] = next;
      queue.push_back({u, v});
      while (!queue.empty()) {
        const auto [x, y] = queue.front();
        queue.pop_front();
        const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
        for (const auto& n : nb) {
          if (n[0] < 0 || n[1] < 0 || n[0] >= m.width || n[1] >= m.height) continue;
          const std::size_t j = static_cast<std::size_t>(n[1]) * m.width + n[0];
          if (m.labels[j] == c && out[j] < 0) {
            out[j] = next;
            queue.push_back({n[0], n[1]});
          }
        }
      }
      ++next;
    }
  }
  return out;
}

// Per-pixel blob index from the components' runs; -1 for uncovered.
inline std::vector<int> labels_from_blobs(const floorloc::SegMask& m,
                                          const std::vector<floorloc::Blob>& blobs) {
  std::vector<int> out(m.labels.size(), -1);
  for (std::size_t b = 0; b < blobs.size(); ++b) {
    for (const floorloc::Run& r : blobs[b].runs) {
      for (int u = r.u0; u <= r.u1; ++u) {
        int& slot = out[static_cast<std::size_t>(r.v) * m.width + u];
        if (slot >= 0) return {};  // overlapping runs: not a partition
        slot = static_cast<int>(b);
      }
    }
  }
  return out;
}

// True when the two labelings induce the same partition (ids may differ).
inline bool same_partition(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return false;
  std::vector<int> ab, ba;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((a[i] < 0) != (b[i] < 0)) return false;
    if (a[i] < 0) continue;
    if (static_cast<std::size_t>(a[i]) >= ab.size()) ab.resize(a[i] + 1, -1);
    if (static_cast<std::size_t>(b[i]) >= ba.size()) ba.resize(b[i] + 1, -1);
    if (ab[a[i]] < 0) ab[a[i]] = b[i];
    if (ba[b[i]] < 0) ba[b[i]] = a[i];
    if (ab[a[i]] != b[i] || ba[b[i]] != a[i]) return false;
  }
  return true;
}

}  // namespace testing
