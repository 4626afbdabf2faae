#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace floorloc {

/// Segmentation classes; the numeric values are also the on-disk label codes.
enum class ColorClass : std::uint8_t { background = 0, red = 1, green = 2, blue = 3, white = 4 };

inline constexpr int kNumClasses = 5;
inline constexpr int kNumColors = 4;  // classes other than background

inline bool is_colored(std::uint8_t label) { return label != 0; }

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;
  friend bool operator==(Rgb, Rgb) = default;
};

/// 8-bit interleaved RGB, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3) {}

  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  Rgb at(int u, int v) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(v) * width + u);
    return {data[i], data[i + 1], data[i + 2]};
  }
  void set(int u, int v, Rgb c) {
    const std::size_t i = 3 * (static_cast<std::size_t>(v) * width + u);
    data[i] = c.r;
    data[i + 1] = c.g;
    data[i + 2] = c.b;
  }
  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

/// 8-bit single channel, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  GrayImage() = default;
  GrayImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h) {}

  std::uint8_t at(int u, int v) const { return data[static_cast<std::size_t>(v) * width + u]; }
  friend bool operator==(const GrayImage&, const GrayImage&) = default;
};

}  // namespace floorloc
