#include <algorithm>

#include "floorloc/simd/kernels.hpp"
#include "simd/noise_lanes.hpp"

namespace floorloc::simd {
namespace {

void classify_rgb_scalar(const std::uint8_t* rgb, std::size_t n_pixels,
                         const PaletteTable& p, std::uint8_t* labels) {
  for (std::size_t i = 0; i < n_pixels; ++i) {
    const std::int32_t r = rgb[3 * i];
    const std::int32_t g = rgb[3 * i + 1];
    const std::int32_t b = rgb[3 * i + 2];
    std::int32_t best = 0;
    std::int32_t cls = 0;
    for (std::int32_t c = 0; c < 5; ++c) {
      const std::int32_t dr = r - p.r[c];
      const std::int32_t dg = g - p.g[c];
      const std::int32_t db = b - p.b[c];
      const std::int32_t d = dr * dr + dg * dg + db * db;
      if (c == 0 || d < best) {
        best = d;
        cls = c;
      }
    }
    if (best > p.max_dist_sq) cls = 0;
    labels[i] = static_cast<std::uint8_t>(cls);
  }
}

void dot_rows_scalar(const float* q, const float* rows, std::size_t n_rows,
                     float* out) {
  for (std::size_t row = 0; row < n_rows; ++row) {
    const float* r = rows + row * kRowFloats;
    float lane[8];
    for (int l = 0; l < 8; ++l) {
      float a = q[l] * r[l];
      a = a + q[8 + l] * r[8 + l];
      a = a + q[16 + l] * r[16 + l];
      a = a + q[24 + l] * r[24 + l];
      lane[l] = a;
    }
    float s[4];
    for (int l = 0; l < 4; ++l) s[l] = lane[l] + lane[l + 4];
    const float t0 = s[0] + s[2];
    const float t1 = s[1] + s[3];
    out[row] = t0 + t1;
  }
}

std::size_t find_nonzero_scalar(const std::uint8_t* data, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    if (data[i] != 0) return i;
  }
  return n;
}

void add_noise_scalar(std::uint8_t* data, std::size_t n,
                      const std::int32_t* table, std::uint32_t* state) {
  detail::add_noise_blocks(data, n, table, state);
}

}  // namespace

namespace detail {

const Kernels& scalar_kernels() {
  static const Kernels k{Backend::scalar, classify_rgb_scalar, dot_rows_scalar,
                         find_nonzero_scalar, add_noise_scalar};
  return k;
}

}  // namespace detail
}  // namespace floorloc::simd
