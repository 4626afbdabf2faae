#pragma once

#include <cstddef>
#include <cstdint>

#include "floorloc/simd/kernels.hpp"

namespace floorloc::simd::detail {

inline std::uint32_t xorshift32(std::uint32_t x) {
  x ^= x << 13;
  x ^= x >> 17;
  x ^= x << 5;
  return x;
}

inline std::uint8_t saturate_add(std::uint8_t v, std::int32_t noise) {
  const std::int32_t s = static_cast<std::int32_t>(v) + noise;
  return static_cast<std::uint8_t>(s < 0 ? 0 : (s > 255 ? 255 : s));
}

// Reference lane schedule. Vector backends process whole 16-byte blocks and
// hand any remainder to this function, which keeps the streams aligned.
inline void add_noise_blocks(std::uint8_t* data, std::size_t n,
                             const std::int32_t* table, std::uint32_t* state) {
  std::size_t i = 0;
  while (i < n) {
    for (std::size_t lane = 0; lane < kNoiseLanes && i < n; ++lane) {
      state[lane] = xorshift32(state[lane]);
      const std::uint32_t r = state[lane];
      data[i] = saturate_add(data[i], table[r & 0xFFFFu]);
      ++i;
      if (i < n) {
        data[i] = saturate_add(data[i], table[r >> 16]);
        ++i;
      }
    }
  }
}

}  // namespace floorloc::simd::detail
