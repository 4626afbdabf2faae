#pragma once

// Data-parallel inner loops of the pipeline. Every kernel has a scalar
// reference implementation and optional vector variants; all variants of a
// kernel produce bit-identical output, which the equivalence tests enforce.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace floorloc::simd {

enum class Backend { scalar, avx2 };

std::string_view backend_name(Backend b);

/// Nearest-palette classification table. Class 0 is background.
struct PaletteTable {
  std::int32_t r[5];
  std::int32_t g[5];
  std::int32_t b[5];
  // A non-background winner whose squared distance exceeds this becomes
  // background.
  std::int32_t max_dist_sq;
};

/// Descriptor rows are padded to this many floats.
inline constexpr std::size_t kRowFloats = 32;

/// Noise lookup tables hold this many entries, indexed by 16 random bits.
inline constexpr std::size_t kNoiseTableSize = 65536;

/// Number of interleaved xorshift32 streams used by add_noise.
inline constexpr std::size_t kNoiseLanes = 8;

struct Kernels {
  Backend backend;

  /// Labels `n_pixels` interleaved RGB pixels with the nearest palette class
  /// (strict-less tie break in class order 0..4).
  void (*classify_rgb)(const std::uint8_t* rgb, std::size_t n_pixels,
                       const PaletteTable& palette, std::uint8_t* labels);

  /// out[i] = dot(query, rows + i * kRowFloats) over kRowFloats floats, with a
  /// fixed 8-lane summation order.
  void (*dot_rows)(const float* query, const float* rows, std::size_t n_rows,
                   float* out);

  /// Index of the first nonzero byte in [data, data + n), or n.
  std::size_t (*find_nonzero)(const std::uint8_t* data, std::size_t n);

  /// Adds table noise to each byte with saturation to [0, 255]. `state` holds
  /// kNoiseLanes nonzero xorshift32 states and is advanced in place. Byte
  /// 16*k + 2*lane (+1) uses the low (high) 16 bits of lane's k-th draw.
  void (*add_noise)(std::uint8_t* data, std::size_t n, const std::int32_t* table,
                    std::uint32_t* state);
};

bool available(Backend b);

/// Kernel table for a specific backend; throws if unavailable.
const Kernels& kernels(Backend b);

/// Best available backend, unless FLOORLOC_SIMD=scalar|avx2 overrides it.
Backend active_backend();

const Kernels& active();

/// Seeds the noise lane states deterministically from a 64-bit seed.
void seed_noise_lanes(std::uint64_t seed, std::uint32_t* state);

namespace detail {
const Kernels& scalar_kernels();
#if defined(FLOORLOC_BUILD_AVX2)
const Kernels& avx2_kernels();
#endif
}  // namespace detail

}  // namespace floorloc::simd
