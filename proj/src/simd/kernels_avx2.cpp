#include <immintrin.h>

#include <array>

#include "floorloc/simd/kernels.hpp"
#include "simd/noise_lanes.hpp"

namespace floorloc::simd {
namespace {

// Shuffle masks that gather channel `ch` of 16 interleaved RGB pixels out of
// three consecutive 16-byte loads.
struct DeinterleaveMasks {
  __m128i m[3][3];  // [channel][source vector]

  DeinterleaveMasks() {
    for (int ch = 0; ch < 3; ++ch) {
      for (int src = 0; src < 3; ++src) {
        alignas(16) std::array<std::int8_t, 16> bytes{};
        for (int i = 0; i < 16; ++i) {
          const int p = 3 * i + ch;
          bytes[i] = (p / 16 == src) ? static_cast<std::int8_t>(p % 16)
                                     : static_cast<std::int8_t>(0x80);
        }
        m[ch][src] = _mm_load_si128(reinterpret_cast<const __m128i*>(bytes.data()));
      }
    }
  }
};

inline __m128i gather_channel(const DeinterleaveMasks& dm, int ch, __m128i a,
                              __m128i b, __m128i c) {
  return _mm_or_si128(
      _mm_or_si128(_mm_shuffle_epi8(a, dm.m[ch][0]), _mm_shuffle_epi8(b, dm.m[ch][1])),
      _mm_shuffle_epi8(c, dm.m[ch][2]));
}

inline __m256i classify8(__m256i r, __m256i g, __m256i b, const PaletteTable& p) {
  __m256i best = _mm256_setzero_si256();
  __m256i cls = _mm256_setzero_si256();
  for (int c = 0; c < 5; ++c) {
    const __m256i dr = _mm256_sub_epi32(r, _mm256_set1_epi32(p.r[c]));
    const __m256i dg = _mm256_sub_epi32(g, _mm256_set1_epi32(p.g[c]));
    const __m256i db = _mm256_sub_epi32(b, _mm256_set1_epi32(p.b[c]));
    const __m256i d = _mm256_add_epi32(
        _mm256_add_epi32(_mm256_mullo_epi32(dr, dr), _mm256_mullo_epi32(dg, dg)),
        _mm256_mullo_epi32(db, db));
    if (c == 0) {
      best = d;
      continue;
    }
    const __m256i closer = _mm256_cmpgt_epi32(best, d);
    best = _mm256_blendv_epi8(best, d, closer);
    cls = _mm256_blendv_epi8(cls, _mm256_set1_epi32(c), closer);
  }
  const __m256i too_far = _mm256_cmpgt_epi32(best, _mm256_set1_epi32(p.max_dist_sq));
  return _mm256_andnot_si256(too_far, cls);
}

void classify_rgb_avx2(const std::uint8_t* rgb, std::size_t n_pixels,
                       const PaletteTable& p, std::uint8_t* labels) {
  static const DeinterleaveMasks dm;
  std::size_t i = 0;
  for (; i + 16 <= n_pixels; i += 16) {
    const std::uint8_t* src = rgb + 3 * i;
    const __m128i a = _mm_loadu_si128(reinterpret_cast<const __m128i*>(src));
    const __m128i b = _mm_loadu_si128(reinterpret_cast<const __m128i*>(src + 16));
    const __m128i c = _mm_loadu_si128(reinterpret_cast<const __m128i*>(src + 32));
    const __m128i rr = gather_channel(dm, 0, a, b, c);
    const __m128i gg = gather_channel(dm, 1, a, b, c);
    const __m128i bb = gather_channel(dm, 2, a, b, c);

    const __m256i lo = classify8(_mm256_cvtepu8_epi32(rr), _mm256_cvtepu8_epi32(gg),
                                 _mm256_cvtepu8_epi32(bb), p);
    const __m256i hi = classify8(_mm256_cvtepu8_epi32(_mm_srli_si128(rr, 8)),
                                 _mm256_cvtepu8_epi32(_mm_srli_si128(gg, 8)),
                                 _mm256_cvtepu8_epi32(_mm_srli_si128(bb, 8)), p);
    // packs interleaves 128-bit halves; the permutes restore pixel order.
    const __m256i w16 = _mm256_permute4x64_epi64(_mm256_packs_epi32(lo, hi), 0xD8);
    const __m256i w8 = _mm256_permute4x64_epi64(_mm256_packus_epi16(w16, w16), 0x08);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(labels + i),
                     _mm256_castsi256_si128(w8));
  }
  if (i < n_pixels) {
    detail::scalar_kernels().classify_rgb(rgb + 3 * i, n_pixels - i, p, labels + i);
  }
}

inline float horizontal_sum(__m256 v) {
  const __m128 s = _mm_add_ps(_mm256_castps256_ps128(v), _mm256_extractf128_ps(v, 1));
  const __m128 t = _mm_add_ps(s, _mm_movehl_ps(s, s));
  return _mm_cvtss_f32(_mm_add_ss(t, _mm_shuffle_ps(t, t, 1)));
}

void dot_rows_avx2(const float* q, const float* rows, std::size_t n_rows,
                   float* out) {
  const __m256 q0 = _mm256_loadu_ps(q);
  const __m256 q1 = _mm256_loadu_ps(q + 8);
  const __m256 q2 = _mm256_loadu_ps(q + 16);
  const __m256 q3 = _mm256_loadu_ps(q + 24);
  for (std::size_t row = 0; row < n_rows; ++row) {
    const float* r = rows + row * kRowFloats;
    __m256 acc = _mm256_mul_ps(q0, _mm256_loadu_ps(r));
    acc = _mm256_add_ps(acc, _mm256_mul_ps(q1, _mm256_loadu_ps(r + 8)));
    acc = _mm256_add_ps(acc, _mm256_mul_ps(q2, _mm256_loadu_ps(r + 16)));
    acc = _mm256_add_ps(acc, _mm256_mul_ps(q3, _mm256_loadu_ps(r + 24)));
    out[row] = horizontal_sum(acc);
  }
}

std::size_t find_nonzero_avx2(const std::uint8_t* data, std::size_t n) {
  std::size_t i = 0;
  const __m256i zero = _mm256_setzero_si256();
  for (; i + 32 <= n; i += 32) {
    const __m256i v = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(data + i));
    const auto is_zero =
        static_cast<std::uint32_t>(_mm256_movemask_epi8(_mm256_cmpeq_epi8(v, zero)));
    if (is_zero != 0xFFFFFFFFu) {
      return i + static_cast<std::size_t>(__builtin_ctz(~is_zero));
    }
  }
  for (; i < n; ++i) {
    if (data[i] != 0) return i;
  }
  return n;
}

void add_noise_avx2(std::uint8_t* data, std::size_t n, const std::int32_t* table,
                    std::uint32_t* state) {
  static_assert(kNoiseLanes == 8);
  __m256i s = _mm256_loadu_si256(reinterpret_cast<const __m256i*>(state));
  const __m256i low16 = _mm256_set1_epi32(0xFFFF);
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    s = _mm256_xor_si256(s, _mm256_slli_epi32(s, 13));
    s = _mm256_xor_si256(s, _mm256_srli_epi32(s, 17));
    s = _mm256_xor_si256(s, _mm256_slli_epi32(s, 5));
    const __m256i n_lo = _mm256_i32gather_epi32(table, _mm256_and_si256(s, low16), 4);
    const __m256i n_hi = _mm256_i32gather_epi32(table, _mm256_srli_epi32(s, 16), 4);
    // int16 pairs in byte order: lane l holds noise for bytes 2l and 2l+1.
    const __m256i noise = _mm256_or_si256(_mm256_and_si256(n_lo, low16),
                                          _mm256_slli_epi32(n_hi, 16));
    const __m256i px = _mm256_cvtepu8_epi16(
        _mm_loadu_si128(reinterpret_cast<const __m128i*>(data + i)));
    const __m256i sum = _mm256_add_epi16(px, noise);
    const __m256i packed =
        _mm256_permute4x64_epi64(_mm256_packus_epi16(sum, sum), 0x08);
    _mm_storeu_si128(reinterpret_cast<__m128i*>(data + i),
                     _mm256_castsi256_si128(packed));
  }
  _mm256_storeu_si256(reinterpret_cast<__m256i*>(state), s);
  if (i < n) detail::add_noise_blocks(data + i, n - i, table, state);
}

}  // namespace

namespace detail {

const Kernels& avx2_kernels() {
  static const Kernels k{Backend::avx2, classify_rgb_avx2, dot_rows_avx2,
                         find_nonzero_avx2, add_noise_avx2};
  return k;
}

}  // namespace detail
}  // namespace floorloc::simd
