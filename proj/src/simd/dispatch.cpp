#include <cstdlib>
#include <stdexcept>
#include <string>

#include "floorloc/simd/kernels.hpp"

namespace floorloc::simd {

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
  }
  return "unknown";
}

bool available(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(FLOORLOC_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

const Kernels& kernels(Backend b) {
  if (!available(b)) {
    throw std::runtime_error("simd backend not available: " +
                             std::string(backend_name(b)));
  }
#if defined(FLOORLOC_BUILD_AVX2)
  if (b == Backend::avx2) return detail::avx2_kernels();
#endif
  return detail::scalar_kernels();
}

Backend active_backend() {
  static const Backend chosen = [] {
    if (const char* env = std::getenv("FLOORLOC_SIMD")) {
      const std::string_view v(env);
      if (v == "scalar") return Backend::scalar;
      if (v == "avx2" && available(Backend::avx2)) return Backend::avx2;
    }
    return available(Backend::avx2) ? Backend::avx2 : Backend::scalar;
  }();
  return chosen;
}

const Kernels& active() { return kernels(active_backend()); }

void seed_noise_lanes(std::uint64_t seed, std::uint32_t* state) {
  // splitmix64 expansion; xorshift32 needs nonzero states.
  std::uint64_t x = seed;
  for (std::size_t lane = 0; lane < kNoiseLanes; ++lane) {
    x += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    z ^= z >> 31;
    const auto s = static_cast<std::uint32_t>(z ^ (z >> 32));
    state[lane] = s == 0 ? 0x6D2B79F5u : s;
  }
}

}  // namespace floorloc::simd
