#include <doctest.h>

#include <cstring>
#include <random>
#include <vector>

#include "floorloc/simd/kernels.hpp"

using namespace floorloc::simd;

namespace {

PaletteTable test_palette(std::int32_t max_dist) {
  PaletteTable p{};
  const std::int32_t rgb[5][3] = {
      {10, 10, 10}, {200, 35, 35}, {35, 185, 60}, {35, 70, 210}, {235, 235, 235}};
  for (int c = 0; c < 5; ++c) {
    p.r[c] = rgb[c][0];
    p.g[c] = rgb[c][1];
    p.b[c] = rgb[c][2];
  }
  p.max_dist_sq = max_dist * max_dist;
  return p;
}

std::uint8_t classify_naive(const std::uint8_t* px, const PaletteTable& p) {
  std::int32_t best = -1;
  std::uint8_t label = 0;
  for (int c = 0; c < 5; ++c) {
    const std::int32_t dr = px[0] - p.r[c], dg = px[1] - p.g[c], db = px[2] - p.b[c];
    const std::int32_t d = dr * dr + dg * dg + db * db;
    if (best < 0 || d < best) {
      best = d;
      label = static_cast<std::uint8_t>(c);
    }
  }
  return (label != 0 && best > p.max_dist_sq) ? 0 : label;
}

std::vector<const Kernels*> vector_backends() {
  std::vector<const Kernels*> out;
  if (available(Backend::avx2)) out.push_back(&kernels(Backend::avx2));
  return out;
}

std::vector<std::int32_t> noise_table(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> d(-40, 40);
  std::vector<std::int32_t> t(kNoiseTableSize);
  for (auto& v : t) v = d(rng);
  return t;
}

}  // namespace

TEST_SUITE("simd") {

TEST_CASE("scalar classify_rgb matches a naive nearest-color loop") {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> byte(0, 255);
  const PaletteTable pal = test_palette(90);
  std::vector<std::uint8_t> rgb(3 * 5000), labels(5000);
  for (auto& b : rgb) b = static_cast<std::uint8_t>(byte(rng));
  kernels(Backend::scalar).classify_rgb(rgb.data(), 5000, pal, labels.data());
  for (std::size_t i = 0; i < 5000; ++i) CHECK(labels[i] == classify_naive(&rgb[3 * i], pal));
}

TEST_CASE("scalar dot_rows, find_nonzero and add_noise follow their contracts") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<float> f(-1.0f, 1.0f);
  std::vector<float> q(kRowFloats), rows(kRowFloats * 7), out(7);
  for (auto& v : q) v = f(rng);
  for (auto& v : rows) v = f(rng);
  kernels(Backend::scalar).dot_rows(q.data(), rows.data(), 7, out.data());
  for (std::size_t r = 0; r < 7; ++r) {
    double ref = 0.0;
    for (std::size_t k = 0; k < kRowFloats; ++k) ref += double(q[k]) * rows[r * kRowFloats + k];
    CHECK(out[r] == doctest::Approx(ref).epsilon(1e-5));
  }

  std::vector<std::uint8_t> z(1000, 0);
  CHECK(kernels(Backend::scalar).find_nonzero(z.data(), z.size()) == 1000);
  z[777] = 3;
  CHECK(kernels(Backend::scalar).find_nonzero(z.data(), z.size()) == 777);
  CHECK(kernels(Backend::scalar).find_nonzero(z.data(), 0) == 0);

  const auto table = noise_table(1);
  std::vector<std::uint8_t> data(100, 250);
  std::uint32_t state[kNoiseLanes];
  seed_noise_lanes(3, state);
  kernels(Backend::scalar).add_noise(data.data(), data.size(), table.data(), state);
  for (auto v : data) CHECK(v >= 210);
  for (std::uint32_t s : state) CHECK(s != 0);
}

TEST_CASE("vector backends are bit-identical to scalar") {
  const auto backends = vector_backends();
  if (backends.empty()) {
    MESSAGE("no vector backend on this machine");
    return;
  }
  const Kernels& ref = kernels(Backend::scalar);
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> byte(0, 255);
  std::uniform_real_distribution<float> f(-1.0f, 1.0f);
  const std::size_t sizes[] = {0, 1, 7, 15, 16, 17, 31, 32, 33, 100, 1023, 632 * 480};

  for (const Kernels* k : backends) {
    CAPTURE(backend_name(k->backend));
    for (std::size_t n : sizes) {
      CAPTURE(n);
      // classify_rgb, including exact-tie and threshold-edge colors.
      std::vector<std::uint8_t> rgb(3 * n);
      for (auto& b : rgb) b = static_cast<std::uint8_t>(byte(rng));
      for (std::size_t i = 0; i + 2 < rgb.size(); i += 9) {
        rgb[i] = 10 + 90;  // exactly max_distance from background along r
        rgb[i + 1] = 10;
        rgb[i + 2] = 10;
      }
      for (std::int32_t md : {0, 60, 90, 500}) {
        const PaletteTable pal = test_palette(md);
        std::vector<std::uint8_t> a(n, 9), b(n, 9);
        ref.classify_rgb(rgb.data(), n, pal, a.data());
        k->classify_rgb(rgb.data(), n, pal, b.data());
        CHECK(a == b);
      }

      // dot_rows
      const std::size_t rows_n = n % 257;
      std::vector<float> q(kRowFloats), rows(kRowFloats * rows_n);
      for (auto& v : q) v = f(rng);
      for (auto& v : rows) v = f(rng);
      std::vector<float> da(rows_n), db(rows_n);
      ref.dot_rows(q.data(), rows.data(), rows_n, da.data());
      k->dot_rows(q.data(), rows.data(), rows_n, db.data());
      CHECK(std::memcmp(da.data(), db.data(), rows_n * sizeof(float)) == 0);

      // find_nonzero at every interesting position
      std::vector<std::uint8_t> z(n, 0);
      CHECK(ref.find_nonzero(z.data(), n) == k->find_nonzero(z.data(), n));
      for (std::size_t pos : {std::size_t{0}, n / 2, n ? n - 1 : 0}) {
        if (pos >= n) continue;
        std::fill(z.begin(), z.end(), 0);
        z[pos] = 1;
        CHECK(k->find_nonzero(z.data(), n) == pos);
        CHECK(ref.find_nonzero(z.data(), n) == pos);
      }

      // add_noise, including the lane state after the call
      const auto table = noise_table(n);
      std::vector<std::uint8_t> na(n), nb;
      for (auto& v : na) v = static_cast<std::uint8_t>(byte(rng));
      nb = na;
      std::uint32_t sa[kNoiseLanes], sb[kNoiseLanes];
      seed_noise_lanes(n * 31 + 1, sa);
      std::memcpy(sb, sa, sizeof(sa));
      ref.add_noise(na.data(), n, table.data(), sa);
      k->add_noise(nb.data(), n, table.data(), sb);
      CHECK(na == nb);
      CHECK(std::memcmp(sa, sb, sizeof(sa)) == 0);
    }
  }
}

TEST_CASE("dispatch") {
  CHECK(available(Backend::scalar));
  CHECK(kernels(Backend::scalar).backend == Backend::scalar);
  CHECK(available(active_backend()));
  if (!available(Backend::avx2)) CHECK_THROWS(kernels(Backend::avx2));
  std::uint32_t a[kNoiseLanes], b[kNoiseLanes];
  seed_noise_lanes(42, a);
  seed_noise_lanes(42, b);
  CHECK(std::memcmp(a, b, sizeof(a)) == 0);
}

}  // TEST_SUITE
