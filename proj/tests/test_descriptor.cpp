#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "floorloc/descriptor.hpp"
#include "floorloc/floorsim.hpp"
#include "support.hpp"

using namespace floorloc;

namespace {

constexpr double kPi = std::numbers::pi;

double norm_of(const Descriptor& d) {
  double s = 0;
  for (float x : d) s += double(x) * x;
  return std::sqrt(s);
}

FloorTruth single_blob_floor(double major_mm, double minor_mm, double orientation,
                             ColorClass color = ColorClass::red) {
  FloorSpec spec;
  spec.width = 0.2;
  spec.height = 0.2;
  FloorBlob b;
  b.center = {0.1, 0.1};
  b.semi_major_mm = major_mm;
  b.semi_minor_mm = minor_mm;
  b.orientation = orientation;
  b.color = color;
  return FloorTruth(spec, {b});
}

SegMask truth_mask(const FloorTruth& f, const CameraModel& cam, const Pose2D& p) {
  SegMask m(cam.image_width, cam.image_height);
  m.labels = render_class_labels(f, cam, p);
  return m;
}

// The component covering the pixel nearest to a world point, if any.
const Blob* blob_at_world(const std::vector<Blob>& blobs, const CameraModel& cam,
                          const Pose2D& pose, Vec2 world) {
  const Vec2 px = cam.world_to_pixel(pose, world);
  const int u = static_cast<int>(std::lround(px.x));
  const int v = static_cast<int>(std::lround(px.y));
  for (const Blob& b : blobs) {
    for (const Run& r : b.runs) {
      if (r.v == v && r.u0 <= u && u <= r.u1) return &b;
    }
  }
  return nullptr;
}

Keypoint keypoint_of(const Blob& b) { return {b.cu, b.cv, b.id, b.color}; }

}  // namespace

TEST_SUITE("descriptor") {

TEST_CASE("ellipse orientation of bars") {
  const CameraModel cam;
  SegMask h(40, 40);
  for (int v = 19; v < 22; ++v) {
    for (int u = 14; u < 25; ++u) h.set(u, v, ColorClass::red);
  }
  const auto hb = connected_components(h);
  REQUIRE(hb.size() == 1);
  CHECK(fit_ellipse(hb[0], cam).angle == doctest::Approx(0.0));
  CHECK_FALSE(fit_ellipse(hb[0], cam).degenerate);

  SegMask v(40, 40);
  for (int y = 14; y < 25; ++y) {
    for (int u = 19; u < 22; ++u) v.set(u, y, ColorClass::red);
  }
  const auto vb = connected_components(v);
  REQUIRE(vb.size() == 1);
  CHECK(fit_ellipse(vb[0], cam).angle == doctest::Approx(kPi / 2));

  SegMask dot(10, 10);
  dot.set(5, 5, ColorClass::red);
  CHECK(fit_ellipse(connected_components(dot)[0], cam).degenerate);
}

TEST_CASE("ellipse orientation of a rendered blob") {
  const CameraModel cam;
  for (double a : {kPi / 6, -kPi / 4, 1.2}) {
    const FloorTruth f = single_blob_floor(2.5, 1.2, a);
    for (double heading : {0.0, 0.5}) {
      const Pose2D pose{0.1, 0.1, heading};
      const SegMask m = truth_mask(f, cam, pose);
      const auto blobs = connected_components(m);
      REQUIRE(blobs.size() == 1);
      const EllipseFit fit = fit_ellipse(blobs[0], cam);
      // Axis angle, so compare modulo pi.
      const double d = wrap_angle(2.0 * (fit.angle - (a - heading))) / 2.0;
      CHECK(std::abs(d) < 0.05);
      CHECK(fit.eccentricity == doctest::Approx(std::sqrt(1 - 1.2 * 1.2 / 6.25)).epsilon(0.05));
    }
  }
}

TEST_CASE("patch disc") {
  CHECK(in_patch_disc(kPatchRadius, kPatchRadius));
  CHECK(in_patch_disc(0, kPatchRadius));
  CHECK_FALSE(in_patch_disc(0, 0));
  CHECK_FALSE(in_patch_disc(-1, 5));
  std::size_t n = 0;
  for (int r = 0; r < kPatchSide; ++r) {
    for (int c = 0; c < kPatchSide; ++c) n += in_patch_disc(c, r);
  }
  CHECK(n == patch_disc_cells());
}

TEST_CASE("angle 0 samples without rotation") {
  const CameraModel cam;
  const SegMask m = testing::random_mask(11);
  const Keypoint kp{300.0, 200.0, 0, ColorClass::red};
  const Patch p = normalize_patch(m, kp, 0.0, cam);
  const double ku = std::min(cam.scale_x(), cam.scale_y()) / cam.scale_x();
  const double kv = std::min(cam.scale_x(), cam.scale_y()) / cam.scale_y();
  for (int row = 0; row < kPatchSide; ++row) {
    for (int col = 0; col < kPatchSide; ++col) {
      if (!in_patch_disc(col, row)) {
        CHECK(p.at(col, row) == 0);
        continue;
      }
      int c = col, r = row;
      if (p.flip_resolved) {  // rotated by pi
        c = kPatchSide - 1 - col;
        r = kPatchSide - 1 - row;
      }
      const int u = static_cast<int>(std::floor(300.0 + (c - kPatchRadius) * ku + 0.5));
      const int v = static_cast<int>(std::floor(200.0 - (kPatchRadius - r) * kv + 0.5));
      CHECK(p.at(col, row) == m.at(u, v));
    }
  }
}

TEST_CASE("flip rule") {
  const CameraModel cam;
  SegMask m(632, 480);
  for (int v = 260; v < 280; ++v) {
    for (int u = 300; u < 330; ++u) m.set(u, v, ColorClass::blue);  // below the center
  }
  const Keypoint kp{316.0, 240.0, 0, ColorClass::blue};
  const Patch p = normalize_patch(m, kp, 0.0, cam);
  CHECK(p.flip_resolved);
  CHECK(p.angle == doctest::Approx(kPi));
  std::size_t upper = 0, lower = 0;
  for (int row = 0; row < kPatchSide; ++row) {
    for (int col = 0; col < kPatchSide; ++col) {
      if (p.at(col, row) == 0) continue;
      (row < kPatchRadius ? upper : lower)++;
    }
  }
  CHECK(upper > 0);
  CHECK(lower == 0);

  // Balanced halves: no flip.
  SegMask s(632, 480);
  for (int v = 230; v <= 250; ++v) {
    for (int u = 306; u <= 326; ++u) s.set(u, v, ColorClass::blue);
  }
  CHECK_FALSE(normalize_patch(s, kp, 0.0, cam).flip_resolved);
}

TEST_CASE("quarter-turned source gives the same normalized patch") {
  const CameraModel cam;
  FloorSpec spec;
  spec.width = 0.3;
  spec.height = 0.3;
  const FloorTruth f = generate_floor(spec);
  int compared = 0;
  for (const FloorBlob& blob : f.blobs()) {
    if (compared >= 20) break;
    if (blob.center.x < 0.05 || blob.center.x > 0.25 || blob.center.y < 0.05 ||
        blob.center.y > 0.25 || blob.semi_minor_mm / blob.semi_major_mm > 0.8) {
      continue;
    }
    const Pose2D a{blob.center.x + 0.002, blob.center.y - 0.001, 0.3};
    const Pose2D b{blob.center.x + 0.002, blob.center.y - 0.001, 0.3 + kPi / 2};
    const SegMask ma = truth_mask(f, cam, a), mb = truth_mask(f, cam, b);
    const auto ba = connected_components(ma), bb = connected_components(mb);
    const Blob* xa = blob_at_world(ba, cam, a, blob.center);
    const Blob* xb = blob_at_world(bb, cam, b, blob.center);
    if (!xa || !xb || xa->pixel_count < 150) continue;
    const Patch pa = make_patch(ma, keypoint_of(*xa), *xa, cam);
    const Patch pb = make_patch(mb, keypoint_of(*xb), *xb, cam);
    std::size_t agree = 0;
    for (std::size_t i = 0; i < pa.labels.size(); ++i) agree += pa.labels[i] == pb.labels[i];
    // Cells outside the disc agree trivially; count only disc cells.
    const std::size_t outside = pa.labels.size() - patch_disc_cells();
    CHECK(static_cast<double>(agree - outside) / patch_disc_cells() >= 0.9);
    ++compared;
  }
  CHECK(compared >= 10);
}

TEST_CASE("centered disc descriptor") {
  const CameraModel cam;
  const FloorTruth f = single_blob_floor(2.0, 2.0, 0.0, ColorClass::red);
  const Pose2D pose{0.1, 0.1, 0.0};
  const SegMask m = truth_mask(f, cam, pose);
  const auto blobs = connected_components(m);
  REQUIRE(blobs.size() == 1);
  const Patch p = make_patch(m, keypoint_of(blobs[0]), blobs[0], cam);
  const Descriptor d = describe(p);
  CHECK(norm_of(d) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(d[0] > 0.0f);
  CHECK(d[1] == 0.0f);
  CHECK(d[2] == 0.0f);
  CHECK(d[3] == 0.0f);
  CHECK(p.eccentricity < 0.2);
  // Red sector masses, dims 6..11.
  for (int s = 1; s < kSectors; ++s) CHECK(d[6 + s] == doctest::Approx(d[6]).epsilon(0.05));
  for (std::size_t i = 12; i < kDescriptorDim; ++i) CHECK(d[i] == 0.0f);
}

TEST_CASE("descriptors are unit length") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<int> label(0, 4), color(1, 4);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    Patch p;
    p.labels.assign(static_cast<std::size_t>(kPatchSide) * kPatchSide, 0);
    const double density = u01(rng);
    for (int r = 0; r < kPatchSide; ++r) {
      for (int c = 0; c < kPatchSide; ++c) {
        if (in_patch_disc(c, r) && u01(rng) < density) {
          p.labels[static_cast<std::size_t>(r) * kPatchSide + c] =
              static_cast<std::uint8_t>(label(rng));
        }
      }
    }
    p.labels[static_cast<std::size_t>(kPatchRadius) * kPatchSide + kPatchRadius] = 1;
    p.center_color = static_cast<ColorClass>(color(rng));
    p.blob_pixels = static_cast<std::uint64_t>(u01(rng) * 2000);
    p.eccentricity = u01(rng);
    CHECK(std::abs(norm_of(describe(p)) - 1.0) < 1e-6);
  }
  Patch empty;
  empty.labels.assign(static_cast<std::size_t>(kPatchSide) * kPatchSide, 0);
  CHECK_THROWS_AS(describe(empty), std::domain_error);
}

TEST_CASE("same blob from two frames describes alike") {
  const CameraModel cam;
  FloorSpec spec;
  spec.width = 0.3;
  spec.height = 0.3;
  const FloorTruth f = generate_floor(spec);
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> jitter(-0.004, 0.004), ang(-kPi, kPi);
  int compared = 0;
  for (const FloorBlob& blob : f.blobs()) {
    if (compared >= 40) break;
    if (blob.center.x < 0.05 || blob.center.x > 0.25 || blob.center.y < 0.05 ||
        blob.center.y > 0.25) {
      continue;
    }
    const Pose2D a{blob.center.x + jitter(rng), blob.center.y + jitter(rng), ang(rng)};
    const Pose2D b{blob.center.x + jitter(rng), blob.center.y + jitter(rng), ang(rng)};
    const SegMask ma = PaletteSegmenter().segment(render_view(f, cam, a, 3.0, 1).image);
    const SegMask mb = PaletteSegmenter().segment(render_view(f, cam, b, 3.0, 2).image);
    const auto ba = connected_components(ma), bb = connected_components(mb);
    const auto ka = detect_keypoints(ma, ba, DetectorParams{});
    const auto kb = detect_keypoints(mb, bb, DetectorParams{});
    const Blob* xa = blob_at_world(ba, cam, a, blob.center);
    const Blob* xb = blob_at_world(bb, cam, b, blob.center);
    auto detected = [](const std::vector<Keypoint>& ks, const Blob* x) {
      for (const Keypoint& k : ks) {
        if (x && k.blob_id == x->id) return true;
      }
      return false;
    };
    if (!detected(ka, xa) || !detected(kb, xb)) continue;
    const Descriptor da = describe(make_patch(ma, keypoint_of(*xa), *xa, cam));
    const Descriptor db = describe(make_patch(mb, keypoint_of(*xb), *xb, cam));
    CHECK(cosine_distance(da, db) < 0.1);
    ++compared;
  }
  CHECK(compared >= 20);
}

TEST_CASE("training export") {
  testing::TempDir dir("export");
  Patch p;
  p.labels.assign(static_cast<std::size_t>(kPatchSide) * kPatchSide, 0);
  p.labels[100] = 2;
  std::vector<ClusterPatchSet> sets(3);
  for (std::size_t c = 0; c < 3; ++c) {
    sets[c].cluster_id = c;
    const std::size_t n = c == 1 ? 3 : 4 + c;
    for (std::size_t i = 0; i < n; ++i) {
      sets[c].patches.push_back(&p);
      sets[c].positions.push_back({0.1 * c, 0.01 * i});
    }
  }
  const std::size_t exported = export_training_clusters(sets, 4, 1, dir.path());
  CHECK(exported == 2);
  std::ifstream manifest(dir / "manifest.csv");
  std::string line;
  std::getline(manifest, line);
  CHECK(line == "cluster_id,member_idx,file,world_x,world_y");
  std::size_t rows = 0;
  while (std::getline(manifest, line)) ++rows;
  CHECK(rows == 8);
  CHECK(std::filesystem::exists(dir / "cluster_000000" / "member_000.pgm"));
  CHECK_FALSE(std::filesystem::exists(dir / "cluster_000001"));
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "cluster_000002")) {
    (void)e;
    ++files;
  }
  CHECK(files == 4);
}

}  // TEST_SUITE
