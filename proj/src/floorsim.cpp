#include "floorloc/floorsim.hpp"

#include <algorithm>
#include <bit>
#include <cinttypes>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>

#include "floorloc/errors.hpp"
#include "floorloc/image_io.hpp"
#include "floorloc/simd/kernels.hpp"

namespace floorloc {

void FloorSpec::validate() const {
  if (!(width > 0.0) || !(height > 0.0)) {
    throw std::invalid_argument("floor: width and height must be positive");
  }
  if (!(blob_density > 0.0)) throw std::invalid_argument("floor: density must be positive");
  if (!(radius_min_mm > 0.0) || radius_max_mm < radius_min_mm) {
    throw std::invalid_argument("floor: radius range must be positive and ordered");
  }
  if (!(aspect_min > 0.0) || aspect_max < aspect_min || aspect_max > 1.0) {
    throw std::invalid_argument("floor: aspect range must lie in (0, 1]");
  }
  double sum = 0.0;
  for (double w : color_weights) {
    if (w < 0.0) throw std::invalid_argument("floor: negative color weight");
    sum += w;
  }
  if (!(sum > 0.0)) throw std::invalid_argument("floor: color weights sum to zero");
}

bool FloorBlob::contains(Vec2 world) const {
  const Vec2 d = world - center;
  const double c = std::cos(orientation);
  const double s = std::sin(orientation);
  const double lx = (c * d.x + s * d.y) / (semi_major_mm * 1e-3);
  const double ly = (-s * d.x + c * d.y) / (semi_minor_mm * 1e-3);
  return lx * lx + ly * ly <= 1.0;
}

Rgb nominal_color(ColorClass c) {
  switch (c) {
    case ColorClass::red:
      return {200, 35, 35};
    case ColorClass::green:
      return {35, 185, 60};
    case ColorClass::blue:
      return {35, 70, 210};
    case ColorClass::white:
      return {235, 235, 235};
    case ColorClass::background:
      break;
  }
  return kBackgroundColor;
}

FloorTruth::FloorTruth(FloorSpec spec, std::vector<FloorBlob> blobs)
    : spec_(spec), blobs_(std::move(blobs)) {
  cols_ = std::max(1, static_cast<int>(std::ceil(spec_.width / cell_)));
  rows_ = std::max(1, static_cast<int>(std::ceil(spec_.height / cell_)));
  const std::size_t n_cells = static_cast<std::size_t>(cols_) * rows_;

  auto cell_range = [&](const FloorBlob& b, int& c0, int& c1, int& r0, int& r1) {
    const double rad = b.bounding_radius();
    c0 = std::clamp(static_cast<int>(std::floor((b.center.x - rad) / cell_)), 0, cols_ - 1);
    c1 = std::clamp(static_cast<int>(std::floor((b.center.x + rad) / cell_)), 0, cols_ - 1);
    r0 = std::clamp(static_cast<int>(std::floor((b.center.y - rad) / cell_)), 0, rows_ - 1);
    r1 = std::clamp(static_cast<int>(std::floor((b.center.y + rad) / cell_)), 0, rows_ - 1);
  };

  std::vector<std::uint32_t> counts(n_cells + 1, 0);
  for (const FloorBlob& b : blobs_) {
    int c0, c1, r0, r1;
    cell_range(b, c0, c1, r0, r1);
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) ++counts[static_cast<std::size_t>(r) * cols_ + c + 1];
  }
  for (std::size_t i = 1; i <= n_cells; ++i) counts[i] += counts[i - 1];
  cell_start_ = counts;
  cell_items_.resize(counts[n_cells]);
  std::vector<std::uint32_t> fill(counts.begin(), counts.end() - 1);
  for (std::uint32_t i = 0; i < blobs_.size(); ++i) {
    int c0, c1, r0, r1;
    cell_range(blobs_[i], c0, c1, r0, r1);
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) cell_items_[fill[static_cast<std::size_t>(r) * cols_ + c]++] = i;
  }
}

void FloorTruth::blobs_near(Vec2 lo, Vec2 hi, std::vector<std::uint32_t>& out) const {
  out.clear();
  if (hi.x < 0.0 || hi.y < 0.0 || lo.x > spec_.width || lo.y > spec_.height) return;
  const int c0 = std::clamp(static_cast<int>(std::floor(lo.x / cell_)), 0, cols_ - 1);
  const int c1 = std::clamp(static_cast<int>(std::floor(hi.x / cell_)), 0, cols_ - 1);
  const int r0 = std::clamp(static_cast<int>(std::floor(lo.y / cell_)), 0, rows_ - 1);
  const int r1 = std::clamp(static_cast<int>(std::floor(hi.y / cell_)), 0, rows_ - 1);
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      const std::size_t cell = static_cast<std::size_t>(r) * cols_ + c;
      out.insert(out.end(), cell_items_.begin() + cell_start_[cell],
                 cell_items_.begin() + cell_start_[cell + 1]);
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
}

std::optional<std::uint64_t> FloorTruth::blob_at(Vec2 world) const {
  std::vector<std::uint32_t> near;
  blobs_near(world, world, near);
  std::optional<std::uint64_t> top;
  for (std::uint32_t i : near) {
    if (blobs_[i].contains(world)) top = blobs_[i].id;
  }
  return top;
}

FloorTruth generate_floor(const FloorSpec& spec) {
  spec.validate();
  const double area_cm2 = spec.width * spec.height * 1e4;
  const auto count = static_cast<std::size_t>(std::llround(spec.blob_density * area_cm2));

  std::mt19937_64 rng(spec.rng_seed);
  std::uniform_real_distribution<double> ux(0.0, spec.width);
  std::uniform_real_distribution<double> uy(0.0, spec.height);
  std::uniform_real_distribution<double> ur(spec.radius_min_mm, spec.radius_max_mm);
  std::uniform_real_distribution<double> uq(spec.aspect_min, spec.aspect_max);
  std::uniform_real_distribution<double> uphi(0.0, std::numbers::pi);
  std::discrete_distribution<int> ucolor(spec.color_weights.begin(), spec.color_weights.end());

  std::vector<FloorBlob> blobs(count);
  for (std::size_t i = 0; i < count; ++i) {
    FloorBlob& b = blobs[i];
    b.id = i;
    b.center = {ux(rng), uy(rng)};
    const double r = ur(rng);
    const double q = uq(rng);
    b.semi_major_mm = r / std::sqrt(q);
    b.semi_minor_mm = r * std::sqrt(q);
    b.orientation = uphi(rng);
    b.color = static_cast<ColorClass>(1 + ucolor(rng));
  }
  return FloorTruth(spec, std::move(blobs));
}

namespace {

constexpr char kFloorMagic[4] = {'K', 'F', 'L', 'T'};
constexpr std::uint32_t kFloorVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "binary formats are written in native little-endian order");

template <typename T>
void put(std::string& buf, T v) {
  const auto* p = reinterpret_cast<const char*>(&v);
  buf.append(p, sizeof(T));
}

template <typename T>
T take(const std::string& buf, std::size_t& pos, const std::filesystem::path& path) {
  if (buf.size() - pos < sizeof(T)) {
    throw FormatError(FormatError::Kind::truncated, "truncated floor file: " + path.string());
  }
  T v;
  std::memcpy(&v, buf.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void save_floor(const FloorTruth& floor, const std::filesystem::path& path) {
  std::string buf(kFloorMagic, 4);
  put(buf, kFloorVersion);
  put(buf, floor.spec().width);
  put(buf, floor.spec().height);
  put(buf, static_cast<std::uint64_t>(floor.blobs().size()));
  for (const FloorBlob& b : floor.blobs()) {
    put(buf, b.id);
    put(buf, b.center.x);
    put(buf, b.center.y);
    put(buf, b.semi_major_mm);
    put(buf, b.semi_minor_mm);
    put(buf, b.orientation);
    put(buf, static_cast<std::uint8_t>(b.color));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError(path, "write failed");
}

FloorTruth load_floor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string buf = ss.str();

  if (buf.size() < 4 || std::memcmp(buf.data(), kFloorMagic, 4) != 0) {
    throw FormatError(FormatError::Kind::bad_magic, "not a floor file: " + path.string());
  }
  std::size_t pos = 4;
  const auto version = take<std::uint32_t>(buf, pos, path);
  if (version != kFloorVersion) {
    throw FormatError(FormatError::Kind::unsupported_version,
                      "unsupported floor file version " + std::to_string(version));
  }
  FloorSpec spec;
  spec.width = take<double>(buf, pos, path);
  spec.height = take<double>(buf, pos, path);
  const auto count = take<std::uint64_t>(buf, pos, path);
  constexpr std::size_t kRecord = 8 + 5 * 8 + 1;
  if ((buf.size() - pos) / kRecord < count) {
    throw FormatError(FormatError::Kind::truncated, "truncated floor file: " + path.string());
  }
  std::vector<FloorBlob> blobs(count);
  for (FloorBlob& b : blobs) {
    b.id = take<std::uint64_t>(buf, pos, path);
    b.center.x = take<double>(buf, pos, path);
    b.center.y = take<double>(buf, pos, path);
    b.semi_major_mm = take<double>(buf, pos, path);
    b.semi_minor_mm = take<double>(buf, pos, path);
    b.orientation = take<double>(buf, pos, path);
    const auto color = take<std::uint8_t>(buf, pos, path);
    if (color < 1 || color > 4) {
      throw FormatError(FormatError::Kind::malformed, "bad blob color in " + path.string());
    }
    b.color = static_cast<ColorClass>(color);
  }
  if (pos != buf.size()) {
    throw FormatError(FormatError::Kind::malformed, "trailing bytes in " + path.string());
  }
  const double area_cm2 = spec.width * spec.height * 1e4;
  if (area_cm2 > 0.0 && count > 0) spec.blob_density = static_cast<double>(count) / area_cm2;
  return FloorTruth(spec, std::move(blobs));
}

Vec2 CameraModel::pixel_to_world(const Pose2D& pose, double u, double v) const {
  return RigidTransform2D::from_pose(pose).apply(pixel_to_camera(u, v));
}

Vec2 CameraModel::world_to_pixel(const Pose2D& pose, Vec2 world) const {
  return camera_to_pixel(RigidTransform2D::from_pose(pose).inverse().apply(world));
}

namespace {

// Calls paint(pixel_index, blob_index) for every pixel inside every visible
// blob, in ascending blob order so later blobs cover earlier ones.
template <typename Paint>
void rasterize(const FloorTruth& floor, const CameraModel& cam, const Pose2D& pose,
               Paint&& paint) {
  const double sx = cam.scale_x();
  const double sy = cam.scale_y();
  const double reach = cam.half_diagonal() + floor.spec().radius_max_mm * 2e-3;
  std::vector<std::uint32_t> near;
  floor.blobs_near({pose.x - reach, pose.y - reach}, {pose.x + reach, pose.y + reach}, near);

  const RigidTransform2D world_to_cam = RigidTransform2D::from_pose(pose).inverse();
  const int w = cam.image_width;
  const int h = cam.image_height;
  for (std::uint32_t bi : near) {
    const FloorBlob& blob = floor.blobs()[bi];
    const Vec2 c = world_to_cam.apply(blob.center);
    const double phi = blob.orientation - pose.theta;
    const double cp = std::cos(phi);
    const double sp = std::sin(phi);
    const double a = blob.semi_major_mm * 1e-3;
    const double b = blob.semi_minor_mm * 1e-3;
    const double hx = std::sqrt(a * a * cp * cp + b * b * sp * sp);
    const double hy = std::sqrt(a * a * sp * sp + b * b * cp * cp);

    const int u0 = std::max(0, static_cast<int>(std::floor((c.x - hx) / sx + cam.cx())));
    const int u1 = std::min(w - 1, static_cast<int>(std::ceil((c.x + hx) / sx + cam.cx())));
    const int v0 = std::max(0, static_cast<int>(std::floor(cam.cy() - (c.y + hy) / sy)));
    const int v1 = std::min(h - 1, static_cast<int>(std::ceil(cam.cy() - (c.y - hy) / sy)));
    if (u0 > u1 || v0 > v1) continue;

    const double inv_a = 1.0 / a;
    const double inv_b = 1.0 / b;
    for (int v = v0; v <= v1; ++v) {
      const double dy = -(v - cam.cy()) * sy - c.y;
      for (int u = u0; u <= u1; ++u) {
        const double dx = (u - cam.cx()) * sx - c.x;
        const double lx = (cp * dx + sp * dy) * inv_a;
        const double ly = (-sp * dx + cp * dy) * inv_b;
        if (lx * lx + ly * ly <= 1.0) paint(static_cast<std::size_t>(v) * w + u, bi);
      }
    }
  }
}

struct NoiseTable {
  std::vector<std::int32_t> values;
};

double normal_quantile(double p) {
  double lo = -12.0;
  double hi = 12.0;
  for (int i = 0; i < 80; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double cdf = 0.5 * std::erfc(-mid / std::numbers::sqrt2);
    (cdf < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Inverse-CDF table of N(0, sigma^2) rounded to whole counts; indexing it with
// uniform 16-bit values yields discretized Gaussian noise.
std::shared_ptr<const NoiseTable> noise_table(double sigma) {
  static std::mutex mu;
  static std::map<double, std::shared_ptr<const NoiseTable>> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(sigma);
  if (it != cache.end()) return it->second;

  auto table = std::make_shared<NoiseTable>();
  table->values.resize(simd::kNoiseTableSize);
  const std::size_t half = simd::kNoiseTableSize / 2;
  for (std::size_t i = 0; i < half; ++i) {
    const double p = (static_cast<double>(i) + 0.5) / simd::kNoiseTableSize;
    const double z = normal_quantile(p);
    const auto n = static_cast<std::int32_t>(std::clamp(std::lround(sigma * z), -255L, 255L));
    table->values[i] = n;
    table->values[simd::kNoiseTableSize - 1 - i] = -n;
  }
  cache.emplace(sigma, table);
  return table;
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t frame_noise_seed(std::uint64_t run_seed, std::uint64_t frame_id) {
  return mix64(run_seed ^ mix64(frame_id + 0x9E3779B97F4A7C15ull));
}

void add_pixel_noise(RgbImage& image, double sigma, std::uint64_t seed) {
  if (!(sigma > 0.0)) return;
  const auto table = noise_table(sigma);
  std::uint32_t state[simd::kNoiseLanes];
  simd::seed_noise_lanes(seed, state);
  simd::active().add_noise(image.data.data(), image.data.size(), table->values.data(), state);
}

Frame render_view(const FloorTruth& floor, const CameraModel& cam, const Pose2D& pose,
                  double noise_sigma, std::uint64_t noise_seed, std::uint64_t frame_id) {
  Frame frame;
  frame.truth_pose = pose;
  frame.frame_id = frame_id;
  frame.image = RgbImage(cam.image_width, cam.image_height);
  static_assert(kBackgroundColor.r == kBackgroundColor.g && kBackgroundColor.g == kBackgroundColor.b);
  std::fill(frame.image.data.begin(), frame.image.data.end(), kBackgroundColor.r);

  std::uint8_t* px = frame.image.data.data();
  std::array<Rgb, kNumClasses> colors;
  for (int c = 0; c < kNumClasses; ++c) colors[c] = nominal_color(static_cast<ColorClass>(c));
  rasterize(floor, cam, pose, [&](std::size_t i, std::uint32_t bi) {
    const Rgb c = colors[static_cast<std::size_t>(floor.blobs()[bi].color)];
    px[3 * i] = c.r;
    px[3 * i + 1] = c.g;
    px[3 * i + 2] = c.b;
  });
  add_pixel_noise(frame.image, noise_sigma, noise_seed);
  return frame;
}

std::vector<std::int64_t> render_blob_ids(const FloorTruth& floor, const CameraModel& cam,
                                          const Pose2D& pose) {
  std::vector<std::int64_t> ids(static_cast<std::size_t>(cam.image_width) * cam.image_height, -1);
  rasterize(floor, cam, pose, [&](std::size_t i, std::uint32_t bi) {
    ids[i] = static_cast<std::int64_t>(floor.blobs()[bi].id);
  });
  return ids;
}

std::vector<std::uint8_t> render_class_labels(const FloorTruth& floor, const CameraModel& cam,
                                              const Pose2D& pose) {
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(cam.image_width) * cam.image_height,
                                   0);
  rasterize(floor, cam, pose, [&](std::size_t i, std::uint32_t bi) {
    labels[i] = static_cast<std::uint8_t>(floor.blobs()[bi].color);
  });
  return labels;
}

void PoseLog::validate() const {
  if (!(capture_rate > 0.0)) throw std::invalid_argument("pose log: rate must be positive");
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].t > samples[i - 1].t)) {
      throw std::invalid_argument("pose log: timestamps must be strictly increasing");
    }
  }
}

std::size_t mapping_lane_count(double tile, double spacing) {
  return static_cast<std::size_t>(std::floor(tile / spacing + 1e-9)) + 1;
}

PoseLog generate_mapping_run(const CameraModel& cam, const MappingRunParams& p) {
  const double short_side = std::min(cam.footprint_width, cam.footprint_height);
  if (!(p.lane_spacing > 0.0) || p.lane_spacing >= short_side) {
    throw std::invalid_argument("mapping run: lane spacing must be positive and below the "
                                "footprint short side, or lanes leave coverage gaps");
  }
  if (!(p.tile > 0.0) || !(p.speed > 0.0) || !(p.rate > 0.0)) {
    throw std::invalid_argument("mapping run: tile, speed and rate must be positive");
  }
  const std::size_t lanes = mapping_lane_count(p.tile, p.lane_spacing);
  const double lane_offset = 0.5 * (p.tile - static_cast<double>(lanes - 1) * p.lane_spacing);
  const double step = p.speed / p.rate;
  const auto steps = static_cast<std::size_t>(std::floor(p.tile / step + 1e-9));
  const auto turn_frames =
      static_cast<std::size_t>(std::ceil(p.lane_spacing / p.speed * p.rate - 1e-9));

  PoseLog log;
  log.capture_rate = p.rate;
  log.samples.reserve(lanes * (steps + 1));
  std::uint64_t id = p.first_frame_id;
  std::size_t tick = 0;
  for (std::size_t lane = 0; lane < lanes; ++lane) {
    const double y = p.origin.y + lane_offset + static_cast<double>(lane) * p.lane_spacing;
    const bool forward = lane % 2 == 0;
    for (std::size_t i = 0; i <= steps; ++i) {
      const double along = static_cast<double>(i) * step;
      const double x = forward ? p.origin.x + along : p.origin.x + p.tile - along;
      log.samples.push_back({id++, static_cast<double>(tick) / p.rate,
                             {x, y, forward ? 0.0 : std::numbers::pi}});
      ++tick;
    }
    tick += turn_frames;
  }
  return log;
}

EvalRun generate_eval_run(const EvalRunParams& p) {
  if (!(p.area.x1 > p.area.x0) || !(p.area.y1 > p.area.y0)) {
    throw std::invalid_argument("eval run: empty area");
  }
  if (!(p.speed > 0.0) || !(p.rate > 0.0)) {
    throw std::invalid_argument("eval run: speed and rate must be positive");
  }
  std::mt19937_64 rng(p.path_seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  const Rect& a = p.area;
  const double dt = 1.0 / p.rate;
  const double step = p.speed * dt;
  const Vec2 mid{0.5 * (a.x0 + a.x1), 0.5 * (a.y0 + a.y1)};
  const double lookahead = std::min({0.15, 0.25 * (a.x1 - a.x0), 0.25 * (a.y1 - a.y0)});
  // Turn rate is an Ornstein-Uhlenbeck process (time constant tau, stationary
  // std omega_sigma) so the path curves smoothly.
  const double tau = 1.0;
  const double omega_sigma = 0.8;
  const double decay = std::exp(-dt / tau);
  const double kick = omega_sigma * std::sqrt(1.0 - decay * decay);

  Vec2 pos{a.x0 + (0.25 + 0.5 * u01(rng)) * (a.x1 - a.x0),
           a.y0 + (0.25 + 0.5 * u01(rng)) * (a.y1 - a.y0)};
  double heading = wrap_angle(2.0 * std::numbers::pi * u01(rng));
  double omega = 0.0;

  EvalRun run;
  run.recorded.capture_rate = p.rate;
  run.recorded.samples.reserve(p.n_frames);
  run.actual.reserve(p.n_frames);
  for (std::size_t i = 0; i < p.n_frames; ++i) {
    const Pose2D actual{pos.x, pos.y, wrap_angle(heading)};
    run.actual.push_back(actual);
    Pose2D recorded = actual;
    if (p.pose_noise_sigma > 0.0) {
      recorded.x += p.pose_noise_sigma * gauss(rng);
      recorded.y += p.pose_noise_sigma * gauss(rng);
    }
    run.recorded.samples.push_back({p.first_frame_id + i, static_cast<double>(i) * dt, recorded});

    omega = decay * omega + kick * gauss(rng);
    const Vec2 ahead = pos + lookahead * Vec2{std::cos(heading), std::sin(heading)};
    if (!a.contains(ahead)) {
      const Vec2 to_mid = mid - pos;
      const double err = wrap_angle(std::atan2(to_mid.y, to_mid.x) - heading);
      omega = std::clamp(4.0 * err, -3.0, 3.0);
    }
    heading = wrap_angle(heading + omega * dt);
    pos = pos + step * Vec2{std::cos(heading), std::sin(heading)};
    pos.x = std::clamp(pos.x, a.x0, a.x1);
    pos.y = std::clamp(pos.y, a.y0, a.y1);
  }
  return run;
}

std::filesystem::path frame_path(const std::filesystem::path& dir, std::uint64_t frame_id) {
  char name[48];
  std::snprintf(name, sizeof(name), "frame_%06" PRIu64 ".ppm", frame_id);
  return dir / "frames" / name;
}

void persist_run(std::span<const Frame> frames, const PoseLog& log,
                 const std::filesystem::path& dir) {
  if (!frames.empty() && frames.size() != log.size()) {
    throw std::invalid_argument("persist_run: frame and pose counts differ");
  }
  std::error_code ec;
  std::filesystem::create_directories(dir / "frames", ec);
  if (ec) throw IoError(dir, "cannot create dataset directory");
  for (const Frame& f : frames) write_ppm(frame_path(dir, f.frame_id), f.image);
  write_pose_csv(dir / "poses.csv", log);
}

LoadedRun load_run(const std::filesystem::path& dir) {
  LoadedRun run;
  run.log = read_pose_csv(dir / "poses.csv");
  run.frames.reserve(run.log.size());
  for (const PoseSample& s : run.log.samples) {
    Frame f;
    f.frame_id = s.frame_id;
    f.truth_pose = s.pose;
    f.image = read_ppm(frame_path(dir, s.frame_id));
    run.frames.push_back(std::move(f));
  }
  return run;
}

}  // namespace floorloc
