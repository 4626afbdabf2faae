#include "floorloc/harness.hpp"

#include <chrono>
#include <cstdio>
#include <memory>
#include <random>
#include <unordered_map>

#include "floorloc/errors.hpp"
#include "floorloc/image_io.hpp"
#include "floorloc/report.hpp"
#include "parallel.hpp"

namespace floorloc {

RunMetrics evaluate_run(std::span<const LocalizationResult> predictions, const PoseLog& truth,
                        const SuccessGates& gates) {
  std::unordered_map<std::uint64_t, std::size_t> by_id;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (!by_id.emplace(predictions[i].frame_id, i).second) {
      throw std::invalid_argument("evaluate: duplicate prediction for frame " +
                                  std::to_string(predictions[i].frame_id));
    }
  }
  if (predictions.size() != truth.size()) {
    throw std::invalid_argument("evaluate: " + std::to_string(predictions.size()) +
                                " predictions for " + std::to_string(truth.size()) + " frames");
  }

  RunMetrics m;
  m.n_frames = truth.size();
  m.records.reserve(truth.size());
  double sum_pos_true = 0.0, sum_ang_true = 0.0, sum_pos_pred = 0.0;
  for (const PoseSample& s : truth.samples) {
    const auto it = by_id.find(s.frame_id);
    if (it == by_id.end()) {
      throw std::invalid_argument("evaluate: no prediction for frame " + std::to_string(s.frame_id));
    }
    const LocalizationResult& p = predictions[it->second];
    FrameRecord r;
    r.frame_id = s.frame_id;
    r.status = p.status;
    r.truth = s.pose;
    if (p.ok() && p.pose) {
      r.predicted = p.pose;
      const PoseDelta d = pose_delta(*p.pose, s.pose);
      r.position_error = d.distance;
      r.angle_error = d.angle;
      r.true_success = d.distance <= gates.max_position_error && d.angle <= gates.max_angle_error;
      ++m.n_predicted;
      sum_pos_pred += d.distance;
      if (r.true_success) {
        ++m.n_true_success;
        sum_pos_true += d.distance;
        sum_ang_true += d.angle;
      }
    }
    m.records.push_back(r);
  }
  if (m.n_frames > 0) {
    m.psr = static_cast<double>(m.n_predicted) / m.n_frames;
    m.tsr = static_cast<double>(m.n_true_success) / m.n_frames;
  }
  if (m.n_predicted > 0) m.mean_position_error_predicted = sum_pos_pred / m.n_predicted;
  if (m.n_true_success > 0) {
    m.mean_position_error = sum_pos_true / m.n_true_success;
    m.mean_angle_error = sum_ang_true / m.n_true_success;
  }
  m.psr_tsr_gap = m.psr - m.tsr;
  return m;
}

std::vector<LocalizationResult> localize_frames(const Localizer& localizer, std::size_t n_frames,
                                                const FrameSource& frames, unsigned threads,
                                                double* sec_per_frame) {
  std::vector<LocalizationResult> out(n_frames);
  const auto t0 = std::chrono::steady_clock::now();
  detail::parallel_for(n_frames, threads, [&](std::size_t i) {
    const Frame f = frames(i);
    out[i] = localizer.localize(f.image, f.frame_id);
  });
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (sec_per_frame) *sec_per_frame = n_frames ? secs / static_cast<double>(n_frames) : 0.0;
  return out;
}

Rect eval_region(const ExperimentConfig& config, double area_m2) {
  const double side = std::sqrt(area_m2);
  const double room = std::min(config.floor.width, config.floor.height) - 2.0 * config.eval_inset;
  if (side > room + 1e-12) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "eval area %.4g m^2 (side %.4g m) does not fit the floor inset by %.4g m",
                  area_m2, side, config.eval_inset);
    throw ConfigError(buf);
  }
  const double cx = 0.5 * config.floor.width;
  const double cy = 0.5 * config.floor.height;
  return {cx - 0.5 * side, cy - 0.5 * side, cx + 0.5 * side, cy + 0.5 * side};
}

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2));
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t mapping_noise_seed(const ExperimentConfig& config) { return mix(config.seed, 1); }
std::uint64_t eval_noise_seed(const ExperimentConfig& config) { return mix(config.seed, 2); }

FeatureExtractor make_extractor(const ExperimentConfig& config) {
  auto seg = std::make_shared<PaletteSegmenter>(
      std::array<Rgb, kNumClasses>{kBackgroundColor, nominal_color(ColorClass::red),
                                   nominal_color(ColorClass::green), nominal_color(ColorClass::blue),
                                   nominal_color(ColorClass::white)},
      config.segment_max_distance);
  return FeatureExtractor(config.camera, config.detector, std::move(seg));
}

std::vector<MapRunInput> make_mapping_runs(const FloorTruth& floor,
                                           const ExperimentConfig& config) {
  const double w = floor.spec().width;
  const double h = floor.spec().height;
  const double side = std::min({config.mapping_tile, w, h});
  const auto nx = static_cast<std::size_t>(std::ceil(w / side - 1e-9));
  const auto ny = static_cast<std::size_t>(std::ceil(h / side - 1e-9));

  std::vector<MapRunInput> runs;
  std::uint64_t next_id = 0;
  std::mt19937_64 rng(mix(config.seed, 3));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const std::uint64_t noise_seed = mapping_noise_seed(config);
  for (std::size_t j = 0; j < ny; ++j) {
    for (std::size_t i = 0; i < nx; ++i) {
      MappingRunParams p;
      p.origin = {std::min(static_cast<double>(i) * side, w - side),
                  std::min(static_cast<double>(j) * side, h - side)};
      p.tile = side;
      p.lane_spacing = config.lane_spacing;
      p.speed = config.mapping_speed;
      p.rate = config.mapping_rate;
      p.first_frame_id = next_id;
      PoseLog log = generate_mapping_run(config.camera, p);
      next_id += log.size();

      auto actual = std::make_shared<std::vector<PoseSample>>(log.samples);
      if (config.mapping_pose_noise_sigma > 0.0) {
        for (PoseSample& s : log.samples) {
          s.pose.x += config.mapping_pose_noise_sigma * gauss(rng);
          s.pose.y += config.mapping_pose_noise_sigma * gauss(rng);
        }
      }
      const CameraModel cam = config.camera;
      const double sigma = config.mapping_noise_sigma;
      FrameSource source = [&floor, cam, sigma, noise_seed, actual](std::size_t k) {
        const PoseSample& s = (*actual)[k];
        return render_view(floor, cam, s.pose, sigma, frame_noise_seed(noise_seed, s.frame_id),
                           s.frame_id);
      };
      runs.push_back({std::move(log), std::move(source)});
    }
  }
  return runs;
}

std::vector<EvalRunSet> make_eval_runs(const FloorTruth& floor, const ExperimentConfig& config) {
  std::vector<EvalRunSet> sets;
  std::uint64_t next_id = kEvalFrameIdBase;
  const std::uint64_t noise_seed = eval_noise_seed(config);
  for (std::size_t a = 0; a < config.eval_areas.size(); ++a) {
    const Rect region = eval_region(config, config.eval_areas[a]);
    for (std::size_t r = 0; r < config.eval_runs_per_area; ++r) {
      EvalRunParams p;
      p.area = region;
      p.path_seed = mix(mix(config.seed, 100 + a), r);
      p.speed = config.eval_speed;
      p.rate = config.eval_rate;
      p.pose_noise_sigma = config.eval_pose_noise_sigma;
      p.n_frames = config.eval_frames;
      p.first_frame_id = next_id;
      next_id += p.n_frames;

      EvalRunSet set;
      set.area_m2 = config.eval_areas[a];
      set.run_index = r;
      set.run = generate_eval_run(p);
      auto actual = std::make_shared<std::vector<Pose2D>>(set.run.actual);
      auto ids = std::make_shared<std::vector<std::uint64_t>>();
      for (const PoseSample& s : set.run.recorded.samples) ids->push_back(s.frame_id);
      const CameraModel cam = config.camera;
      const double sigma = config.eval_noise_sigma;
      set.frames = [&floor, cam, sigma, noise_seed, actual, ids](std::size_t k) {
        return render_view(floor, cam, (*actual)[k], sigma,
                           frame_noise_seed(noise_seed, (*ids)[k]), (*ids)[k]);
      };
      sets.push_back(std::move(set));
    }
  }
  return sets;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg_in,
                                const std::filesystem::path& out_dir,
                                const ProgressFn& progress, MapBuildResult* build_out) {
  ExperimentConfig config = cfg_in;
  config.floor.rng_seed = config.seed;
  config.localizer.global_seed = config.seed;
  config.validate();
  auto say = [&](const std::string& msg) {
    if (progress) progress(msg);
  };
  const bool write = !out_dir.empty();
  if (write) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError(out_dir, "cannot create output directory");
  }

  ExperimentResult result;
  const FloorTruth floor = generate_floor(config.floor);
  say("floor: " + std::to_string(floor.blobs().size()) + " blobs");
  if (write) {
    save_floor(floor, out_dir / "floor.kflt");
    std::FILE* f = std::fopen((out_dir / "config.txt").string().c_str(), "w");
    if (!f) throw IoError(out_dir / "config.txt", "cannot open for writing");
    const std::string text = format_config(config);
    std::fputs(text.c_str(), f);
    std::fclose(f);
  }

  const FeatureExtractor extractor = make_extractor(config);
  const std::vector<MapRunInput> map_runs = make_mapping_runs(floor, config);
  MapperParams mp = config.mapper;
  mp.threads = config.threads;
  if (build_out) mp.keep_observations = true;
  std::size_t last_pct = 0;
  mp.progress = [&](std::size_t done, std::size_t total) {
    const std::size_t pct = total ? done * 10 / total : 10;
    if (pct != last_pct) {
      last_pct = pct;
      say("mapping: " + std::to_string(done) + "/" + std::to_string(total) + " frames");
    }
  };
  const auto t0 = std::chrono::steady_clock::now();
  MapBuildResult build = build_map(map_runs, extractor, mp);
  result.map_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  result.map_stats = build.stats;
  result.index = build.db.index_info();
  result.map_entries = build.db.size();
  say("map: " + std::to_string(build.db.size()) + " entries (" + build.stats.summary() + ")");
  if (write) build.db.save(out_dir / "map.kmap");

  LocalizationParams lp = config.localizer;
  lp.search = resolve_search(config, build.db.size());
  const Localizer localizer(build.db, extractor, lp);
  const std::vector<EvalRunSet> eval_sets = make_eval_runs(floor, config);

  std::vector<SummaryRow> rows;
  result.areas.reserve(config.eval_areas.size());
  for (double area : config.eval_areas) {
    std::vector<LocalizationResult> pooled;
    PoseLog pooled_truth;
    pooled_truth.capture_rate = config.eval_rate;
    double total_secs = 0.0;
    for (const EvalRunSet& set : eval_sets) {
      if (set.area_m2 != area) continue;
      double spf = 0.0;
      std::vector<LocalizationResult> preds =
          localize_frames(localizer, set.run.recorded.size(), set.frames, config.threads, &spf);
      RunMetrics m = evaluate_run(preds, set.run.recorded, config.gates);
      m.sec_per_frame = spf;
      total_secs += spf * static_cast<double>(preds.size());
      if (write) {
        char sub[64];
        std::snprintf(sub, sizeof(sub), "area_%g/run_%zu", area, set.run_index);
        const auto dir = out_dir / sub;
        std::filesystem::create_directories(dir);
        write_pose_csv(dir / "poses.csv", set.run.recorded);
        write_predictions_csv(dir / "predictions.csv", preds);
        emit_report(m, area, dir);
      }
      say("area " + std::to_string(area) + " run " + std::to_string(set.run_index) +
          ": psr " + std::to_string(m.psr) + " tsr " + std::to_string(m.tsr));
      pooled.insert(pooled.end(), preds.begin(), preds.end());
      pooled_truth.samples.insert(pooled_truth.samples.end(), set.run.recorded.samples.begin(),
                                  set.run.recorded.samples.end());
    }
    AreaResult ar;
    ar.area_m2 = area;
    ar.metrics = evaluate_run(pooled, pooled_truth, config.gates);
    ar.metrics.sec_per_frame = pooled.empty() ? 0.0 : total_secs / pooled.size();
    result.areas.push_back(std::move(ar));
  }
  for (const AreaResult& ar : result.areas) rows.push_back({ar.area_m2, &ar.metrics});
  if (write) write_summary_csv(out_dir / "summary.csv", rows);
  if (build_out) *build_out = std::move(build);
  return result;
}

}  // namespace floorloc
