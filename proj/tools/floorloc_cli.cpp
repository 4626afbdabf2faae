// floorloc command line: dataset generation, mapping, localization and
// evaluation, separately or as one experiment.

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <CLI11.hpp>

#include "floorloc/config.hpp"
#include "floorloc/errors.hpp"
#include "floorloc/floorsim.hpp"
#include "floorloc/harness.hpp"
#include "floorloc/image_io.hpp"
#include "floorloc/localizer.hpp"
#include "floorloc/mapper.hpp"
#include "floorloc/report.hpp"

namespace fs = std::filesystem;
using namespace floorloc;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string config_path;
  std::string out = "out";
  bool exact_knn = false;
  std::optional<unsigned> threads;
  bool quiet = false;
};

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config_path.empty() ? ExperimentConfig{} : load_config(c.config_path);
  if (c.seed) cfg.seed = *c.seed;
  if (c.threads) cfg.threads = *c.threads;
  if (c.exact_knn) {
    cfg.search_auto = false;
    cfg.localizer.search = SearchMode::exact;
  }
  cfg.floor.rng_seed = cfg.seed;
  cfg.localizer.global_seed = cfg.seed;
  cfg.validate();
  return cfg;
}

void log(const Common& c, const std::string& msg) {
  if (!c.quiet) std::cerr << msg << '\n';
}

fs::path out_dir(const Common& c) {
  const fs::path dir = c.out;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create output directory");
  return dir;
}

FloorTruth floor_from(const std::string& path, const ExperimentConfig& cfg) {
  return path.empty() ? generate_floor(cfg.floor) : load_floor(path);
}

// Reads mask_NNNNNN.pgm from the masks/ directory of whichever dataset the
// frame id belongs to.
class DatasetMaskSegmenter final : public Segmenter {
 public:
  void add(std::uint64_t frame_id, const fs::path& dir) {
    if (!dirs_.emplace(frame_id, dir / "masks").second) {
      throw std::invalid_argument("duplicate frame id " + std::to_string(frame_id));
    }
  }
  SegMask segment(const RgbImage& image, std::uint64_t frame_id) const override {
    const auto it = dirs_.find(frame_id);
    if (it == dirs_.end()) {
      throw std::invalid_argument("no mask for frame " + std::to_string(frame_id));
    }
    return MaskFileSegmenter(it->second).segment(image, frame_id);
  }

 private:
  std::unordered_map<std::uint64_t, fs::path> dirs_;
};

FrameSource dataset_frames(const fs::path& dir, const PoseLog& log) {
  auto ids = std::make_shared<std::vector<std::uint64_t>>();
  auto poses = std::make_shared<std::vector<Pose2D>>();
  for (const PoseSample& s : log.samples) {
    ids->push_back(s.frame_id);
    poses->push_back(s.pose);
  }
  return [dir, ids, poses](std::size_t k) {
    Frame f;
    f.frame_id = (*ids)[k];
    f.truth_pose = (*poses)[k];
    f.image = read_ppm(frame_path(dir, f.frame_id));
    return f;
  };
}

// Writes frames (and optionally truth masks) for one run as a dataset. The
// frames' own poses go to actual_poses.csv next to the recorded log.
void write_dataset(const fs::path& dir, const PoseLog& log, const FrameSource& frames,
                   const FloorTruth& floor, const CameraModel& cam, bool masks,
                   std::size_t max_frames) {
  PoseLog kept = log;
  if (max_frames && kept.samples.size() > max_frames) kept.samples.resize(max_frames);
  PoseLog actual = kept;
  std::error_code ec;
  fs::create_directories(dir / "frames", ec);
  if (masks) fs::create_directories(dir / "masks", ec);
  if (ec) throw IoError(dir, "cannot create dataset directory");
  for (std::size_t k = 0; k < kept.size(); ++k) {
    const Frame f = frames(k);
    actual.samples[k].pose = f.truth_pose;
    write_ppm(frame_path(dir, f.frame_id), f.image);
    if (masks) {
      SegMask m(cam.image_width, cam.image_height);
      m.labels = render_class_labels(floor, cam, f.truth_pose);
      write_pgm(MaskFileSegmenter::mask_path(dir / "masks", f.frame_id), to_gray(m));
    }
  }
  write_pose_csv(dir / "poses.csv", kept);
  write_pose_csv(dir / "actual_poses.csv", actual);
}

int cmd_gen_floor(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const fs::path dir = out_dir(c);
  const FloorTruth floor = generate_floor(cfg.floor);
  save_floor(floor, dir / "floor.kflt");
  std::printf("%zu blobs on %g x %g m -> %s\n", floor.blobs().size(), cfg.floor.width,
              cfg.floor.height, (dir / "floor.kflt").string().c_str());
  return 0;
}

struct GenRunsOpts {
  std::string floor;
  bool mapping = false;
  bool masks = false;
  std::size_t max_frames = 0;
};

int cmd_gen_runs(const Common& c, const GenRunsOpts& o) {
  const ExperimentConfig cfg = load(c);
  const fs::path dir = out_dir(c);
  const FloorTruth floor = floor_from(o.floor, cfg);
  for (const EvalRunSet& set : make_eval_runs(floor, cfg)) {
    char sub[64];
    std::snprintf(sub, sizeof(sub), "eval/area_%g/run_%zu", set.area_m2, set.run_index);
    write_dataset(dir / sub, set.run.recorded, set.frames, floor, cfg.camera, o.masks,
                  o.max_frames);
    log(c, std::string("wrote ") + (dir / sub).string());
  }
  if (o.mapping) {
    const std::vector<MapRunInput> runs = make_mapping_runs(floor, cfg);
    for (std::size_t i = 0; i < runs.size(); ++i) {
      char sub[64];
      std::snprintf(sub, sizeof(sub), "mapping/run_%zu", i);
      write_dataset(dir / sub, runs[i].log, runs[i].frames, floor, cfg.camera, o.masks,
                    o.max_frames);
      log(c, std::string("wrote ") + (dir / sub).string());
    }
  }
  return 0;
}

struct BuildMapOpts {
  std::string floor;
  std::vector<std::string> runs;
  bool masks = false;
  std::string export_patches;
  std::size_t per_cluster = 4;
};

int cmd_build_map(const Common& c, const BuildMapOpts& o) {
  const ExperimentConfig cfg = load(c);
  const fs::path dir = out_dir(c);

  std::optional<FloorTruth> floor;
  std::vector<MapRunInput> runs;
  std::shared_ptr<DatasetMaskSegmenter> masks;
  if (o.masks) masks = std::make_shared<DatasetMaskSegmenter>();
  if (o.runs.empty()) {
    if (o.masks) throw std::invalid_argument("--masks needs --runs");
    floor.emplace(floor_from(o.floor, cfg));
    runs = make_mapping_runs(*floor, cfg);
  } else {
    for (const std::string& r : o.runs) {
      PoseLog l = read_pose_csv(fs::path(r) / "poses.csv", cfg.mapping_rate);
      if (masks) {
        for (const PoseSample& s : l.samples) masks->add(s.frame_id, r);
      }
      FrameSource src = dataset_frames(r, l);
      runs.push_back({std::move(l), std::move(src)});
    }
  }
  const FeatureExtractor extractor =
      masks ? FeatureExtractor(cfg.camera, cfg.detector, masks) : make_extractor(cfg);

  MapperParams mp = cfg.mapper;
  mp.threads = cfg.threads;
  mp.keep_patches = !o.export_patches.empty();
  mp.keep_observations = mp.keep_patches;
  std::size_t last = 0;
  mp.progress = [&](std::size_t done, std::size_t total) {
    const std::size_t pct = total ? done * 10 / total : 10;
    if (pct != last) {
      last = pct;
      log(c, "mapping: " + std::to_string(done) + "/" + std::to_string(total) + " frames");
    }
  };
  const MapBuildResult build = build_map(runs, extractor, mp);
  build.db.save(dir / "map.kmap");
  const IndexInfo info = build.db.index_info();
  std::printf("%zu entries (%s); index lists %zu probe %zu self-recall %.4f -> %s\n",
              build.db.size(), build.stats.summary().c_str(), info.n_lists, info.n_probe,
              info.self_recall, (dir / "map.kmap").string().c_str());
  if (!o.export_patches.empty()) {
    const std::size_t n = export_training_clusters(cluster_patch_sets(build), o.per_cluster,
                                                   cfg.seed, o.export_patches);
    std::printf("exported %zu clusters to %s\n", n, o.export_patches.c_str());
  }
  return 0;
}

struct LocalizeOpts {
  std::string map;
  std::string run;
  bool masks = false;
};

int cmd_localize(const Common& c, const LocalizeOpts& o) {
  const ExperimentConfig cfg = load(c);
  const fs::path dir = out_dir(c);
  const MapDatabase db = MapDatabase::load(o.map, cfg.mapper.index);
  const PoseLog log_in = read_pose_csv(fs::path(o.run) / "poses.csv", cfg.eval_rate);
  const FeatureExtractor extractor =
      o.masks ? FeatureExtractor(cfg.camera, cfg.detector,
                                 std::make_shared<MaskFileSegmenter>(fs::path(o.run) / "masks"))
              : make_extractor(cfg);
  LocalizationParams lp = cfg.localizer;
  lp.search = resolve_search(cfg, db.size());
  const Localizer localizer(db, extractor, lp);

  double spf = 0.0;
  const std::vector<LocalizationResult> preds =
      localize_frames(localizer, log_in.size(), dataset_frames(o.run, log_in), cfg.threads, &spf);
  write_predictions_csv(dir / "predictions.csv", preds);
  {
    std::ofstream t(dir / "timing.csv");
    t << "n_frames,sec_per_frame\n" << preds.size() << ',' << spf << '\n';
    if (!t) throw IoError(dir / "timing.csv", "write failed");
  }
  std::size_t ok = 0;
  for (const auto& r : preds) ok += r.ok() ? 1 : 0;
  std::printf("%zu/%zu frames localized (%s search, %.4f s/frame) -> %s\n", ok, preds.size(),
              lp.search == SearchMode::exact ? "exact" : "approx", spf,
              (dir / "predictions.csv").string().c_str());
  return 0;
}

struct EvaluateOpts {
  std::string predictions;
  std::string truth;
  double area = 0.0;
};

int cmd_evaluate(const Common& c, const EvaluateOpts& o) {
  const ExperimentConfig cfg = load(c);
  const fs::path dir = out_dir(c);
  fs::path truth = o.truth;
  if (fs::is_directory(truth)) truth /= "poses.csv";
  const std::vector<LocalizationResult> preds = read_predictions_csv(o.predictions);
  RunMetrics m = evaluate_run(preds, read_pose_csv(truth, cfg.eval_rate), cfg.gates);
  const fs::path timing = fs::path(o.predictions).parent_path() / "timing.csv";
  if (fs::exists(timing)) {
    std::ifstream t(timing);
    std::string header;
    std::size_t n = 0;
    char comma = 0;
    double spf = 0.0;
    if (std::getline(t, header) && (t >> n >> comma >> spf) && comma == ',' && n == preds.size()) {
      m.sec_per_frame = spf;
    }
  }
  emit_report(m, o.area, dir);
  std::printf("frames %zu  psr %.4f  tsr %.4f  gap %.4f  pos err %.5f m  angle err %.3f deg\n",
              m.n_frames, m.psr, m.tsr, m.psr_tsr_gap, m.mean_position_error,
              m.mean_angle_error * 180.0 / std::numbers::pi);
  return 0;
}

int cmd_experiment(const Common& c) {
  const ExperimentConfig cfg = load(c);
  const fs::path dir = out_dir(c);
  const ExperimentResult r = run_experiment(cfg, dir, [&](const std::string& m) { log(c, m); });
  std::printf("map: %zu entries in %.1f s (%s)\n", r.map_entries, r.map_seconds,
              r.map_stats.summary().c_str());
  for (const AreaResult& a : r.areas) {
    const RunMetrics& m = a.metrics;
    std::printf(
        "area %g m2: frames %zu  psr %.4f  tsr %.4f  gap %.4f  pos err %.5f m  angle err %.3f "
        "deg  %.4f s/frame\n",
        a.area_m2, m.n_frames, m.psr, m.tsr, m.psr_tsr_gap, m.mean_position_error,
        m.mean_angle_error * 180.0 / std::numbers::pi, m.sec_per_frame);
  }
  std::printf("reports in %s\n", dir.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic ground-texture localization toolkit"};
  app.require_subcommand(1);
  app.fallthrough();

  Common common;
  app.add_option("--seed", common.seed, "Global seed (overrides the config)");
  app.add_option("--config", common.config_path, "Config file (key = value)")
      ->check(CLI::ExistingFile);
  app.add_option("--out", common.out, "Output directory")->capture_default_str();
  app.add_flag("--exact-knn", common.exact_knn, "Force exact k-NN search");
  app.add_option("--threads", common.threads, "Worker threads (0: all cores)");
  app.add_flag("-q,--quiet", common.quiet, "No progress on stderr");

  auto* gen_floor = app.add_subcommand("gen-floor", "Generate a floor and write floor.kflt");

  GenRunsOpts gr;
  auto* gen_runs = app.add_subcommand("gen-runs", "Write evaluation (and mapping) datasets");
  gen_runs->add_option("--floor", gr.floor, "floor.kflt (default: generate from the seed)")
      ->check(CLI::ExistingFile);
  gen_runs->add_flag("--mapping", gr.mapping, "Also write the mapping runs");
  gen_runs->add_flag("--masks", gr.masks, "Also write ground-truth segmentation masks");
  gen_runs->add_option("--max-frames", gr.max_frames, "Cap on frames written per run");

  BuildMapOpts bm;
  auto* build = app.add_subcommand("build-map", "Build map.kmap from mapping runs");
  build->add_option("--floor", bm.floor, "Render mapping runs over this floor")
      ->check(CLI::ExistingFile);
  build->add_option("--runs", bm.runs, "Mapping dataset directories")->check(CLI::ExistingDirectory);
  build->add_flag("--masks", bm.masks, "Segment with each dataset's masks/");
  build->add_option("--export-patches", bm.export_patches,
                    "Write per-cluster training patches to this directory");
  build->add_option("--per-cluster", bm.per_cluster, "Patches per exported cluster")
      ->capture_default_str();
  build->get_option("--floor")->excludes("--runs");

  LocalizeOpts lo;
  auto* localize = app.add_subcommand("localize", "Localize every frame of a dataset");
  localize->add_option("--map", lo.map, "map.kmap")->required()->check(CLI::ExistingFile);
  localize->add_option("--run", lo.run, "Dataset directory")->required()->check(
      CLI::ExistingDirectory);
  localize->add_flag("--masks", lo.masks, "Segment with the dataset's masks/");

  EvaluateOpts ev;
  auto* evaluate = app.add_subcommand("evaluate", "Score predictions against a pose log");
  evaluate->add_option("--predictions", ev.predictions, "predictions.csv")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate->add_option("--truth", ev.truth, "poses.csv or dataset directory")
      ->required()
      ->check(CLI::ExistingPath);
  evaluate->add_option("--area", ev.area, "Area label for the summary row");

  auto* experiment = app.add_subcommand("experiment", "Full pipeline with reports");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen_floor) return cmd_gen_floor(common);
    if (*gen_runs) return cmd_gen_runs(common, gr);
    if (*build) return cmd_build_map(common, bm);
    if (*localize) return cmd_localize(common, lo);
    if (*evaluate) return cmd_evaluate(common, ev);
    if (*experiment) return cmd_experiment(common);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "floorloc: error: %s\n", e.what());
    return 1;
  }
  return 0;
}
