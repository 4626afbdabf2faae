#pragma once

// Evaluation metrics and the end-to-end experiment driver.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "floorloc/config.hpp"
#include "floorloc/localizer.hpp"
#include "floorloc/mapper.hpp"

namespace floorloc {

struct FrameRecord {
  std::uint64_t frame_id = 0;
  LocStatus status = LocStatus::no_keypoints;
  std::optional<Pose2D> predicted;
  Pose2D truth;
  double position_error = 0.0;  // meters, predicted frames only
  double angle_error = 0.0;     // radians, predicted frames only
  bool true_success = false;
};

struct RunMetrics {
  std::size_t n_frames = 0;
  std::size_t n_predicted = 0;
  std::size_t n_true_success = 0;
  double psr = 0.0;
  double tsr = 0.0;
  double mean_position_error = 0.0;            // over true successes
  double mean_angle_error = 0.0;               // radians, over true successes
  double mean_position_error_predicted = 0.0;  // over all predictions
  double psr_tsr_gap = 0.0;
  double sec_per_frame = 0.0;
  std::vector<FrameRecord> records;
};

/// Predictions are matched to truth samples by frame id; both sets must
/// hold the same ids. Records follow the truth order.
RunMetrics evaluate_run(std::span<const LocalizationResult> predictions, const PoseLog& truth,
                        const SuccessGates& gates);

/// Runs every frame through the localizer (in parallel, results in input
/// order) and records the mean wall time per frame.
std::vector<LocalizationResult> localize_frames(const Localizer& localizer, std::size_t n_frames,
                                                const FrameSource& frames, unsigned threads,
                                                double* sec_per_frame = nullptr);

// Derived layout of an experiment.

/// Square eval region of the given area centered on the floor.
Rect eval_region(const ExperimentConfig& config, double area_m2);

/// Mapping runs tiling the floor; frames render at the true pose with
/// seeded pixel noise, the log carries optional pose noise.
std::vector<MapRunInput> make_mapping_runs(const FloorTruth& floor, const ExperimentConfig& config);

struct EvalRunSet {
  double area_m2 = 0.0;
  std::size_t run_index = 0;
  EvalRun run;
  FrameSource frames;  // renders at the actual pose
};

std::vector<EvalRunSet> make_eval_runs(const FloorTruth& floor, const ExperimentConfig& config);

std::uint64_t mapping_noise_seed(const ExperimentConfig& config);
std::uint64_t eval_noise_seed(const ExperimentConfig& config);
inline constexpr std::uint64_t kEvalFrameIdBase = 1'000'000'000;

FeatureExtractor make_extractor(const ExperimentConfig& config);

struct AreaResult {
  double area_m2 = 0.0;
  RunMetrics metrics;  // all runs of the area pooled
};

struct ExperimentResult {
  MapperStats map_stats;
  IndexInfo index;
  std::size_t map_entries = 0;
  double map_seconds = 0.0;
  std::vector<AreaResult> areas;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Floor -> mapping runs -> map -> eval runs -> localization -> reports.
/// Writes into `out_dir` when it is non-empty. When `build_out` is given it
/// receives the map build, observations and clusters included.
ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::filesystem::path& out_dir,
                                const ProgressFn& progress = {},
                                MapBuildResult* build_out = nullptr);

}  // namespace floorloc
