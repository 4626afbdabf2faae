#pragma once

// Experiment configuration: flat `key = value` text, '#' starts a comment.
// Unknown keys, duplicate keys and malformed values are errors.

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "floorloc/detector.hpp"
#include "floorloc/floorsim.hpp"
#include "floorloc/localizer.hpp"
#include "floorloc/mapper.hpp"

namespace floorloc {

struct SuccessGates {
  double max_position_error = 0.10;                    // meters
  double max_angle_error = 20.0 * std::numbers::pi / 180.0;  // radians
};

struct ExperimentConfig {
  std::uint64_t seed = 42;
  unsigned threads = 0;

  FloorSpec floor;
  CameraModel camera;

  double mapping_tile = 2.0;
  double lane_spacing = 0.010;
  double mapping_speed = 0.2;
  double mapping_rate = 60.0;
  double mapping_noise_sigma = 3.0;
  double mapping_pose_noise_sigma = 0.0;

  std::vector<double> eval_areas{1.0};  // m^2, square regions centered on the floor
  std::size_t eval_runs_per_area = 1;
  std::size_t eval_frames = 600;
  double eval_speed = 0.3;
  double eval_rate = 60.0;
  double eval_noise_sigma = 3.0;
  double eval_pose_noise_sigma = 0.0005;
  double eval_inset = 0.05;  // meters kept clear of the floor edge

  DetectorParams detector;
  double segment_max_distance = 90.0;
  MapperParams mapper;
  LocalizationParams localizer;
  bool search_auto = true;  // exact below kExactSearchLimit entries, else localizer.search
  SuccessGates gates;

  void validate() const;
};

inline constexpr std::size_t kExactSearchLimit = 100'000;

/// Search mode used against a map of `n_entries`.
SearchMode resolve_search(const ExperimentConfig& config, std::size_t n_entries);

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

/// Every recognized key with its current value, in the accepted syntax.
std::string format_config(const ExperimentConfig& config);

}  // namespace floorloc
