#pragma once

// CSV and SVG outputs of localization and evaluation.

#include <filesystem>
#include <span>
#include <vector>

#include "floorloc/harness.hpp"

namespace floorloc {

/// `frame_id,status,x,y,theta,inliers,n_keypoints,n_matches_filtered`;
/// pose fields are empty on failure.
void write_predictions_csv(const std::filesystem::path& path,
                           std::span<const LocalizationResult> results);
std::vector<LocalizationResult> read_predictions_csv(const std::filesystem::path& path);

/// `frame_id,status,pred_x,pred_y,pred_theta,true_x,true_y,true_theta,
/// pos_err_m,angle_err_deg,true_success`.
void write_frames_csv(const std::filesystem::path& path, const RunMetrics& metrics);

struct SummaryRow {
  double area_m2 = 0.0;
  const RunMetrics* metrics = nullptr;
};

/// `area_m2,n_frames,psr,tsr,mean_pos_err_m,mean_angle_err_deg,
/// mean_pos_err_true_m,psr_tsr_gap,sec_per_frame`. mean_pos_err_m averages
/// over all predicted frames; the angle and *_true_m columns over true
/// successes.
void write_summary_csv(const std::filesystem::path& path, std::span<const SummaryRow> rows);

/// Truth polyline plus one circle per predicted frame; failed frames are
/// marked with a cross at their true position.
void write_trajectory_svg(const std::filesystem::path& path, const RunMetrics& metrics);

/// summary.csv, frames.csv and trajectory.svg under `dir`.
void emit_report(const RunMetrics& metrics, double area_m2, const std::filesystem::path& dir);

}  // namespace floorloc
