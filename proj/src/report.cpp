#include "floorloc/report.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <string>

#include "floorloc/errors.hpp"

namespace floorloc {
namespace {

constexpr const char* kPredictionsHeader =
    "frame_id,status,x,y,theta,inliers,n_keypoints,n_matches_filtered";
constexpr const char* kFramesHeader =
    "frame_id,status,pred_x,pred_y,pred_theta,true_x,true_y,true_theta,pos_err_m,angle_err_deg,"
    "true_success";
constexpr const char* kSummaryHeader =
    "area_m2,n_frames,psr,tsr,mean_pos_err_m,mean_angle_err_deg,mean_pos_err_true_m,psr_tsr_gap,"
    "sec_per_frame";

constexpr double kDeg = 180.0 / std::numbers::pi;

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw IoError(path, "write failed");
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> f;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    f.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return f;
}

}  // namespace

void write_predictions_csv(const std::filesystem::path& path,
                           std::span<const LocalizationResult> results) {
  std::ofstream out = open_out(path);
  out << kPredictionsHeader << '\n';
  char buf[256];
  for (const LocalizationResult& r : results) {
    const std::string_view st = status_name(r.status);
    if (r.pose) {
      std::snprintf(buf, sizeof(buf), "%" PRIu64 ",%.*s,%.6f,%.6f,%.6f,%zu,%zu,%zu\n", r.frame_id,
                    static_cast<int>(st.size()), st.data(), r.pose->x, r.pose->y, r.pose->theta,
                    r.inliers, r.n_keypoints, r.n_matches_filtered);
    } else {
      std::snprintf(buf, sizeof(buf), "%" PRIu64 ",%.*s,,,,%zu,%zu,%zu\n", r.frame_id,
                    static_cast<int>(st.size()), st.data(), r.inliers, r.n_keypoints,
                    r.n_matches_filtered);
    }
    out << buf;
  }
  finish(out, path);
}

std::vector<LocalizationResult> read_predictions_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open for reading");
  std::string line;
  if (!std::getline(in, line) || line != kPredictionsHeader) {
    throw FormatError(FormatError::Kind::bad_magic, "not a predictions CSV: " + path.string());
  }
  std::vector<LocalizationResult> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto f = split(line);
    const auto bad = [&] {
      return FormatError(FormatError::Kind::malformed,
                         path.string() + ":" + std::to_string(line_no) + ": bad prediction row");
    };
    if (f.size() != 8) throw bad();
    LocalizationResult r;
    try {
      std::size_t pos = 0;
      r.frame_id = std::stoull(f[0], &pos);
      if (pos != f[0].size()) throw bad();
      const auto st = parse_status(f[1]);
      if (!st) throw bad();
      r.status = *st;
      if (r.status == LocStatus::success) {
        r.pose = Pose2D{std::stod(f[2]), std::stod(f[3]), std::stod(f[4])};
      } else if (!f[2].empty() || !f[3].empty() || !f[4].empty()) {
        throw bad();
      }
      r.inliers = std::stoull(f[5]);
      r.n_keypoints = std::stoull(f[6]);
      r.n_matches_filtered = std::stoull(f[7]);
    } catch (const std::logic_error&) {
      throw bad();
    }
    out.push_back(r);
  }
  return out;
}

void write_frames_csv(const std::filesystem::path& path, const RunMetrics& metrics) {
  std::ofstream out = open_out(path);
  out << kFramesHeader << '\n';
  char buf[320];
  for (const FrameRecord& r : metrics.records) {
    const std::string_view st = status_name(r.status);
    int n = std::snprintf(buf, sizeof(buf), "%" PRIu64 ",%.*s,", r.frame_id,
                          static_cast<int>(st.size()), st.data());
    if (r.predicted) {
      n += std::snprintf(buf + n, sizeof(buf) - n, "%.6f,%.6f,%.6f,", r.predicted->x,
                         r.predicted->y, r.predicted->theta);
    } else {
      n += std::snprintf(buf + n, sizeof(buf) - n, ",,,");
    }
    n += std::snprintf(buf + n, sizeof(buf) - n, "%.6f,%.6f,%.6f,", r.truth.x, r.truth.y,
                       r.truth.theta);
    if (r.predicted) {
      std::snprintf(buf + n, sizeof(buf) - n, "%.9f,%.9f,%d\n", r.position_error,
                    r.angle_error * kDeg, r.true_success ? 1 : 0);
    } else {
      std::snprintf(buf + n, sizeof(buf) - n, ",,0\n");
    }
    out << buf;
  }
  finish(out, path);
}

void write_summary_csv(const std::filesystem::path& path, std::span<const SummaryRow> rows) {
  std::ofstream out = open_out(path);
  out << kSummaryHeader << '\n';
  char buf[320];
  for (const SummaryRow& row : rows) {
    const RunMetrics& m = *row.metrics;
    std::snprintf(buf, sizeof(buf), "%g,%zu,%.6f,%.6f,%.9f,%.6f,%.9f,%.6f,%.6f\n", row.area_m2,
                  m.n_frames, m.psr, m.tsr, m.mean_position_error_predicted,
                  m.mean_angle_error * kDeg, m.mean_position_error, m.psr_tsr_gap,
                  m.sec_per_frame);
    out << buf;
  }
  finish(out, path);
}

void write_trajectory_svg(const std::filesystem::path& path, const RunMetrics& metrics) {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;
  bool first = true;
  auto extend = [&](double x, double y) {
    if (first) {
      x0 = x1 = x;
      y0 = y1 = y;
      first = false;
    }
    x0 = std::min(x0, x);
    x1 = std::max(x1, x);
    y0 = std::min(y0, y);
    y1 = std::max(y1, y);
  };
  for (const FrameRecord& r : metrics.records) {
    extend(r.truth.x, r.truth.y);
    if (r.predicted) extend(r.predicted->x, r.predicted->y);
  }
  const double span = std::max({x1 - x0, y1 - y0, 1e-3});
  const double margin = 0.05 * span;
  const double size = 800.0;
  const double scale = size / (span + 2.0 * margin);
  // SVG y grows downward; world y grows upward.
  auto sx = [&](double x) { return (x - x0 + margin) * scale; };
  auto sy = [&](double y) { return size - (y - y0 + margin) * scale; };

  std::ofstream out = open_out(path);
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%.0f\" height=\"%.0f\" "
                "viewBox=\"0 0 %.0f %.0f\">\n",
                size, size, size, size);
  out << buf;
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!metrics.records.empty()) {
    out << "<polyline class=\"truth\" fill=\"none\" stroke=\"red\" stroke-width=\"1.5\" points=\"";
    for (const FrameRecord& r : metrics.records) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", sx(r.truth.x), sy(r.truth.y));
      out << buf;
    }
    out << "\"/>\n";
  }
  for (const FrameRecord& r : metrics.records) {
    if (r.predicted) {
      std::snprintf(buf, sizeof(buf),
                    "<circle class=\"pred\" cx=\"%.2f\" cy=\"%.2f\" r=\"2\" fill=\"blue\"/>\n",
                    sx(r.predicted->x), sy(r.predicted->y));
    } else {
      const double cx = sx(r.truth.x);
      const double cy = sy(r.truth.y);
      std::snprintf(buf, sizeof(buf),
                    "<path class=\"fail\" d=\"M%.2f %.2fL%.2f %.2fM%.2f %.2fL%.2f %.2f\" "
                    "stroke=\"gray\" stroke-width=\"1\"/>\n",
                    cx - 3, cy - 3, cx + 3, cy + 3, cx - 3, cy + 3, cx + 3, cy - 3);
    }
    out << buf;
  }
  out << "</svg>\n";
  finish(out, path);
}

void emit_report(const RunMetrics& metrics, double area_m2, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir, "cannot create report directory");
  const SummaryRow row{area_m2, &metrics};
  write_summary_csv(dir / "summary.csv", std::span<const SummaryRow>(&row, 1));
  write_frames_csv(dir / "frames.csv", metrics);
  write_trajectory_svg(dir / "trajectory.svg", metrics);
}

}  // namespace floorloc
