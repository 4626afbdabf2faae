#include "floorloc/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "floorloc/errors.hpp"

namespace floorloc {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(std::string_view v) {
  double out = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("expected a number, got '" + std::string(v) + "'");
  }
  return out;
}

std::uint64_t to_uint(std::string_view v) {
  std::uint64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("expected a non-negative integer, got '" + std::string(v) + "'");
  }
  return out;
}

std::vector<double> to_list(std::string_view v) {
  std::vector<double> out;
  while (true) {
    const auto comma = v.find(',');
    out.push_back(to_double(trim(v.substr(0, comma))));
    if (comma == std::string_view::npos) break;
    v.remove_prefix(comma + 1);
  }
  return out;
}

std::string fmt(double v) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

std::string fmt_list(std::span<const double> v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s;
}

struct Key {
  const char* name;
  std::function<void(ExperimentConfig&, std::string_view)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

#define FL_DOUBLE(key, field)                                                    \
  Key {                                                                          \
    key, [](ExperimentConfig& c, std::string_view v) { c.field = to_double(v); }, \
        [](const ExperimentConfig& c) { return fmt(c.field); }                   \
  }
#define FL_UINT(key, field, type)                                                           \
  Key {                                                                                     \
    key, [](ExperimentConfig& c, std::string_view v) { c.field = static_cast<type>(to_uint(v)); }, \
        [](const ExperimentConfig& c) { return std::to_string(c.field); }                  \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      FL_UINT("seed", seed, std::uint64_t),
      FL_UINT("threads", threads, unsigned),
      FL_DOUBLE("floor.width", floor.width),
      FL_DOUBLE("floor.height", floor.height),
      FL_DOUBLE("floor.density", floor.blob_density),
      FL_DOUBLE("floor.radius_min_mm", floor.radius_min_mm),
      FL_DOUBLE("floor.radius_max_mm", floor.radius_max_mm),
      FL_DOUBLE("floor.aspect_min", floor.aspect_min),
      FL_DOUBLE("floor.aspect_max", floor.aspect_max),
      Key{"floor.color_weights",
          [](ExperimentConfig& c, std::string_view v) {
            const auto w = to_list(v);
            if (w.size() != 4) throw ConfigError("floor.color_weights needs 4 values (R,G,B,W)");
            std::copy(w.begin(), w.end(), c.floor.color_weights.begin());
          },
          [](const ExperimentConfig& c) { return fmt_list(c.floor.color_weights); }},
      FL_DOUBLE("mapping.tile", mapping_tile),
      FL_DOUBLE("mapping.lane_spacing", lane_spacing),
      FL_DOUBLE("mapping.speed", mapping_speed),
      FL_DOUBLE("mapping.rate", mapping_rate),
      FL_DOUBLE("mapping.noise_sigma", mapping_noise_sigma),
      FL_DOUBLE("mapping.pose_noise_sigma", mapping_pose_noise_sigma),
      Key{"eval.areas",
          [](ExperimentConfig& c, std::string_view v) { c.eval_areas = to_list(v); },
          [](const ExperimentConfig& c) { return fmt_list(c.eval_areas); }},
      FL_UINT("eval.runs_per_area", eval_runs_per_area, std::size_t),
      FL_UINT("eval.frames", eval_frames, std::size_t),
      FL_DOUBLE("eval.speed", eval_speed),
      FL_DOUBLE("eval.rate", eval_rate),
      FL_DOUBLE("eval.noise_sigma", eval_noise_sigma),
      FL_DOUBLE("eval.pose_noise_sigma", eval_pose_noise_sigma),
      FL_DOUBLE("eval.inset", eval_inset),
      FL_DOUBLE("detector.border_margin", detector.border_margin),
      FL_UINT("detector.min_blob_area", detector.min_blob_area, std::uint64_t),
      FL_UINT("detector.support_radius", detector.support_radius, int),
      FL_UINT("detector.min_support_pixels", detector.min_support_pixels, std::uint64_t),
      FL_DOUBLE("segmenter.max_distance", segment_max_distance),
      FL_UINT("filter.window_size", mapper.filter.window_size, std::size_t),
      FL_DOUBLE("filter.alpha", mapper.filter.alpha),
      FL_DOUBLE("filter.sigma_floor", mapper.filter.sigma_floor),
      FL_DOUBLE("cluster.position_radius", mapper.cluster.position_radius),
      FL_DOUBLE("cluster.cosine_threshold", mapper.cluster.cosine_threshold),
      FL_UINT("cluster.min_members", mapper.cluster.min_members, std::size_t),
      FL_DOUBLE("index.target_recall", mapper.index.target_recall),
      FL_UINT("localizer.k", localizer.k, std::size_t),
      FL_DOUBLE("localizer.mode_radius", localizer.mode_radius),
      FL_UINT("localizer.min_filtered_matches", localizer.min_filtered_matches, std::size_t),
      Key{"localizer.search",
          [](ExperimentConfig& c, std::string_view v) {
            if (v == "auto") {
              c.search_auto = true;
            } else if (v == "exact") {
              c.search_auto = false;
              c.localizer.search = SearchMode::exact;
            } else if (v == "approx") {
              c.search_auto = false;
              c.localizer.search = SearchMode::approx;
            } else {
              throw ConfigError("localizer.search must be auto, exact or approx");
            }
          },
          [](const ExperimentConfig& c) {
            if (c.search_auto) return std::string("auto");
            return std::string(c.localizer.search == SearchMode::exact ? "exact" : "approx");
          }},
      FL_UINT("ransac.min_samples", localizer.ransac.min_samples, std::size_t),
      FL_DOUBLE("ransac.residual_threshold", localizer.ransac.residual_threshold),
      FL_UINT("ransac.max_trials", localizer.ransac.max_trials, std::size_t),
      FL_DOUBLE("gates.max_position_error", gates.max_position_error),
      Key{"gates.max_angle_deg",
          [](ExperimentConfig& c, std::string_view v) {
            c.gates.max_angle_error = to_double(v) * std::numbers::pi / 180.0;
          },
          [](const ExperimentConfig& c) {
            return fmt(c.gates.max_angle_error * 180.0 / std::numbers::pi);
          }},
  };
  return k;
}

#undef FL_DOUBLE
#undef FL_UINT

}  // namespace

void ExperimentConfig::validate() const {
  floor.validate();
  detector.validate();
  mapper.filter.validate();
  mapper.cluster.validate();
  localizer.validate();
  if (!(mapping_tile > 0.0)) throw ConfigError("mapping.tile must be positive");
  if (mapping_noise_sigma < 0.0 || eval_noise_sigma < 0.0 || mapping_pose_noise_sigma < 0.0 ||
      eval_pose_noise_sigma < 0.0) {
    throw ConfigError("noise sigmas must be non-negative");
  }
  if (eval_areas.empty()) throw ConfigError("eval.areas must list at least one area");
  for (double a : eval_areas) {
    if (!(a > 0.0)) throw ConfigError("eval.areas must be positive");
  }
  if (eval_frames == 0 || eval_runs_per_area == 0) {
    throw ConfigError("eval.frames and eval.runs_per_area must be positive");
  }
  if (!(mapper.index.target_recall > 0.0 && mapper.index.target_recall <= 1.0)) {
    throw ConfigError("index.target_recall must lie in (0, 1]");
  }
  if (!(gates.max_position_error > 0.0) || !(gates.max_angle_error > 0.0)) {
    throw ConfigError("gates must be positive");
  }
}

SearchMode resolve_search(const ExperimentConfig& config, std::size_t n_entries) {
  if (!config.search_auto) return config.localizer.search;
  return n_entries < kExactSearchLimit ? SearchMode::exact : SearchMode::approx;
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig base) {
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected key = value");
    const std::string_view key = trim(line.substr(0, eq));
    const std::string_view value = trim(line.substr(eq + 1));
    const auto& table = keys();
    const auto it = std::find_if(table.begin(), table.end(),
                                 [&](const Key& k) { return key == k.name; });
    if (it == table.end()) throw ConfigError(where + "unknown key '" + std::string(key) + "'");
    if (!seen.insert(std::string(key)).second) {
      throw ConfigError(where + "duplicate key '" + std::string(key) + "'");
    }
    if (value.empty()) throw ConfigError(where + "missing value for '" + std::string(key) + "'");
    try {
      it->set(base, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + std::string(key) + ": " + e.what());
    }
  }
  base.validate();
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string format_config(const ExperimentConfig& config) {
  std::string out;
  for (const Key& k : keys()) out += std::string(k.name) + " = " + k.get(config) + "\n";
  return out;
}

}  // namespace floorloc
