#pragma once

// Binary PPM (P6) / PGM (P5) images and the pose CSV used by datasets.

#include <filesystem>

#include "floorloc/floorsim.hpp"
#include "floorloc/image.hpp"

namespace floorloc {

void write_ppm(const std::filesystem::path& path, const RgbImage& image);
RgbImage read_ppm(const std::filesystem::path& path);

void write_pgm(const std::filesystem::path& path, const GrayImage& image);
GrayImage read_pgm(const std::filesystem::path& path);

/// Header `frame_id,t,x,y,theta`; fixed six-decimal fields; LF endings.
void write_pose_csv(const std::filesystem::path& path, const PoseLog& log);
PoseLog read_pose_csv(const std::filesystem::path& path, double capture_rate = 60.0);

}  // namespace floorloc
