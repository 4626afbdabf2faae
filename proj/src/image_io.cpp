#include "floorloc/image_io.hpp"

#include <cctype>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "floorloc/errors.hpp"

namespace floorloc {
namespace {

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_all(const std::filesystem::path& path, const std::string& header,
               const std::uint8_t* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) throw IoError(path, "write failed");
}

// Parses one whitespace-delimited header token, skipping '#' comments.
bool next_token(const std::string& buf, std::size_t& pos, long& value) {
  while (pos < buf.size()) {
    if (buf[pos] == '#') {
      while (pos < buf.size() && buf[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  if (pos >= buf.size() || !std::isdigit(static_cast<unsigned char>(buf[pos]))) return false;
  value = 0;
  while (pos < buf.size() && std::isdigit(static_cast<unsigned char>(buf[pos]))) {
    value = value * 10 + (buf[pos] - '0');
    if (value > 1'000'000) return false;
    ++pos;
  }
  return true;
}

struct PnmHeader {
  int width = 0;
  int height = 0;
  std::size_t data_offset = 0;
};

PnmHeader parse_pnm(const std::string& buf, const char* magic,
                    const std::filesystem::path& path) {
  if (buf.size() < 2 || buf[0] != magic[0] || buf[1] != magic[1]) {
    throw FormatError(FormatError::Kind::bad_magic,
                      "expected " + std::string(magic) + " image: " + path.string());
  }
  std::size_t pos = 2;
  long w = 0, h = 0, maxval = 0;
  if (!next_token(buf, pos, w) || !next_token(buf, pos, h) || !next_token(buf, pos, maxval)) {
    if (pos >= buf.size()) {
      throw FormatError(FormatError::Kind::truncated, "truncated image header: " + path.string());
    }
    throw FormatError(FormatError::Kind::malformed, "malformed image header: " + path.string());
  }
  if (w <= 0 || h <= 0 || maxval != 255) {
    throw FormatError(FormatError::Kind::malformed,
                      "unsupported image geometry or maxval: " + path.string());
  }
  if (pos >= buf.size() || !std::isspace(static_cast<unsigned char>(buf[pos]))) {
    throw FormatError(FormatError::Kind::truncated, "truncated image header: " + path.string());
  }
  return {static_cast<int>(w), static_cast<int>(h), pos + 1};
}

}  // namespace

void write_ppm(const std::filesystem::path& path, const RgbImage& image) {
  const std::string header =
      "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  write_all(path, header, image.data.data(), image.data.size());
}

RgbImage read_ppm(const std::filesystem::path& path) {
  const std::string buf = read_all(path);
  const PnmHeader h = parse_pnm(buf, "P6", path);
  RgbImage img(h.width, h.height);
  if (buf.size() - h.data_offset < img.data.size()) {
    throw FormatError(FormatError::Kind::truncated, "truncated pixel data: " + path.string());
  }
  std::copy_n(buf.begin() + static_cast<std::ptrdiff_t>(h.data_offset), img.data.size(),
              img.data.begin());
  return img;
}

void write_pgm(const std::filesystem::path& path, const GrayImage& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  write_all(path, header, image.data.data(), image.data.size());
}

GrayImage read_pgm(const std::filesystem::path& path) {
  const std::string buf = read_all(path);
  const PnmHeader h = parse_pnm(buf, "P5", path);
  GrayImage img(h.width, h.height);
  if (buf.size() - h.data_offset < img.data.size()) {
    throw FormatError(FormatError::Kind::truncated, "truncated pixel data: " + path.string());
  }
  std::copy_n(buf.begin() + static_cast<std::ptrdiff_t>(h.data_offset), img.data.size(),
              img.data.begin());
  return img;
}

void write_pose_csv(const std::filesystem::path& path, const PoseLog& log) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path, "cannot open for writing");
  out << "frame_id,t,x,y,theta\n";
  char line[160];
  for (const PoseSample& s : log.samples) {
    std::snprintf(line, sizeof(line), "%" PRIu64 ",%.6f,%.6f,%.6f,%.6f\n", s.frame_id, s.t,
                  s.pose.x, s.pose.y, s.pose.theta);
    out << line;
  }
  if (!out) throw IoError(path, "write failed");
}

PoseLog read_pose_csv(const std::filesystem::path& path, double capture_rate) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::string line;
  if (!std::getline(in, line)) {
    throw FormatError(FormatError::Kind::truncated, "empty pose file: " + path.string());
  }
  if (line != "frame_id,t,x,y,theta") {
    throw FormatError(FormatError::Kind::bad_magic, "unexpected pose header: " + path.string());
  }
  PoseLog log;
  log.capture_rate = capture_rate;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    PoseSample s;
    unsigned long long id = 0;
    int consumed = 0;
    const int n = std::sscanf(line.c_str(), "%llu,%lf,%lf,%lf,%lf%n", &id, &s.t, &s.pose.x,
                              &s.pose.y, &s.pose.theta, &consumed);
    if (n != 5 || static_cast<std::size_t>(consumed) != line.size()) {
      throw FormatError(FormatError::Kind::malformed,
                        "bad pose row " + std::to_string(line_no) + ": " + path.string());
    }
    s.frame_id = id;
    log.samples.push_back(s);
  }
  return log;
}

}  // namespace floorloc
