#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>

namespace floorloc {

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  IoError(const std::filesystem::path& path, std::string_view what)
      : std::runtime_error(std::string(what) + ": " + path.string()), path_(path) {}

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// File was readable but its content is not a valid instance of the format.
class FormatError : public std::runtime_error {
 public:
  enum class Kind { bad_magic, unsupported_version, truncated, checksum_mismatch, malformed };

  FormatError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

}  // namespace floorloc
