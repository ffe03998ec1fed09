#pragma once

#include <stdexcept>
#include <string>

namespace afpseg {

/// Invalid generator, network or training configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Degenerate geometry passed to a raster primitive.
struct GeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Tensor or raster extents that do not fit together.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Malformed sample data (label ids out of range, non-finite loss, ...).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// I/O failure or malformed container; the message always names the path.
struct FileError : std::runtime_error {
  FileError(const std::string& path, const std::string& what)
      : std::runtime_error(path + ": " + what), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

}  // namespace afpseg
