#pragma once

#include <stdexcept>
#include <string>

namespace fuselab {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid arguments, violated preconditions, or broken type invariants.
/// The CLI maps these to exit code 1.
struct ValidationError : Error {
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

/// Filesystem-level failures (missing file, unwritable path, short write).
/// The CLI maps these to exit code 2.
struct IoError : Error {
  explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Structurally invalid file content: bad magic, unknown version,
/// truncated payload, inconsistent counts.
struct FormatError : IoError {
  explicit FormatError(const std::string& msg) : IoError(msg) {}
};

}  // namespace fuselab
